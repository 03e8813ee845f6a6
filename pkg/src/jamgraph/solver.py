"""Coupled standardized group lasso over all variable pairs.

The objective for coefficients ``beta[j, k]`` (regression of x_j on the
basis of x_k) is::

    1/(2n) sum_j ||x_j - sum_k psi_k beta_jk||^2
        + lam * sum_{j<k} sqrt(||psi_k beta_jk||^2 + ||psi_j beta_kj||^2)

and is minimized by cycling exact two-block updates over pairs j < k.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._accel import resolve_backend
from .basis import ExpandedDesign, as_data
from .errors import NonFinite, ShapeMismatch

log = logging.getLogger(__name__)

EDGE_TOL = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7
    obj_tol: float = 1e-10
    max_sweeps: int = 1000
    recompute_every: int = 50
    active_set: bool = True
    backend: str = "auto"
    descent_slack: float = 1e-12   # relative to max(1, |objective|)


@dataclass(frozen=True)
class Graph:
    """Edge set over ``d`` vertices, 0-based internally.

    Undirected edges are stored as ``(a, b)`` with ``a < b``; directed ones as
    ``(src, dst)``.
    """

    d: int
    edges: frozenset = frozenset()
    directed: bool = False
    names: tuple = None

    def __post_init__(self):
        clean = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if not (0 <= a < self.d and 0 <= b < self.d):
                raise ValueError(f"edge ({a}, {b}) outside 0..{self.d - 1}")
            clean.add((a, b) if self.directed else (min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(clean))

    def __len__(self):
        return len(self.edges)

    def sorted_edges(self):
        return sorted(self.edges)

    def adjacency(self):
        A = np.zeros((self.d, self.d), dtype=bool)
        for a, b in self.edges:
            A[a, b] = True
            if not self.directed:
                A[b, a] = True
        return A

    def undirected(self):
        return Graph(self.d, self.edges, False, self.names)


@dataclass(frozen=True)
class FitResult:
    """Solution at one penalty level.

    ``coefficients[j, k]`` is the basis coefficient vector of the component
    of x_j driven by x_k; ``fitted`` and ``residuals`` are (n, d).
    """

    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    objective: float
    sweeps: int
    converged: bool
    lam: float
    objective_trace: np.ndarray = field(repr=False, default=None)
    descent_violations: int = 0
    directed: bool = False
    ordering: tuple = None

    @property
    def d(self):
        return self.coefficients.shape[0]

    @property
    def n(self):
        return self.fitted.shape[0]

    def graph(self, tol=EDGE_TOL, names=None):
        if self.directed:
            sq = np.einsum("jkr,jkr->jk", self.coefficients, self.coefficients)
            return Graph(self.d, {(k, j) for j, k in zip(*np.nonzero(sq > tol))}, True, names)
        return edge_set(self.coefficients, tol, names)


def _check_shapes(design, X):
    X = as_data(X)
    if X.d != design.d or X.n != design.n:
        raise ShapeMismatch(f"design is n={design.n}, d={design.d} but data is n={X.n}, d={X.d}")
    return X


def lex_pairs(d):
    """All pairs ``j < k`` in lexicographic order as an (m, 2) int64 array."""
    j, k = np.triu_indices(d, 1)
    return np.ascontiguousarray(np.column_stack([j, k]), dtype=np.int64)


def objective(design, X, beta, lam):
    """Evaluate the penalized objective directly from the basis matrices."""
    X = _check_shapes(design, X)
    beta = np.asarray(beta, dtype=np.float64)
    d, n = design.d, design.n
    if beta.shape != (d, d, design.r):
        raise ShapeMismatch(f"beta has shape {beta.shape}, expected {(d, d, design.r)}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    resid = X.values - kernels.fitted_values(design.psi, beta).T
    loss = 0.5 * np.sum(resid**2) / n
    fnorm = np.empty((d, d))
    for k in range(d):
        fnorm[:, k] = np.sum((design.psi[k] @ beta[:, k, :].T) ** 2, axis=0)
    iu = np.triu_indices(d, 1)
    pen = np.sum(np.sqrt(fnorm[iu] + fnorm.T[iu]))
    return float(loss + lam * pen)


@dataclass
class SolverState:
    """Mutable working state of one fit: coefficients and cached residuals."""

    psi: np.ndarray     # (d, n, r)
    psit: np.ndarray    # (d, r, n)
    xt: np.ndarray      # (d, n) data, node-major
    beta: np.ndarray    # (d, d, r)
    resid: np.ndarray   # (d, n)
    lam: float
    backend: str = "numpy"

    @classmethod
    def start(cls, design, X, lam, beta0=None, backend="auto"):
        X = _check_shapes(design, X)
        d, r = design.d, design.r
        beta = np.zeros((d, d, r)) if beta0 is None else np.array(beta0, dtype=np.float64)
        if beta.shape != (d, d, r):
            raise ShapeMismatch(f"warm start has shape {beta.shape}, expected {(d, d, r)}")
        xt = np.ascontiguousarray(X.values.T)
        state = cls(design.psi, design.psit, xt, beta, np.empty_like(xt), float(lam),
                    resolve_backend(backend))
        state.refresh()
        return state

    def refresh(self):
        self.resid[:] = self.xt - kernels.fitted_values(self.psi, self.beta)

    def objective(self):
        return kernels.joint_objective(self.resid, self.beta, self.lam, self.backend)


def block_update(state, j, k):
    """Exact joint minimization over the two blocks of the pair {j, k}.

    Refits both directions on their partial residuals, then scales both by
    the shared factor ``(1 - n*lam/nu)_+`` where ``nu`` is the joint norm of
    the two unthresholded fitted functions. Returns the coefficient change.
    """
    if j == k:
        raise ValueError("block_update needs j != k")
    pair = np.array([[min(j, k), max(j, k)]], dtype=np.int64)
    return kernels.joint_sweep(state.psit, state.beta, state.resid, state.lam, pair, state.backend)


def fit(design, X, lam, opts=None, beta0=None, pairs=None):
    """Minimize the coupled objective at penalty ``lam``.

    Parameters
    ----------
    design : ExpandedDesign
    X : DataMatrix or array (n, d)
        The responses, normally the same standardized data the design was
        built from.
    lam : float
        Penalty level, > 0.
    opts : SolverOptions
    beta0 : array (d, d, r), optional
        Warm start; zeros otherwise.
    pairs : array (m, 2), optional
        Sweep order over pairs ``j < k``; lexicographic by default. Pairs left
        out stay at their starting value.

    Returns
    -------
    FitResult
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    opts = opts or SolverOptions()
    state = SolverState.start(design, X, lam, beta0, opts.backend)
    if pairs is None:
        pairs = lex_pairs(design.d)
    else:
        pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(pairs[:, 0] >= pairs[:, 1]):
            raise ValueError("pairs must satisfy j < k")
    return _run(state, pairs, opts, design)


def _run(state, pairs, opts, design):
    trace = [state.objective()]
    sweeps = 0
    since_refresh = 0
    converged = False
    violations = 0

    def step(block_pairs):
        nonlocal sweeps, since_refresh, violations
        delta = kernels.joint_sweep(state.psit, state.beta, state.resid, state.lam,
                                    block_pairs, state.backend)
        sweeps += 1
        since_refresh += 1
        obj = state.objective()
        if not (math.isfinite(delta) and math.isfinite(obj)):
            raise NonFinite(f"non-finite update at sweep {sweeps} (lam={state.lam:g})")
        prev = trace[-1]
        if obj > prev + opts.descent_slack * max(1.0, abs(prev)):
            violations += 1
        if since_refresh >= opts.recompute_every:
            # compare within one residual lineage; the refresh only removes drift
            state.refresh()
            since_refresh = 0
            obj = state.objective()
        trace.append(obj)
        return delta < opts.tol and abs(prev - obj) <= opts.obj_tol * max(abs(obj), 1e-300)

    while sweeps < opts.max_sweeps:
        if step(pairs):
            converged = True
            break
        if not opts.active_set:
            continue
        norms = kernels.pair_norms(state.beta)
        active = pairs[norms[pairs[:, 0], pairs[:, 1]] > 0]
        if len(active) == len(pairs) or len(active) == 0:
            continue
        active = np.ascontiguousarray(active)
        while sweeps < opts.max_sweeps and not step(active):
            pass

    if violations:
        log.warning("objective increased on %d sweeps (lam=%g)", violations, state.lam)
    if not converged:
        log.warning("no convergence after %d sweeps (lam=%g)", sweeps, state.lam)
    state.refresh()
    return _result(state, design, sweeps, converged, trace, violations)


def _result(state, design, sweeps, converged, trace, violations, directed=False, ordering=None,
            obj=None):
    resid = state.resid.T.copy()
    fitted = state.xt.T - resid
    beta = state.beta.copy()
    if obj is None:
        obj = state.objective()
    for arr in (beta, resid, fitted):
        arr.setflags(write=False)
    return FitResult(beta, fitted, resid, float(obj), sweeps, converged, state.lam,
                     np.asarray(trace), violations, directed, ordering)


def edge_set(beta, tol=EDGE_TOL, names=None):
    """Undirected graph with (j, k) present iff ``|beta_jk|^2 + |beta_kj|^2 > tol``."""
    beta = np.asarray(beta)
    sq = np.einsum("jkr,jkr->jk", beta, beta)
    both = sq + sq.T
    j, k = np.nonzero(np.triu(both > tol, 1))
    return Graph(beta.shape[0], set(zip(j.tolist(), k.tolist())), False, names)


def gradients(design, X, beta):
    """Loss gradients ``psi_k^T (x_j - fitted_j) / n`` as a (d, d, r) array."""
    X = _check_shapes(design, X)
    resid = X.values.T - kernels.fitted_values(design.psi, beta)
    return np.einsum("kni,jn->jki", design.psi, resid) / design.n


def kkt_residual(design, X, fit_result, lam=None):
    """Largest violation of the first-order optimality conditions.

    For an active pair the violation is the norm of the stationarity
    residual ``grad - lam*sqrt(n)*beta/||beta_pair||`` over both blocks; for
    an inactive pair it is ``(||g_jk||^2 + ||g_kj||^2 - 1)_+`` where ``g`` is
    the implied subgradient, scaled so that 1 is the feasibility boundary.
    """
    lam = fit_result.lam if lam is None else lam
    beta = np.asarray(fit_result.coefficients)
    grad = gradients(design, X, beta)
    sqn = math.sqrt(design.n)
    norms = kernels.pair_norms(beta)
    active = norms > 0
    safe = np.where(active, norms, 1.0)
    stat = grad - lam * sqn * beta / safe[:, :, None]
    stat_sq = np.einsum("jki,jki->jk", stat, stat)
    grad_sq = np.einsum("jki,jki->jk", grad, grad)
    iu = np.triu_indices(design.d, 1)
    act = active[iu]
    stat_v = np.sqrt(stat_sq + stat_sq.T)[iu][act]
    sub_v = ((grad_sq + grad_sq.T)[iu][~act] / (lam * sqn) ** 2 - 1.0).clip(min=0.0)
    return float(max(stat_v.max(initial=0.0), sub_v.max(initial=0.0)))
