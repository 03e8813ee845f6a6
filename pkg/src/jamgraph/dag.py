"""Directed graphs under a known causal ordering.

Each node is regressed on the bases of its predecessors with an unsquared
group penalty per parent, independently of every other node::

    1/(2n) ||x_j - sum_{k < j} psi_k beta_jk||^2 + lam * sum_{k < j} ||psi_k beta_jk||
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import resolve_backend
from .basis import as_data
from .errors import NonFinite
from .selection import assemble_path
from .solver import FitResult, SolverOptions, _check_shapes, gradients

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CausalOrdering:
    """A permutation of the variables; ``order[0]`` has no predecessors."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(v) for v in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"ordering is not a permutation of 0..{len(order) - 1}")
        object.__setattr__(self, "order", order)

    @property
    def d(self):
        return len(self.order)

    @property
    def position(self):
        pos = np.empty(self.d, dtype=np.int64)
        pos[list(self.order)] = np.arange(self.d)
        return pos

    def precedes(self, k, j):
        pos = self.position
        return pos[k] < pos[j]

    def predecessors(self, j):
        """Predecessors of ``j`` in increasing variable index."""
        pos = self.position
        return np.flatnonzero(pos < pos[j]).astype(np.int64)

    @classmethod
    def identity(cls, d):
        return cls(tuple(range(d)))


def _as_ordering(ordering, d):
    if ordering is None:
        return CausalOrdering.identity(d)
    if not isinstance(ordering, CausalOrdering):
        ordering = CausalOrdering(ordering)
    if ordering.d != d:
        raise ValueError(f"ordering has {ordering.d} entries for {d} variables")
    return ordering


def node_lambda_max(design, X, j, parents):
    """Smallest penalty at which node ``j`` has no parents."""
    if len(parents) == 0:
        return 0.0
    xj = np.asarray(as_data(X).values[:, j])
    b = np.einsum("kni,n->ki", design.psi[parents], xj) / design.n
    return float(np.sqrt((b**2).sum(axis=1)).max() / math.sqrt(design.n))


def dag_lambda_max(design, X, ordering=None):
    X = _check_shapes(design, X)
    ordering = _as_ordering(ordering, design.d)
    return max(node_lambda_max(design, X, j, ordering.predecessors(j)) for j in range(design.d))


def _fit_node(psi, psit, xj, parents, lam, opts, beta_j, backend):
    """Solve one node's problem in place; returns (objective, sweeps, converged, trace, violations)."""
    n = psi.shape[1]
    sqn = math.sqrt(n)
    resid = xj - np.einsum("kni,ki->n", psi, beta_j) if beta_j.any() else xj.copy()

    def node_obj():
        return 0.5 * float(resid @ resid) / n + lam * sqn * float(np.sqrt((beta_j**2).sum(axis=1)).sum())

    trace = [node_obj()]
    if len(parents) == 0:
        return trace[0], 0, True, trace, 0
    sweeps = since = violations = 0
    converged = False
    while sweeps < opts.max_sweeps:
        delta = kernels.dag_node_sweep(psit, beta_j, resid, lam, parents, backend)
        sweeps += 1
        since += 1
        if since >= opts.recompute_every:
            resid[:] = xj - np.einsum("kni,ki->n", psi, beta_j)
            since = 0
        obj = node_obj()
        if not (math.isfinite(delta) and math.isfinite(obj)):
            raise NonFinite(f"non-finite update at sweep {sweeps} (lam={lam:g})")
        prev = trace[-1]
        trace.append(obj)
        if obj > prev + opts.descent_slack * max(1.0, abs(prev)):
            violations += 1
        if delta < opts.tol and abs(prev - obj) <= opts.obj_tol * max(abs(obj), 1e-300):
            converged = True
            break
        if opts.active_set:
            active = parents[np.abs(beta_j[parents]).sum(axis=1) > 0]
            if 0 < len(active) < len(parents):
                while sweeps < opts.max_sweeps:
                    delta = kernels.dag_node_sweep(psit, beta_j, resid, lam, active, backend)
                    sweeps += 1
                    prev, obj = trace[-1], node_obj()
                    trace.append(obj)
                    if obj > prev + opts.descent_slack * max(1.0, abs(prev)):
                        violations += 1
                    if delta < opts.tol and abs(prev - obj) <= opts.obj_tol * max(abs(obj), 1e-300):
                        break
    return trace[-1], sweeps, converged, trace, violations


def fit_dag(design, X, ordering=None, lam=None, opts=None, beta0=None, threads=1):
    """Estimate the parents of every node at penalty ``lam``.

    Returns a :class:`FitResult` with ``directed=True``; ``coefficients[j, k]``
    is nonzero only if ``k`` precedes ``j``. Use ``result.graph()`` for the
    directed edge set (edges ``k -> j``).
    """
    if lam is None or lam <= 0:
        raise ValueError("lam must be positive")
    X = _check_shapes(design, X)
    opts = opts or SolverOptions()
    ordering = _as_ordering(ordering, design.d)
    backend = resolve_backend(opts.backend)
    d, n, r = design.d, design.n, design.r
    beta = np.zeros((d, d, r)) if beta0 is None else np.array(beta0, dtype=np.float64)
    xt = np.ascontiguousarray(X.values.T)
    psi = design.psi

    def solve(j):
        parents = np.ascontiguousarray(ordering.predecessors(j))
        beta_j = beta[j]
        mask = np.ones(d, dtype=bool)
        mask[parents] = False
        beta_j[mask] = 0.0
        return _fit_node(psi, design.psit, xt[j], parents, float(lam), opts, beta_j, backend)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(solve, range(d)))
    else:
        results = [solve(j) for j in range(d)]

    fitted = kernels.fitted_values(psi, beta)
    resid = (xt - fitted).T.copy()
    objective = float(sum(res[0] for res in results))
    sweeps = max(res[1] for res in results)
    converged = all(res[2] for res in results)
    violations = sum(res[4] for res in results)
    if violations:
        log.warning("node objective increased on %d sweeps (lam=%g)", violations, lam)
    trace = np.array([res[3][-1] for res in results])
    for arr in (beta, resid):
        arr.setflags(write=False)
    fitted_t = fitted.T.copy()
    fitted_t.setflags(write=False)
    return FitResult(beta, fitted_t, resid, objective, sweeps, converged, float(lam),
                     trace, violations, True, ordering.order)


def dag_objective(design, X, beta, lam, ordering=None):
    """Sum over nodes of the per-node penalized objectives, from the basis matrices."""
    X = _check_shapes(design, X)
    ordering = _as_ordering(ordering, design.d)
    beta = np.asarray(beta, dtype=np.float64)
    total = 0.0
    for j in range(design.d):
        parents = ordering.predecessors(j)
        fit_j = sum((design.psi[k] @ beta[j, k] for k in parents), np.zeros(design.n))
        res = X.values[:, j] - fit_j
        total += 0.5 * res @ res / design.n
        total += lam * sum(np.linalg.norm(design.psi[k] @ beta[j, k]) for k in parents)
    return float(total)


def dag_kkt_residual(design, X, fit_result, lam=None):
    """Largest optimality violation over all (node, predecessor) blocks."""
    lam = fit_result.lam if lam is None else lam
    ordering = _as_ordering(fit_result.ordering, design.d)
    beta = np.asarray(fit_result.coefficients)
    grad = gradients(design, X, beta)
    sqn = math.sqrt(design.n)
    worst = 0.0
    for j in range(design.d):
        for k in ordering.predecessors(j):
            nrm = np.linalg.norm(beta[j, k])
            if nrm > 0:
                v = np.linalg.norm(grad[j, k] - lam * sqn * beta[j, k] / nrm)
            else:
                v = max(float(grad[j, k] @ grad[j, k]) / (lam * sqn) ** 2 - 1.0, 0.0)
            worst = max(worst, v)
    return worst


def fit_dag_path(design, X, ordering=None, grid=None, opts=None, threads=1, certify=True,
                 kkt_tol=1e-6, df_convention="nscaled"):
    """Warm-started directed fits over a decreasing penalty grid."""
    X = _check_shapes(design, X)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be a nonempty strictly decreasing sequence")
    fits, kkt = [], []
    beta = None
    for lam in grid:
        f = fit_dag(design, X, ordering, lam, opts, beta, threads)
        beta = f.coefficients
        fits.append(f)
        if certify:
            res = dag_kkt_residual(design, X, f)
            if res > kkt_tol:
                log.warning("KKT residual %.3g above %.1g at lam=%g", res, kkt_tol, lam)
            kkt.append(res)
        else:
            kkt.append(np.nan)
    return assemble_path(grid, fits, design, kkt, directed=True, df_convention=df_convention)
