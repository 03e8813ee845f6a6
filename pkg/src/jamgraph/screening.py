"""Marginal screening: split the variables into connected components of a
thresholded canonical-correlation graph and solve each component separately.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import resolve_backend
from .basis import RANK_TOL, numerical_rank
from .errors import RankDeficient
from .selection import assemble_path
from .solver import FitResult, Graph, SolverOptions, _check_shapes, fit, kkt_residual

log = logging.getLogger(__name__)


def canonical_corr(A, B):
    """Largest canonical correlation between the column spaces of A and B.

    Both inputs are centered here; the result is the top singular value of
    ``Qa^T Qb`` for orthonormal bases of the two centered column spaces.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    for M in (A, B):
        rank = numerical_rank(M, RANK_TOL)
        if rank < M.shape[1]:
            raise RankDeficient(rank=rank, r=M.shape[1])
    Qa, _ = np.linalg.qr(A)
    Qb, _ = np.linalg.qr(B)
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0))


def association_matrix(design, backend="auto"):
    """Canonical correlations between the bases of every pair of variables.

    Uses the orthonormality of the design: the value for (j, k) is the top
    singular value of ``psi_j^T psi_k / n``.
    """
    d, n, r = design.psi.shape
    flat = design.psi.transpose(1, 0, 2).reshape(n, d * r)
    gram = flat.T @ flat / n
    rho = kernels.block_top_singular(gram, d, r, resolve_backend(backend))
    rho = np.clip(rho + rho.T, 0.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho


class UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def components_of(graph):
    """Connected components as sorted index lists, ordered by smallest member."""
    uf = UnionFind(graph.d)
    for a, b in graph.edges:
        uf.union(a, b)
    groups = {}
    for v in range(graph.d):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


@dataclass(frozen=True)
class ScreenReport:
    marginal_graph: Graph
    components: tuple
    rho: np.ndarray
    lambda2: float

    def membership(self):
        """Component id per variable (ids ordered by smallest member)."""
        out = np.empty(self.marginal_graph.d, dtype=np.int64)
        for cid, comp in enumerate(self.components):
            out[list(comp)] = cid
        return out


def marginal_graph(design, lambda2, association=association_matrix):
    """Threshold the association matrix at ``lambda2`` and find components.

    ``association`` maps a design to a symmetric (d, d) matrix with entries in
    [0, 1]; canonical correlation is the built-in measure.
    """
    if not 0.0 <= lambda2 <= 1.0:
        raise ValueError("lambda2 must lie in [0, 1]")
    rho = association(design)
    d = design.d
    j, k = np.nonzero(np.triu(rho >= lambda2, 1))
    graph = Graph(d, set(zip(j.tolist(), k.tolist())))
    comps = tuple(tuple(c) for c in components_of(graph))
    rho.setflags(write=False)
    return ScreenReport(graph, comps, rho, float(lambda2))


def fit_screened(design, X, lam, lambda2, opts=None, beta0=None, threads=1, report=None):
    """Solve the coupled problem separately on each marginal component.

    Pairs that straddle two components are fixed at zero. With
    ``lambda2 = 0`` there is a single component and the result is the plain
    :func:`jamgraph.solver.fit` solution.

    Returns
    -------
    (FitResult, ScreenReport)
    """
    X = _check_shapes(design, X)
    opts = opts or SolverOptions()
    if report is None:
        report = marginal_graph(design, lambda2)
    d, n, r = design.d, design.n, design.r
    if len(report.components) == 1:
        return fit(design, X, lam, opts, beta0), report

    beta = np.zeros((d, d, r))
    jobs = [np.asarray(c) for c in report.components if len(c) > 1]

    def solve(idx):
        start = None if beta0 is None else np.asarray(beta0)[np.ix_(idx, idx)]
        return idx, fit(design.subset(idx), X.columns(idx), lam, opts, start)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(solve, jobs))
    else:
        results = [solve(idx) for idx in jobs]

    resid = X.values.copy()
    sweeps, converged, violations = 0, True, 0
    for idx, sub in results:
        beta[np.ix_(idx, idx)] = sub.coefficients
        resid[:, idx] = sub.residuals
        sweeps = max(sweeps, sub.sweeps)
        converged &= sub.converged
        violations += sub.descent_violations
    obj = kernels.joint_objective(np.ascontiguousarray(resid.T), beta, lam, "numpy")
    fitted = X.values - resid
    for arr in (beta, resid, fitted):
        arr.setflags(write=False)
    result = FitResult(beta, fitted, resid, float(obj), sweeps, converged, float(lam),
                       np.array([obj]), violations)
    return result, report


def fit_screened_path(design, X, grid, lambda2, opts=None, threads=1, certify=True,
                      df_convention="nscaled"):
    """Warm-started screened fits over a decreasing grid (one marginal graph)."""
    X = _check_shapes(design, X)
    report = marginal_graph(design, lambda2)
    fits, kkt = [], []
    beta = None
    for lam in np.asarray(grid, dtype=np.float64):
        f, _ = fit_screened(design, X, lam, lambda2, opts, beta, threads, report)
        beta = f.coefficients
        fits.append(f)
        kkt.append(_screened_kkt(design, X, f, report) if certify else np.nan)
    return assemble_path(grid, fits, design, kkt, df_convention=df_convention), report


def _screened_kkt(design, X, f, report):
    """KKT residual of the component-restricted problems."""
    worst = 0.0
    for comp in report.components:
        if len(comp) < 2:
            continue
        idx = np.asarray(comp)
        sub = FitResult(f.coefficients[np.ix_(idx, idx)], f.fitted[:, idx], f.residuals[:, idx],
                        0.0, f.sweeps, f.converged, f.lam)
        worst = max(worst, kkt_residual(design.subset(idx), X.columns(idx), sub))
    return worst
