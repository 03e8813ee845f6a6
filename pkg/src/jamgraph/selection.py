"""Regularization paths and BIC-based choice of the penalty."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .basis import as_data
from .errors import ZeroResidual
from .solver import EDGE_TOL, SolverOptions, _check_shapes, fit, kkt_residual

log = logging.getLogger(__name__)


def lambda_max(design, X):
    """Smallest penalty at which the all-zero solution is optimal.

    ``max_{j<k} sqrt(|b_jk|^2 + |b_kj|^2) / sqrt(n)`` with ``b_jk = psi_k^T x_j / n``.
    """
    X = _check_shapes(design, X)
    b = np.einsum("kni,nj->jki", design.psi, X.values) / design.n
    sq = np.einsum("jki,jki->jk", b, b)
    both = sq + sq.T
    iu = np.triu_indices(design.d, 1)
    if len(iu[0]) == 0:
        return 0.0
    return float(math.sqrt(both[iu].max()) / math.sqrt(design.n))


def lambda_grid(lmax, count=100, ratio=0.01):
    """Log-spaced decreasing grid from ``lmax`` down to ``ratio * lmax``."""
    if count < 2:
        raise ValueError("count must be at least 2")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if lmax <= 0:
        raise ValueError("lambda_max must be positive")
    grid = np.geomspace(lmax, ratio * lmax, count)
    grid[0], grid[-1] = lmax, ratio * lmax
    return grid


DF_CONVENTIONS = ("nscaled", "literal")


def degrees_of_freedom(coefficients, lam, n, ranks, convention="nscaled", tol=EDGE_TOL):
    """Per-node effective degrees of freedom.

    ``|S_j| + sum_{k in S_j} (r_k - 1) * F_jk / (F_jk + c)`` with
    ``F_jk = ||psi_k beta_jk||^2 = n * ||beta_jk||^2`` and ``c = n * lam``
    (``"nscaled"``, the default) or ``c = lam`` (``"literal"``). Blocks with
    ``||beta_jk||^2 <= tol`` count as zero, matching the edge sets.
    """
    if convention not in DF_CONVENTIONS:
        raise ValueError(f"convention must be one of {DF_CONVENTIONS}")
    sq = np.einsum("jkr,jkr->jk", coefficients, coefficients)
    support = sq > tol
    fnorm = n * sq
    denom_lam = n * lam if convention == "nscaled" else lam
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(support, fnorm / (fnorm + denom_lam), 0.0)
    extra = (np.asarray(ranks)[None, :] - 1) * ratio
    return support.sum(axis=1) + extra.sum(axis=1)


def bic(fit_result, lam=None, ranks=None, convention="nscaled"):
    """Per-node BIC values and their sum.

    ``BIC_j = n log(RSS_j) + log(n) DF_j`` with ``RSS_j`` the raw (not
    averaged) residual sum of squares of node j.

    Returns
    -------
    per_node : ndarray (d,)
    total : float
    rss : ndarray (d,)
    df : ndarray (d,)
    """
    lam = fit_result.lam if lam is None else lam
    beta = np.asarray(fit_result.coefficients)
    d, r = beta.shape[0], beta.shape[2]
    n = fit_result.n
    if ranks is None:
        ranks = np.full(d, r)
    rss = np.sum(np.asarray(fit_result.residuals) ** 2, axis=0)
    for j in range(d):
        if rss[j] <= 0:
            raise ZeroResidual(j)
    df = degrees_of_freedom(beta, lam, n, ranks, convention)
    per_node = n * np.log(rss) + math.log(n) * df
    return per_node, float(per_node.sum()), rss, df


@dataclass(frozen=True)
class PathResult:
    """Fits along a decreasing penalty grid with their BIC summaries.

    ``bic_total``, ``df`` and ``selected_index`` follow ``df_convention``;
    ``bic_total_alt`` / ``selected_index_alt`` use the other convention and
    are diagnostics only.
    """

    lambdas: np.ndarray
    fits: tuple
    bic_total: np.ndarray
    df: np.ndarray           # (L, d)
    rss: np.ndarray          # (L, d)
    selected_index: int
    kkt: np.ndarray
    bic_total_alt: np.ndarray = None
    selected_index_alt: int = None
    directed: bool = False
    df_convention: str = "nscaled"

    def __len__(self):
        return len(self.lambdas)

    def edge_counts(self, tol=EDGE_TOL):
        return np.array([len(f.graph(tol)) for f in self.fits])

    @property
    def selected(self):
        return self.fits[self.selected_index]

    def rows(self, tol=EDGE_TOL):
        """One dict per penalty level, matching the path CSV columns."""
        counts = self.edge_counts(tol)
        alt = [c for c in DF_CONVENTIONS if c != self.df_convention][0]
        out = []
        for i, lam in enumerate(self.lambdas):
            out.append({
                "lambda": float(lam),
                "edge_count": int(counts[i]),
                "bic_total": float(self.bic_total[i]),
                "df_total": float(self.df[i].sum()),
                "rss_total": float(self.rss[i].sum()),
                f"bic_total_{alt}": float(self.bic_total_alt[i]),
                "kkt": float(self.kkt[i]),
            })
        return out


def select_index(values):
    """Index of the minimum; ties go to the earliest entry (largest penalty)."""
    values = np.asarray(values, dtype=np.float64)
    return int(np.flatnonzero(values == values.min())[0])


def select(path):
    """Return ``(lam, FitResult)`` minimizing total BIC (ties -> sparser)."""
    i = select_index(path.bic_total)
    return float(path.lambdas[i]), path.fits[i]


def assemble_path(lambdas, fits, design, kkt=None, directed=False, df_convention="nscaled"):
    lambdas = np.asarray(lambdas, dtype=np.float64)
    alt = [c for c in DF_CONVENTIONS if c != df_convention][0]
    L, d = len(fits), design.d
    bic_total = np.empty(L)
    bic_alt = np.empty(L)
    dfs = np.empty((L, d))
    rsss = np.empty((L, d))
    for i, f in enumerate(fits):
        _, bic_total[i], rsss[i], dfs[i] = bic(f, lambdas[i], design.ranks, df_convention)
        _, bic_alt[i], _, _ = bic(f, lambdas[i], design.ranks, alt)
    if kkt is None:
        kkt = np.full(L, np.nan)
    return PathResult(lambdas, tuple(fits), bic_total, dfs, rsss, select_index(bic_total),
                      np.asarray(kkt), bic_alt, select_index(bic_alt), directed, df_convention)


def fit_path(design, X, grid, opts=None, certify=True, kkt_tol=1e-6, df_convention="nscaled"):
    """Fit every penalty in ``grid`` (decreasing) with warm starts.

    Each fit is checked against the optimality conditions when ``certify``
    is set; a residual above ``kkt_tol`` is logged, not raised.
    """
    X = as_data(X)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be strictly decreasing")
    opts = opts or SolverOptions()
    fits, kkt = [], []
    beta = None
    for lam in grid:
        f = fit(design, X, lam, opts, beta0=beta)
        beta = f.coefficients
        fits.append(f)
        if certify:
            res = kkt_residual(design, X, f)
            if res > kkt_tol:
                log.warning("KKT residual %.3g above %.1g at lam=%g", res, kkt_tol, lam)
            kkt.append(res)
        else:
            kkt.append(np.nan)
    return assemble_path(grid, fits, design, kkt, df_convention=df_convention)


def default_path(design, X, count=100, ratio=0.01, opts=None, certify=True):
    """Path over the default grid anchored at :func:`lambda_max`."""
    grid = lambda_grid(lambda_max(design, X), count, ratio)
    return fit_path(design, X, grid, opts, certify)
