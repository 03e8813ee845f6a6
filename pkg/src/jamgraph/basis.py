"""Polynomial basis expansion with per-variable orthonormalization."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import ConstantColumn, RankDeficient, ShapeMismatch

RANK_TOL = 1e-10


@dataclass(frozen=True)
class BasisSpec:
    """Ordered set of polynomial powers used for every additive component."""

    degrees: tuple = (1, 2, 3)

    def __post_init__(self):
        degrees = tuple(int(p) for p in self.degrees)
        if not degrees:
            raise ValueError("degrees must be nonempty")
        if any(p < 1 for p in degrees):
            raise ValueError(f"degrees must be positive, got {degrees}")
        if any(b <= a for a, b in zip(degrees, degrees[1:])):
            raise ValueError(f"degrees must be strictly increasing, got {degrees}")
        object.__setattr__(self, "degrees", degrees)

    @property
    def r(self):
        return len(self.degrees)

    @classmethod
    def parse(cls, text):
        """Build from a string such as ``"1,2,3"``."""
        return cls(tuple(int(tok) for tok in str(text).replace(" ", "").split(",") if tok))

    def __str__(self):
        return ",".join(map(str, self.degrees))


@dataclass(frozen=True)
class DataMatrix:
    """n x d observations plus column names and the standardization applied.

    ``center`` and ``scale`` hold the per-column mean and standard deviation
    that were removed; they are zeros/ones for unstandardized data.
    """

    values: np.ndarray
    names: tuple = None
    standardized: bool = False
    center: np.ndarray = None
    scale: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeMismatch(f"data must be 2-d, got shape {values.shape}")
        n, d = values.shape
        if n < 2:
            raise ShapeMismatch(f"need at least 2 observations, got {n}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = self.names
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(d))
        names = tuple(str(s) for s in names)
        if len(names) != d:
            raise ShapeMismatch(f"{len(names)} names for {d} columns")
        object.__setattr__(self, "names", names)
        if self.center is None:
            object.__setattr__(self, "center", np.zeros(d))
        if self.scale is None:
            object.__setattr__(self, "scale", np.ones(d))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def columns(self, idx):
        """Restrict to the variables in ``idx`` (keeps their order)."""
        idx = np.asarray(idx, dtype=np.intp)
        return DataMatrix(self.values[:, idx], tuple(self.names[i] for i in idx),
                          self.standardized, self.center[idx], self.scale[idx])

    def unstandardize(self, values=None):
        values = self.values if values is None else values
        return values * self.scale + self.center


def as_data(X, names=None):
    """Wrap an array as :class:`DataMatrix`; pass DataMatrix through unchanged."""
    if isinstance(X, DataMatrix):
        return X
    return DataMatrix(np.asarray(X, dtype=np.float64), names)


def standardize(X):
    """Center every column and scale it to unit variance (``ddof=0``).

    With this convention ``||x_j||^2 / n == 1`` for every standardized column.
    Input already flagged as standardized is returned as is.
    """
    X = as_data(X)
    if X.standardized:
        return X
    values = X.values
    mean = values.mean(axis=0)
    centered = values - mean
    sd = np.sqrt((centered**2).mean(axis=0))
    for j in range(X.d):
        if not np.isfinite(sd[j]) or sd[j] <= 1e-12 * max(1.0, abs(mean[j])):
            raise ConstantColumn(j, X.names[j])
    return DataMatrix(centered / sd, X.names, True,
                      X.center + X.scale * mean, X.scale * sd)


def orthonormalize(M, tol=RANK_TOL):
    """Return ``(Q, T)`` with ``Q = M @ T`` and ``Q.T @ Q / n = I``.

    ``T`` is upper triangular (thin QR with a positive diagonal), so a matrix
    that already satisfies ``M.T @ M / n = I`` comes back with ``T = I``.
    Raises :class:`RankDeficient` if the column-normalized ``M`` has a
    singular value below ``tol``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    n, r = M.shape
    rank = numerical_rank(M, tol)
    if rank < r:
        raise RankDeficient(rank=rank, r=r)
    Q0, R = np.linalg.qr(M)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q0 = Q0 * signs
    R = R * signs[:, None]
    sqn = np.sqrt(n)
    T = sqn * scipy.linalg.solve_triangular(R, np.eye(r))
    return sqn * Q0, T


def numerical_rank(M, tol=RANK_TOL):
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms <= tol * np.sqrt(M.shape[0])):
        keep = norms > tol * np.sqrt(M.shape[0])
        if not keep.any():
            return 0
        return numerical_rank(M[:, keep], tol)
    sv = np.linalg.svd(M / norms, compute_uv=False)
    return int(np.sum(sv > tol))


@dataclass(frozen=True)
class ExpandedDesign:
    """Orthonormal basis matrices for every ordered pair (j, k).

    The basis of the pair (j, k) only depends on the regressor k, so storage
    is one ``(n, r)`` block per variable: ``psi[k]``. ``pair(j, k)`` gives the
    pair-indexed view. ``ranks[k] < r`` only happens in lenient mode, where
    the dropped directions are all-zero columns of ``psi[k]`` and zero columns
    of ``transforms[k]``.
    """

    psi: np.ndarray          # (d, n, r)
    transforms: np.ndarray   # (d, r, r): psi[k] = (raw_k - means[k]) @ transforms[k]
    means: np.ndarray        # (d, r) column means removed from the raw powers
    ranks: np.ndarray        # (d,) effective basis size per regressor
    spec: BasisSpec = field(default_factory=BasisSpec)

    @property
    def d(self):
        return self.psi.shape[0]

    @property
    def n(self):
        return self.psi.shape[1]

    @property
    def r(self):
        return self.psi.shape[2]

    @cached_property
    def psit(self):
        """Basis stored as (d, r, n), contiguous, for the sweep kernels."""
        out = np.ascontiguousarray(self.psi.transpose(0, 2, 1))
        out.setflags(write=False)
        return out

    def pair(self, j, k):
        if j == k:
            raise ValueError("no basis for j == k")
        return self.psi[k]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return ExpandedDesign(np.ascontiguousarray(self.psi[idx]), self.transforms[idx],
                              self.means[idx], self.ranks[idx], self.spec)

    def raw_columns(self, k, x):
        """Centered raw powers of column ``x`` as used for variable ``k``."""
        return raw_powers(x, self.spec) - self.means[k]

    def raw_coefficients(self, k, beta):
        """Map basis coefficients on ``psi[k]`` to polynomial coefficients.

        Returns ``(intercept, coefs)`` such that the additive component equals
        ``intercept + sum_t coefs[t] * x**degrees[t]`` on the fitted scale of x.
        """
        coefs = self.transforms[k] @ np.asarray(beta, dtype=np.float64)
        return -float(self.means[k] @ coefs), coefs


def raw_powers(x, spec):
    x = np.asarray(x, dtype=np.float64)
    return np.column_stack([x**p for p in spec.degrees])


def expand(X, spec=None, strict=True, tol=RANK_TOL):
    """Build the orthonormal per-variable bases for every regressor.

    Parameters
    ----------
    X : DataMatrix or array (n, d)
        Usually standardized data; raw columns are accepted as well.
    spec : BasisSpec
        Polynomial powers; defaults to cubic ``(1, 2, 3)``.
    strict : bool
        If True a rank-deficient raw basis raises :class:`RankDeficient`.
        Otherwise dependent powers are dropped for that variable, lowering
        its effective basis size.
    """
    X = as_data(X)
    spec = spec or BasisSpec()
    n, d = X.n, X.d
    r = spec.r
    if n <= r:
        raise ShapeMismatch(f"need n > r, got n={n}, r={r}")
    psi = np.zeros((d, n, r))
    transforms = np.zeros((d, r, r))
    means = np.zeros((d, r))
    ranks = np.zeros(d, dtype=np.int64)
    for k in range(d):
        raw = raw_powers(X.values[:, k], spec)
        means[k] = raw.mean(axis=0)
        centered = raw - means[k]
        rank = numerical_rank(centered, tol)
        if rank == r:
            Q, T = orthonormalize(centered, tol)
            psi[k], transforms[k], ranks[k] = Q, T, r
            continue
        if strict:
            # report against any partner j != k; the basis only depends on k
            raise RankDeficient(j=0 if k else 1, k=k, rank=rank, r=r)
        if rank == 0:
            continue
        keep = _independent_columns(centered, rank)
        Q, T = orthonormalize(centered[:, keep], tol)
        psi[k, :, :rank] = Q
        transforms[k][np.ix_(keep, np.arange(rank))] = T
        ranks[k] = rank
    psi.setflags(write=False)
    return ExpandedDesign(psi, transforms, means, ranks, spec)


def _independent_columns(M, rank):
    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0] = 1.0
    _, _, piv = scipy.linalg.qr(M / norms, mode="economic", pivoting=True)
    return np.sort(piv[:rank])
