"""Block coordinate descent sweeps.

Every kernel exists twice: a numba-compiled scalar loop and a pure-numpy
twin with identical semantics. ``joint_sweep`` / ``dag_node_sweep`` dispatch
on the backend name; callers normally obtain it from
:func:`jamgraph._accel.resolve_backend`.

Array layout (all float64, C-contiguous)::

    psit   (d, r, n)  psit[k].T is the orthonormal basis of regressor k
    beta   (d, d, r)  beta[j, k] are the coefficients of x_j on psi[k]
    resid  (d, n)     resid[j] = x_j - sum_k psi[k] @ beta[j, k]

Both sweeps rely on ``psi[k].T @ psi[k] / n`` being the identity (padded
all-zero columns are allowed), so the unpenalized block refit is a plain
projection and fitted-function norms equal ``sqrt(n) * ||beta||``.
The basis is passed transposed so the inner loops run over contiguous rows.
"""
import math

import numpy as np

from ._accel import njit


@njit
def _joint_sweep_numba(psit, beta, resid, lam, pairs):
    d, r, n = psit.shape
    sqn = math.sqrt(n)
    thresh = n * lam
    bj = np.empty(r)
    bk = np.empty(r)
    dj = np.empty(r)
    dk = np.empty(r)
    max_delta = 0.0
    for p in range(pairs.shape[0]):
        j = pairs[p, 0]
        k = pairs[p, 1]
        ss = 0.0
        for t in range(r):
            acc_j = 0.0
            acc_k = 0.0
            for i in range(n):
                acc_j += psit[k, t, i] * resid[j, i]
                acc_k += psit[j, t, i] * resid[k, i]
            bj[t] = acc_j / n + beta[j, k, t]
            bk[t] = acc_k / n + beta[k, j, t]
            ss += bj[t] * bj[t] + bk[t] * bk[t]
        nu = sqn * math.sqrt(ss)
        scale = 1.0 - thresh / nu if nu > thresh else 0.0
        moved = False
        dsq = 0.0
        for t in range(r):
            dj[t] = scale * bj[t] - beta[j, k, t]
            dk[t] = scale * bk[t] - beta[k, j, t]
            if dj[t] != 0.0 or dk[t] != 0.0:
                moved = True
            dsq += dj[t] * dj[t] + dk[t] * dk[t]
            beta[j, k, t] = scale * bj[t]
            beta[k, j, t] = scale * bk[t]
        if moved:
            for t in range(r):
                cj = dj[t]
                ck = dk[t]
                for i in range(n):
                    resid[j, i] -= psit[k, t, i] * cj
                    resid[k, i] -= psit[j, t, i] * ck
        delta = math.sqrt(dsq)
        if delta > max_delta:
            max_delta = delta
    return max_delta


def _joint_sweep_numpy(psit, beta, resid, lam, pairs):
    n = psit.shape[2]
    sqn = math.sqrt(n)
    thresh = n * lam
    max_delta = 0.0
    for j, k in pairs:
        bj = psit[k] @ resid[j] / n + beta[j, k]
        bk = psit[j] @ resid[k] / n + beta[k, j]
        nu = sqn * math.sqrt(bj @ bj + bk @ bk)
        scale = 1.0 - thresh / nu if nu > thresh else 0.0
        dj = scale * bj - beta[j, k]
        dk = scale * bk - beta[k, j]
        beta[j, k] = scale * bj
        beta[k, j] = scale * bk
        if dj.any() or dk.any():
            resid[j] -= dj @ psit[k]
            resid[k] -= dk @ psit[j]
        max_delta = max(max_delta, math.sqrt(dj @ dj + dk @ dk))
    return max_delta


@njit
def _dag_node_sweep_numba(psit, beta_j, resid_j, lam, parents):
    d, r, n = psit.shape
    sqn = math.sqrt(n)
    thresh = n * lam
    b = np.empty(r)
    db = np.empty(r)
    max_delta = 0.0
    for p in range(parents.shape[0]):
        k = parents[p]
        ss = 0.0
        for t in range(r):
            acc = 0.0
            for i in range(n):
                acc += psit[k, t, i] * resid_j[i]
            b[t] = acc / n + beta_j[k, t]
            ss += b[t] * b[t]
        nu = sqn * math.sqrt(ss)
        scale = 1.0 - thresh / nu if nu > thresh else 0.0
        moved = False
        dsq = 0.0
        for t in range(r):
            db[t] = scale * b[t] - beta_j[k, t]
            if db[t] != 0.0:
                moved = True
            dsq += db[t] * db[t]
            beta_j[k, t] = scale * b[t]
        if moved:
            for t in range(r):
                c = db[t]
                for i in range(n):
                    resid_j[i] -= psit[k, t, i] * c
        delta = math.sqrt(dsq)
        if delta > max_delta:
            max_delta = delta
    return max_delta


def _dag_node_sweep_numpy(psit, beta_j, resid_j, lam, parents):
    n = psit.shape[2]
    sqn = math.sqrt(n)
    thresh = n * lam
    max_delta = 0.0
    for k in parents:
        b = psit[k] @ resid_j / n + beta_j[k]
        nu = sqn * math.sqrt(b @ b)
        scale = 1.0 - thresh / nu if nu > thresh else 0.0
        db = scale * b - beta_j[k]
        beta_j[k] = scale * b
        if db.any():
            resid_j -= db @ psit[k]
        max_delta = max(max_delta, math.sqrt(db @ db))
    return max_delta


@njit
def _joint_objective_numba(resid, beta, lam):
    d, n = resid.shape
    r = beta.shape[2]
    loss = 0.0
    for j in range(d):
        for i in range(n):
            loss += resid[j, i] * resid[j, i]
    # row-major pass first; beta[k, j] reads would stride across rows
    sq = np.zeros((d, d))
    for j in range(d):
        for k in range(d):
            ss = 0.0
            for t in range(r):
                ss += beta[j, k, t] * beta[j, k, t]
            sq[j, k] = ss
    pen = 0.0
    for j in range(d):
        for k in range(j + 1, d):
            ss = sq[j, k] + sq[k, j]
            if ss > 0.0:
                pen += math.sqrt(ss)
    return 0.5 * loss / n + lam * math.sqrt(n) * pen


def _joint_objective_numpy(resid, beta, lam):
    n = resid.shape[1]
    iu = np.triu_indices(beta.shape[0], 1)
    pen = math.sqrt(n) * np.sum(pair_norms(beta)[iu])
    return 0.5 * float(np.sum(resid * resid)) / n + lam * pen


@njit
def _block_top_singular_numba(gram, d, r):
    rho = np.zeros((d, d))
    M = np.empty((r, r))
    for j in range(d):
        for k in range(j + 1, d):
            # M = B^T B with B = gram[j-block, k-block]
            for a in range(r):
                for b in range(a, r):
                    acc = 0.0
                    for t in range(r):
                        acc += gram[j * r + t, k * r + a] * gram[j * r + t, k * r + b]
                    M[a, b] = acc
                    M[b, a] = acc
            # cyclic Jacobi; eigenvalues end up on the diagonal
            for _ in range(50):
                off = 0.0
                for a in range(r):
                    for b in range(a + 1, r):
                        off += M[a, b] * M[a, b]
                if off <= 1e-30 * (M[0, 0] * M[0, 0] + 1e-300):
                    break
                for p in range(r):
                    for q in range(p + 1, r):
                        if M[p, q] == 0.0:
                            continue
                        theta = (M[q, q] - M[p, p]) / (2.0 * M[p, q])
                        t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                        c = 1.0 / math.sqrt(t * t + 1.0)
                        s = t * c
                        for i in range(r):
                            mip = M[i, p]
                            miq = M[i, q]
                            M[i, p] = c * mip - s * miq
                            M[i, q] = s * mip + c * miq
                        for i in range(r):
                            mpi = M[p, i]
                            mqi = M[q, i]
                            M[p, i] = c * mpi - s * mqi
                            M[q, i] = s * mpi + c * mqi
            top = 0.0
            for a in range(r):
                if M[a, a] > top:
                    top = M[a, a]
            rho[j, k] = math.sqrt(top)
    return rho


def _block_top_singular_numpy(gram, d, r):
    blocks = gram.reshape(d, r, d, r).transpose(0, 2, 1, 3)
    rho = np.zeros((d, d))
    iu = np.triu_indices(d, 1)
    if len(iu[0]):
        rho[iu] = np.linalg.svd(blocks[iu], compute_uv=False)[:, 0]
    return rho


_JOINT = {"numba": _joint_sweep_numba, "numpy": _joint_sweep_numpy}
_DAG = {"numba": _dag_node_sweep_numba, "numpy": _dag_node_sweep_numpy}
_OBJ = {"numba": _joint_objective_numba, "numpy": _joint_objective_numpy}
_TOPSV = {"numba": _block_top_singular_numba, "numpy": _block_top_singular_numpy}


def joint_sweep(psit, beta, resid, lam, pairs, backend):
    """One pass of coupled block updates over ``pairs`` (rows ``j < k``).

    Mutates ``beta`` and ``resid`` in place and returns the largest joint
    coefficient change, which equals the function-space change
    ``||psi (beta_new - beta_old)|| / sqrt(n)`` under orthonormality.
    """
    return _JOINT[backend](psit, beta, resid, float(lam), pairs)


def dag_node_sweep(psit, beta_j, resid_j, lam, parents, backend):
    """One pass of single-block updates for one node over its ``parents``."""
    return _DAG[backend](psit, beta_j, resid_j, float(lam), parents)


def joint_objective(resid, beta, lam, backend):
    """Objective from cached residuals, using ``||psi_k b|| = sqrt(n) ||b||``."""
    return _OBJ[backend](resid, beta, float(lam))


def block_top_singular(gram, d, r, backend):
    """Upper-triangular (d, d) matrix of the largest singular value of each
    off-diagonal ``r x r`` block of the ``(d*r, d*r)`` matrix ``gram``."""
    return _TOPSV[backend](np.ascontiguousarray(gram), int(d), int(r))


def fitted_values(psi, beta):
    """Return the (d, n) matrix whose row j is ``sum_k psi[k] @ beta[j, k]``."""
    d, n, r = psi.shape
    flat_psi = psi.transpose(1, 0, 2).reshape(n, d * r)
    return beta.reshape(beta.shape[0], d * r) @ flat_psi.T


def pair_norms(beta):
    """Joint coefficient norms ``sqrt(|beta_jk|^2 + |beta_kj|^2)``, (d, d) symmetric."""
    sq = np.einsum("jkr,jkr->jk", beta, beta)
    return np.sqrt(sq + sq.T)
