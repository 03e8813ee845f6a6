"""Reference solvers written independently of the package kernels."""
import math

import numpy as np


def joint_objective_ref(psi, X, beta, lam):
    d, n, _ = psi.shape
    total = 0.0
    for j in range(d):
        fit_j = sum(psi[k] @ beta[j, k] for k in range(d) if k != j)
        total += 0.5 * np.sum((X[:, j] - fit_j) ** 2) / n
    for j in range(d):
        for k in range(j + 1, d):
            total += lam * math.sqrt(np.sum((psi[k] @ beta[j, k]) ** 2)
                                     + np.sum((psi[j] @ beta[k, j]) ** 2))
    return total


def fista_joint(psi, X, lam, tol=1e-10, max_iter=200000):
    """Accelerated proximal gradient with adaptive restart on the coupled problem.

    The group penalty is on fitted-function norms; with orthonormal bases that
    is ``sqrt(n) * ||(beta_jk, beta_kj)||``.
    """
    d, n, r = psi.shape
    A = [np.hstack([psi[k] for k in range(d) if k != j]) for j in range(d)]
    L = max(np.linalg.eigvalsh(a.T @ a / n).max() for a in A)
    step = 1.0 / L
    thr = step * lam * math.sqrt(n)
    mask = ~np.eye(d, dtype=bool)

    def grad(b):
        fitted = np.einsum("kni,jki->jn", psi, b)
        resid = X.T - fitted
        g = -np.einsum("kni,jn->jki", psi, resid) / n
        g[~mask] = 0.0
        return g

    def prox(b):
        sq = np.sum(b * b, axis=2)
        nv = np.sqrt(sq + sq.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(nv > thr, 1.0 - thr / nv, 0.0)
        s[~mask] = 0.0
        return b * s[:, :, None]

    def obj_of(b):
        resid = X.T - np.einsum("kni,jki->jn", psi, b)
        sq = np.sum(b * b, axis=2)
        pen = np.sqrt(sq + sq.T)[np.triu_indices(d, 1)].sum()
        return 0.5 * np.sum(resid**2) / n + lam * math.sqrt(n) * pen

    beta = np.zeros((d, d, r))
    y = beta.copy()
    t = 1.0
    for _ in range(max_iter):
        new = prox(y - step * grad(y))
        if np.max(np.abs(new - y)) < tol:
            beta = new
            break
        if np.sum((y - new) * (new - beta)) > 0:
            # gradient-based restart
            t = 1.0
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = new + (t - 1) / t_next * (new - beta)
        beta, t = new, t_next
    return beta, obj_of(beta)
