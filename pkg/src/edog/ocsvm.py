"""One-class SVM (nu formulation, RBF kernel) with a pairwise SMO solver.

Dual problem::

    min_a  1/2 a^T K a    s.t.  0 <= a_i <= 1/(nu * l),  sum(a) = 1

Decision value ``f(x) = sum_i a_i k(x_i, x) - rho``; negative means outlier.
Working pairs are chosen with the second-order rule of Fan, Chen and Lin (2005).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numkit import rng

TOL = 1e-3
MAX_ITER = 100_000
TAU = 1e-12


@dataclass
class OcsvmModel:
    alpha: np.ndarray
    rho: float
    gamma: float
    mean: np.ndarray
    std: np.ndarray
    support: np.ndarray
    nu: float
    iterations: int
    residual: float
    converged: bool

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def kernel_rows(self, x: np.ndarray) -> np.ndarray:
        return rbf_kernel(self.transform(x), self.support, self.gamma)

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        """Support-vector expansion: only points with a_i > 0 contribute."""
        sv = self.alpha > 0
        k = rbf_kernel(self.transform(x), self.support[sv], self.gamma)
        return k @ self.alpha[sv] - self.rho

    def decision_function_full(self, x: np.ndarray) -> np.ndarray:
        return self.kernel_rows(x) @ self.alpha - self.rho


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def scale_gamma(z: np.ndarray) -> float:
    """1 / (dim * mean per-dimension variance), variance floored at 1e-6."""
    var = max(float(z.var(axis=0).mean()), 1e-6)
    return 1.0 / (z.shape[1] * var)


def solve_dual(k: np.ndarray, nu: float, order: np.ndarray, tol: float = TOL, max_iter: int = MAX_ITER):
    """SMO on the nu one-class dual. Returns (alpha, rho, iterations, residual)."""
    l = k.shape[0]
    c = 1.0 / (nu * l)
    alpha = np.zeros(l)
    # fill the simplex greedily in ``order``: floor(nu*l) points at the bound
    remaining = 1.0
    for i in order:
        take = min(c, remaining)
        alpha[i] = take
        remaining -= take
        if remaining <= 0:
            break
    grad = k @ alpha
    diag = np.diag(k).copy()
    it = 0
    residual = np.inf
    while it < max_iter:
        up = alpha < c
        down = alpha > 0
        if not up.any() or not down.any():
            residual = 0.0
            break
        gu = np.where(up, grad, np.inf)
        i = int(np.argmin(gu))
        g_min = gu[i]
        g_max = float(np.max(np.where(down, grad, -np.inf)))
        residual = g_max - g_min
        if residual <= tol:
            break
        # second-order choice of j among decreasable points that violate with i
        diff = grad - g_min
        quad = diag[i] + diag - 2.0 * k[i]
        quad = np.where(quad > 0, quad, TAU)
        gain = np.where(down & (diff > 0), diff * diff / quad, -np.inf)
        j = int(np.argmax(gain))
        step = (grad[j] - grad[i]) / quad[j]
        step = min(step, c - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (k[:, i] - k[:, j])
        it += 1
    # clean tiny drift so feasibility holds exactly
    alpha = np.clip(alpha, 0.0, c)
    alpha[np.isclose(alpha, c, rtol=0, atol=1e-15)] = c
    alpha[alpha < 1e-15] = 0.0
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(grad[free].mean())
    else:
        ub = np.min(grad[alpha < c]) if (alpha < c).any() else np.inf
        lb = np.max(grad[alpha > 0]) if (alpha > 0).any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = float((ub + lb) / 2.0)
        else:
            rho = float(lb if np.isfinite(lb) else ub)
    return alpha, rho, it, float(residual)


def fit_ocsvm(features, nu: float = 0.5, seed: int = 0, tol: float = TOL, max_iter: int = MAX_ITER) -> OcsvmModel:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("one-class SVM needs at least two feature vectors")
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"nu must lie in (0, 1], got {nu}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    z = (x - mean) / std
    gamma = scale_gamma(z)
    k = rbf_kernel(z, z, gamma)
    order = rng(seed, "ocsvm_order").permutation(len(z))
    alpha, rho, it, residual = solve_dual(k, nu, order, tol, max_iter)
    converged = residual <= tol
    if not converged:
        warnings.warn(f"one-class SVM stopped after {it} iterations with KKT residual {residual:.3g}",
                      RuntimeWarning, stacklevel=2)
    return OcsvmModel(alpha, rho, gamma, mean, std, z, nu, it, residual, converged)
