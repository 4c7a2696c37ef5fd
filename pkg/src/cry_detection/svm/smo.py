# Sequential minimal optimisation for the C-SVM dual with an RBF kernel.
#
# The dual is solved in its minimisation form, f(a) = 1/2 a'Qa - e'a subject to
# 0 <= a <= C and y'a = 0, with Q_ij = y_i y_j K(x_i, x_j). Each iteration picks the maximal
# violating index i and the partner j with the largest second-order decrease of f, then
# solves the two-variable subproblem analytically.

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from warnings import warn

import numpy as np
from scipy.spatial.distance import cdist

from ..utils import make_rng

logger = logging.getLogger(__name__)

# Replacement for non-positive curvature of the two-variable subproblem
TAU = 1e-12


def rbf_kernel(a, b, gamma):
    """K(x, z) = exp(-gamma * ||x - z||^2) between the rows of `a` and `b`."""
    return np.exp(-gamma * cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean"))


@dataclass
class SmoResult:
    """
    Solution of the dual problem.

    Attributes
    ----------
    alpha : numpy.ndarray
        Dual variables, in [0, C].
    rho : float
        Offset; the decision function is sum(alpha * y * K) - rho.
    gradient : numpy.ndarray
        Gradient of f at `alpha`.
    n_iter : int
        Number of two-variable updates performed.
    converged : bool
        Whether the maximal KKT violation fell below the tolerance.
    objective : list of float
        Dual objective sum(alpha) - 1/2 alpha'Q alpha after each iteration (only when
        requested).
    """
    alpha: np.ndarray
    rho: float
    gradient: np.ndarray
    n_iter: int
    converged: bool
    objective: list = field(default_factory=list)


def _pick(scores, candidates, priority, largest=True):
    # Best-scoring candidate; exact ties go to the lowest seeded priority
    index = np.flatnonzero(candidates)
    values = scores[index]
    best = values.max() if largest else values.min()
    ties = index[values == best]

    return ties[np.argmin(priority[ties])]


def dual_objective(alpha, gradient):
    """Dual objective sum(alpha) - 1/2 alpha'Q alpha, computed from the gradient of f."""
    # gradient = Q alpha - 1, so alpha'Q alpha = alpha . (gradient + 1)
    return float(alpha.sum() - 0.5 * alpha @ (gradient + 1.0))


def _compute_rho(alpha, gradient, y, C):
    y_grad = y * gradient
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)

    if free.any():
        return float(y_grad[free].mean())

    # No free variables: take the middle of the feasible interval
    upper_side = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lower_side = (at_upper & (y > 0)) | (at_lower & (y < 0))

    ub = y_grad[upper_side].min() if upper_side.any() else np.inf
    lb = y_grad[lower_side].max() if lower_side.any() else -np.inf

    if np.isfinite(ub) and np.isfinite(lb):
        return float((ub + lb) / 2)

    return float(ub if np.isfinite(ub) else lb)


def smo_solve(x, y, C=1.0, gamma=1.0, tol=1e-3, rng_seed=0, max_iter=None, cache_rows=512,
              record_objective=False):
    """
    Solve the SVM dual with SMO.

    Parameters
    ----------
    x : numpy.ndarray
        Training features, shape (n, d).
    y : numpy.ndarray
        Labels in {-1, +1}.
    C : float, optional
        Box constraint.
    gamma : float, optional
        RBF kernel width.
    tol : float, optional
        Stop once the maximal KKT violation m(a) - M(a) is below this.
    rng_seed : int, optional
        Seed for the priority order used to break exact ties in working-set selection.
    max_iter : int, optional
        Iteration cap (default: max(10^7, 100 n)).
    cache_rows : int, optional
        Number of kernel rows kept in an LRU cache.
    record_objective : bool, optional
        Record the dual objective after every iteration.

    Returns
    -------
    SmoResult
        The solution.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size

    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)

    @lru_cache(maxsize=cache_rows)
    def q_row(i):
        # Row i of Q
        return y[i] * y * rbf_kernel(x[i], x, gamma)[0]

    priority = make_rng(rng_seed).permutation(n)
    alpha = np.zeros(n)
    gradient = -np.ones(n)
    q_diag = np.ones(n)  # K(x, x) = 1 for the RBF kernel

    objective = []
    converged = False
    n_iter = 0

    while n_iter < max_iter:
        # I_up / I_low: indices whose alpha can move in the +y / -y direction
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * gradient

        if not up.any() or not low.any():
            converged = True
            break

        i = _pick(score, up, priority)
        g_max = score[i]
        g_min = score[low].min()

        if g_max - g_min < tol:
            converged = True
            break

        q_i = q_row(i)
        grad_diff = g_max - score
        candidates = low & (grad_diff > 0)

        # Curvature K_ii + K_tt - 2 K_it, with y_i y_t Q_it = K_it
        curvature = q_diag[i] + q_diag - 2.0 * y[i] * y * q_i
        curvature = np.where(curvature > 0, curvature, TAU)
        decrease = -(grad_diff ** 2) / curvature

        j = _pick(decrease, candidates, priority, largest=False)
        q_j = q_row(j)

        old_i, old_j = alpha[i], alpha[j]
        _update_pair(alpha, gradient, y, q_i, q_j, i, j, C, q_diag)

        gradient += q_i * (alpha[i] - old_i) + q_j * (alpha[j] - old_j)
        n_iter += 1

        if record_objective:
            objective.append(dual_objective(alpha, gradient))

        if n_iter % 1000 == 0:
            logger.debug("SMO iteration %d: violation %.3g", n_iter, g_max - g_min)

    if not converged:
        warn(f"SMO stopped after {max_iter} iterations without reaching tol={tol}.",
             RuntimeWarning, stacklevel=2)

    logger.debug("SMO finished after %d iterations", n_iter)

    return SmoResult(alpha=alpha, rho=_compute_rho(alpha, gradient, y, C), gradient=gradient,
                     n_iter=n_iter, converged=converged, objective=objective)


def _update_pair(alpha, gradient, y, q_i, q_j, i, j, C, q_diag):
    # Analytic solution of the two-variable subproblem, clipped to the box
    if y[i] != y[j]:
        quad = q_diag[i] + q_diag[j] + 2.0 * q_i[j]
        quad = quad if quad > 0 else TAU
        delta = (-gradient[i] - gradient[j]) / quad
        diff = alpha[i] - alpha[j]

        alpha[i] += delta
        alpha[j] += delta

        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = -diff

        if diff > 0:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = C - diff
        elif alpha[j] > C:
            alpha[j] = C
            alpha[i] = C + diff
    else:
        quad = q_diag[i] + q_diag[j] - 2.0 * q_i[j]
        quad = quad if quad > 0 else TAU
        delta = (gradient[i] - gradient[j]) / quad
        total = alpha[i] + alpha[j]

        alpha[i] -= delta
        alpha[j] += delta

        if total > C:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = total - C
        elif alpha[j] < 0:
            alpha[j] = 0.0
            alpha[i] = total

        if total > C:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = total - C
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = total


def kkt_residuals(result, y, C):
    """
    Per-point violation of the KKT conditions at a solution, in units of the margin y f(x).

    Points with alpha = 0 need y f(x) >= 1, free points y f(x) = 1 and points at C
    y f(x) <= 1; the residual is how far each point is from its condition.
    """
    y = np.asarray(y, dtype=np.float64)
    margin = result.gradient + 1.0 - y * result.rho

    residual = np.abs(margin - 1.0)
    residual[result.alpha <= 0] = np.maximum(0.0, 1.0 - margin[result.alpha <= 0])
    residual[result.alpha >= C] = np.maximum(0.0, margin[result.alpha >= C] - 1.0)

    return residual
