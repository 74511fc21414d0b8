"""
Shared numerical helpers: bracketed root finding, bounded maximisation and
log-domain power iteration
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .errors import ConvergenceError, NoBracketError

logger = logging.getLogger(__name__)

BISECT_XTOL = 1e-12
BISECT_MAXITER = 500


def bisect_root(func: Callable[[float], float], lo: float, hi: float, what: str,
                xtol: float = BISECT_XTOL) -> float:
    """Root of a monotone function on [lo, hi]; raises NoBracketError without a sign change"""
    f_lo = func(lo)
    f_hi = func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracketError(what, lo, hi)
    return optimize.bisect(func, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                           maxiter=BISECT_MAXITER)


def maximize_bounded(func: Callable[[float], float], lo: float, hi: float,
                     xatol: float = 1e-6) -> Tuple[float, float]:
    """Maximise func on [lo, hi] with bounded Brent search; returns (argmax, max)

    Endpoints are compared explicitly since the bounded search never evaluates them.
    """
    result = optimize.minimize_scalar(lambda x: -func(x), bounds=(lo, hi), method="bounded",
                                      options={"xatol": xatol})
    best_x, best_f = float(result.x), -float(result.fun)
    for edge in (lo, hi):
        value = func(edge)
        if value > best_f:
            best_x, best_f = edge, value
    return best_x, best_f


def _sparse_predecessors(log_matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Padded (row, k) predecessor indices and log weights of a log-domain matrix"""
    finite = np.isfinite(log_matrix)
    width = max(1, int(finite.sum(axis=1).max()))
    size = log_matrix.shape[0]
    indices = np.zeros((size, width), dtype=np.intp)
    weights = np.full((size, width), -np.inf)
    for row in range(size):
        cols = np.flatnonzero(finite[row])
        indices[row, :cols.size] = cols
        weights[row, :cols.size] = log_matrix[row, cols]
    return indices, weights


def log_spectral_radius(log_matrix: np.ndarray, log_shift: Optional[float] = None,
                        tol: float = 1e-10, max_iter: int = 1_000_000) -> float:
    """Log of the spectral radius of a nonnegative matrix given entrywise in log form

    Power iteration on M + c·I with c = exp(log_shift) > 0, which has the same
    Perron vector and a strictly dominant root even for periodic M. log_shift
    should be a lower bound on the log spectral radius.
    """
    log_matrix = np.asarray(log_matrix, dtype=float)
    indices, weights = _sparse_predecessors(log_matrix)
    if log_shift is None:
        log_shift = float(np.min(logsumexp(weights, axis=1)))
    vector = np.zeros(log_matrix.shape[0])
    previous = None
    for iteration in range(1, max_iter + 1):
        image = logsumexp(weights + vector[indices], axis=1)
        image = np.logaddexp(image, log_shift + vector)
        growth = float(logsumexp(image) - logsumexp(vector))
        estimate = growth + np.log1p(-np.exp(min(0.0, log_shift - growth)))
        vector = image - image.max()
        if previous is not None and abs(estimate - previous) < tol:
            if iteration > 10_000:
                logger.debug("power iteration needed %d steps", iteration)
            return float(estimate)
        previous = estimate
    raise ConvergenceError("power iteration", max_iter)
