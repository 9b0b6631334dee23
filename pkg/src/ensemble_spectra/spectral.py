"""Largest-eigenvalue computations and the degree-ratio estimators of lambda_1.

All eigenvalue routines work on the dense adjacency matrix.  ``lambda1`` runs
power iteration on ``A + cI`` with ``c`` the maximum degree, so the shifted
spectrum is nonnegative and the Perron root dominates; ``lambda2`` deflates the
converged top eigenvector and repeats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .graph import Graph

__all__ = [
    "ConvergenceWarning",
    "UndefinedRatioError",
    "EigenResult",
    "FKPrediction",
    "ResidualDecomposition",
    "SpectralSummary",
    "top_eigenpair",
    "second_eigenpair",
    "lambda1",
    "lambda2",
    "fk_prediction",
    "in_regime",
    "degree_ratio",
    "residual_decomposition",
    "expansion_moments",
    "expansion_estimate",
    "spectral_summary",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
_START_PERTURBATION = 1e-2


class ConvergenceWarning(RuntimeWarning):
    """Power iteration stopped at ``max_iter`` before reaching the tolerance."""


class UndefinedRatioError(ValueError):
    """Degree ratio requested for a graph with no edges."""


@dataclass(frozen=True)
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _dense(g) -> np.ndarray:
    if isinstance(g, Graph):
        return g.to_dense(np.float64)
    a = np.asarray(g, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return a


def _start_vector(n: int) -> np.ndarray:
    x = np.full(n, 1.0 / math.sqrt(n))
    x[0] += _START_PERTURBATION
    return x / np.linalg.norm(x)


def _generic_start(n: int) -> np.ndarray:
    # ones + e_0 lies in a symmetry-invariant subspace for graphs such as stars,
    # so the deflated iteration starts from a fixed pseudo-random vector instead
    x = np.random.default_rng(0x5EED).standard_normal(n)
    return x / np.linalg.norm(x)


def _power(a, shift, tol, max_iter, deflate=None) -> EigenResult:
    n = a.shape[0]
    if deflate is None:
        x = _start_vector(n)
    else:
        x = _generic_start(n)
        x -= deflate * (deflate @ x)
        x /= np.linalg.norm(x)
    lam, res = 0.0, math.inf
    for it in range(max_iter + 1):
        y = a @ x
        if deflate is not None:
            y -= deflate * (deflate @ y)
        lam = float(x @ y)
        res = float(np.linalg.norm(y - lam * x))
        if res <= tol * max(1.0, abs(lam)):
            return EigenResult(lam, x, it, res, True)
        if it == max_iter:
            break
        y += shift * x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        x = y / norm
        if deflate is not None:
            x -= deflate * (deflate @ x)
            x /= np.linalg.norm(x)
    return EigenResult(lam, x, max_iter, res, False)


def _warn_if_needed(result: EigenResult, what: str) -> None:
    if not result.converged:
        warnings.warn(
            f"{what}: power iteration did not converge in {result.iterations} iterations "
            f"(residual {result.residual:.3e})",
            ConvergenceWarning,
            stacklevel=3,
        )


def top_eigenpair(g, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> EigenResult:
    """Perron eigenpair of a symmetric nonnegative matrix (or a Graph)."""
    a = _dense(g)
    shift = float(np.abs(a).sum(axis=1).max()) if a.size else 0.0
    return _power(a, shift, tol, max_iter)


def second_eigenpair(g, top: EigenResult | None = None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> EigenResult:
    a = _dense(g)
    if a.shape[0] < 2:
        raise ValueError("lambda2 needs at least two vertices")
    shift = float(np.abs(a).sum(axis=1).max())
    if top is None:
        top = top_eigenpair(a, tol, max_iter)
    return _power(a, shift, tol, max_iter, deflate=top.vector)


def lambda1(g, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    result = top_eigenpair(g, tol, max_iter)
    _warn_if_needed(result, "lambda1")
    return result.value


def lambda2(g, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            method: str = "power") -> float:
    """Second-largest adjacency eigenvalue.

    ``method="lapack"`` skips the deflated power iteration and asks LAPACK for
    the single eigenvalue; deflation converges at the rate of the λ2/λ3 gap,
    which is far too slow for dense random graphs at n in the hundreds.
    """
    a = _dense(g)
    n = a.shape[0]
    if n < 2:
        raise ValueError("lambda2 needs at least two vertices")
    if method == "lapack":
        return float(scipy.linalg.eigvalsh(a, subset_by_index=[n - 2, n - 2])[0])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    result = second_eigenpair(a, None, tol, max_iter)
    _warn_if_needed(result, "lambda2")
    return result.value


class FKPrediction(NamedTuple):
    value: float
    error_scale: float
    in_regime: bool


def in_regime(n: int, p: float, beta: float = 6.0) -> bool:
    """Whether ``n^-1 (log n)^beta <= p < 1 - n^-1 (log n)^beta``."""
    if n < 2:
        return False
    edge = math.log(n) ** beta / n
    return edge <= p < 1.0 - edge


def fk_prediction(n: int, p: float, beta: float = 6.0) -> FKPrediction:
    """Füredi–Komlós mean ``(n-1)p + (1-p)`` with its error-order scale.

    The scale is ``(1-p)^{3/2} / (q sqrt((n-1)p))`` with
    ``q = sqrt((n-1) min(p, 1-p))``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    value = (n - 1) * p + (1.0 - p)
    if p in (0.0, 1.0) or n < 2:
        scale = 0.0
    else:
        q = math.sqrt((n - 1) * min(p, 1.0 - p))
        scale = (1.0 - p) ** 1.5 / (q * math.sqrt((n - 1) * p))
    return FKPrediction(value, scale, in_regime(n, p, beta))


def _degrees_of(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=1)


def degree_ratio(g) -> float:
    """sum K_i^2 / sum K_i, one power-method step from the all-ones vector."""
    k = _degrees_of(_dense(g))
    total = k.sum()
    if total == 0:
        raise UndefinedRatioError("degree ratio is undefined for a graph with no edges")
    return float((k @ k) / total)


@dataclass(frozen=True)
class ResidualDecomposition:
    """``1 = v1 + r`` with ``v1`` along the top eigenvector.

    ``residual`` is ``(||A r||^2 - lambda1 <r, A r>) / sum K_i`` so that
    ``degree_ratio = lambda1 + residual``.
    """

    v1: np.ndarray
    r: np.ndarray
    r_norm2: float
    Ar_norm2: float
    cross: float
    lambda1: float
    residual: float
    converged: bool


def residual_decomposition(g, tol: float = 1e-12, max_iter: int = DEFAULT_MAX_ITER) -> ResidualDecomposition:
    a = _dense(g)
    k = _degrees_of(a)
    total = k.sum()
    if total == 0:
        raise UndefinedRatioError("residual decomposition needs at least one edge")
    top = top_eigenpair(a, tol, max_iter)
    _warn_if_needed(top, "residual_decomposition")
    u = top.vector
    ones = np.ones(a.shape[0])
    v1 = (u @ ones) * u
    r = ones - v1
    ar = a @ r
    ar_norm2 = float(ar @ ar)
    cross = float(r @ ar)
    residual = (ar_norm2 - top.value * cross) / total
    return ResidualDecomposition(v1, r, float(r @ r), ar_norm2, cross, top.value, float(residual), top.converged)


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"expansion needs 0 < p < 1, got {p}")


def expansion_moments(g, p: float) -> tuple[float, float, float]:
    """``<e, B^k e>`` for k = 1, 2, 3 with ``B = (A + pI - pJ) / sqrt(np(1-p))``.

    ``e`` is the normalized all-ones vector; restoring ``pI`` makes the mean of
    the matrix exactly ``pJ``.
    """
    _check_p(p)
    a = _dense(g)
    n = a.shape[0]
    scale = math.sqrt(n * p * (1.0 - p))

    def apply(x):
        return (a @ x + p * x - p * x.sum()) / scale

    e = np.full(n, 1.0 / math.sqrt(n))
    y1 = apply(e)
    m1 = float(e @ y1)
    m2 = float(y1 @ y1)
    m3 = float(y1 @ apply(y1))
    return m1, m2, m3


def expansion_estimate(g, p: float, k_max: int = 3) -> float:
    """Truncated moment series for lambda_1 of a simple graph.

    With ``s = sqrt(np/(1-p))`` the top eigenvalue of the normalized matrix
    solves ``lambda = s * sum_k <e, (B/lambda)^k e>``; expanding in ``1/s``:

        lambda = s + m1 + (m2 - m1^2)/s + (2 m1^3 - 3 m1 m2 + m3)/s^2 + O(s^-3).

    The result is scaled back by ``sqrt(np(1-p))`` and shifted by ``-p``.
    """
    if k_max not in (0, 1, 2, 3):
        raise ValueError("k_max must be 0, 1, 2 or 3")
    _check_p(p)
    a = _dense(g)
    n = a.shape[0]
    s = math.sqrt(n * p / (1.0 - p))
    est = s
    if k_max >= 1:
        m1, m2, m3 = expansion_moments(a, p)
        est += m1
        if k_max >= 2:
            est += (m2 - m1 * m1) / s
        if k_max >= 3:
            est += (2.0 * m1**3 - 3.0 * m1 * m2 + m3) / s**2
    return est * math.sqrt(n * p * (1.0 - p)) - p


@dataclass(frozen=True)
class SpectralSummary:
    lambda1: float
    lambda2: float
    degree_ratio: float
    fk_prediction: float
    residual: float
    iterations: int
    tol_achieved: float


def spectral_summary(g, p: float | None = None, tol: float = DEFAULT_TOL,
                     lambda2_method: str = "power") -> SpectralSummary:
    """All per-graph spectral quantities at once.

    ``p`` defaults to the graph's edge density; the degree ratio and residual
    are NaN for a graph without edges.
    """
    a = _dense(g)
    n = a.shape[0]
    top = top_eigenpair(a, tol)
    _warn_if_needed(top, "spectral_summary")
    if n >= 2:
        lam2 = lambda2(a, tol, method=lambda2_method)
    else:
        lam2 = math.nan
    k = _degrees_of(a)
    total = k.sum()
    if p is None:
        p = total / (n * (n - 1)) if n > 1 else 0.0
    if total:
        ratio = float((k @ k) / total)
        residual = ratio - top.value
    else:
        ratio = residual = math.nan
    return SpectralSummary(
        lambda1=top.value,
        lambda2=lam2,
        degree_ratio=ratio,
        fk_prediction=fk_prediction(n, float(p)).value,
        residual=residual,
        iterations=top.iterations,
        tol_achieved=top.residual,
    )
