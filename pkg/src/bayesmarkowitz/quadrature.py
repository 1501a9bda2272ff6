"""Adaptive Gauss-Legendre quadrature for vector- and matrix-valued integrands."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericalError

DEFAULT_ORDER = 10
DEFAULT_TOL = 1e-10
_ROUNDOFF = 100 * np.finfo(float).eps


@lru_cache(maxsize=None)
def _nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(f, a: float, b: float, order: int = DEFAULT_ORDER):
    """Single-panel Gauss-Legendre estimate of the integral of ``f`` over [a, b].

    ``f`` maps a scalar to a scalar or an array; results are summed with the rule
    weights along a new leading axis.
    """
    x, w = _nodes(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    vals = np.array([f(mid + half * xi) for xi in x], dtype=float)
    return half * np.tensordot(w, vals, axes=1)


def integrate(f, a: float, b: float, tol: float = DEFAULT_TOL,
              order: int = DEFAULT_ORDER, max_depth: int = 40):
    """Integrate ``f`` over [a, b] to absolute tolerance ``tol``.

    Each panel is compared with the sum of its two halves; panels whose
    difference exceeds their share of the tolerance are bisected. Raises
    :class:`NumericalError` when ``max_depth`` bisections are not enough.
    """
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    total_len = b - a
    stack = [(a, b, gauss_legendre(f, a, b, order), 0)]
    result = None
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = gauss_legendre(f, lo, mid, order)
        right = gauss_legendre(f, mid, hi, order)
        err = float(np.max(np.abs(left + right - whole)))
        if not np.isfinite(err):
            raise NumericalError(f"non-finite integrand on [{lo}, {hi}]")
        if err <= tol * (hi - lo) / total_len or err <= _ROUNDOFF * float(np.max(np.abs(whole))):
            piece = left + right
            result = piece if result is None else result + piece
            continue
        if depth >= max_depth:
            raise NumericalError(
                f"quadrature did not reach tolerance {tol:g} on [{lo}, {hi}]",
                residual=err)
        stack.append((mid, hi, right, depth + 1))
        stack.append((lo, mid, left, depth + 1))
    return sign * result
