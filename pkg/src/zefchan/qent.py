"""q-ary entropy, its inverse, and the combinatorial bounds built on it.

Everything here is exact where it can be (big-integer ball sizes, integer
Plotkin arithmetic) and carefully clamped where it cannot (entropy near the
endpoints of its domain).  All functions are pure; the entropy pair accepts
scalars or numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "entropy",
    "entropy_inverse",
    "ball_size_exact",
    "ball_size_bound",
    "plotkin_max_codewords",
]

_INVERSE_ITERATIONS = 200
_INVERSE_WIDTH = 1e-15


def _check_q(q: int) -> int:
    if int(q) != q or q < 2:
        raise ValueError(f"alphabet size must be an integer >= 2, got {q!r}")
    return int(q)


def _xlogx(x: np.ndarray) -> np.ndarray:
    # 0*log(0) := 0 by the usual continuity convention
    out = np.zeros_like(x, dtype=float)
    np.log(x, out=out, where=x > 0)
    return x * out


def entropy(q: int, x):
    """q-ary entropy of ``x``: x*log_q(q-1) - x*log_q(x) - (1-x)*log_q(1-x).

    Zero at ``x == 0`` and exactly 1 at the maximizer ``x == (q-1)/q``
    (special-cased so that downstream bound comparisons are not polluted by
    rounding of the exponent).  Accepts scalars or arrays.
    """
    q = _check_q(q)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("entropy argument must lie in [0, 1]")
    peak = (q - 1) / q
    val = (arr * math.log(q - 1) - _xlogx(arr) - _xlogx(1.0 - arr)) / math.log(q)
    val = np.where(arr == peak, 1.0, val)
    if np.ndim(x) == 0:
        return float(val)
    return val


def entropy_inverse(q: int, y):
    """Inverse of ``entropy`` on its increasing branch [0, (q-1)/q].

    Bisection on the monotone branch; the bracket is narrowed below 1e-12
    (width 1e-15, iteration cap 200), which keeps the residual
    ``|entropy(q, result) - y|`` near double precision.  Accepts scalars or
    arrays.
    """
    q = _check_q(q)
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("entropy_inverse argument must lie in [0, 1]")
    peak = (q - 1) / q
    lo = np.zeros_like(arr, dtype=float)
    hi = np.full_like(arr, peak, dtype=float)
    for _ in range(_INVERSE_ITERATIONS):
        if float(np.max(hi - lo)) <= _INVERSE_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        below = np.asarray(entropy(q, mid)) < arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    # pin the exactly-representable endpoints
    out = np.where(arr == 0.0, 0.0, out)
    out = np.where(arr == 1.0, peak, out)
    if np.ndim(y) == 0:
        return float(out)
    return out


def ball_size_exact(q: int, n: int, radius: int) -> int:
    """Exact number of q-ary words within Hamming distance ``radius`` of a word.

    Computed as sum_{i<=radius} C(n,i) (q-1)^i with arbitrary-precision
    integers, so it can be compared against the entropy bound without
    floating-point slack.
    """
    q = _check_q(q)
    if not 0 <= radius <= n:
        raise ValueError(f"radius must lie in [0, {n}], got {radius}")
    return sum(math.comb(n, i) * (q - 1) ** i for i in range(radius + 1))


def ball_size_bound(q: int, n: int, p: float) -> float:
    """Entropy upper bound q**(n*H_q(p)) on the Hamming ball of radius n*p.

    Valid (and only accepted) for p <= (q-1)/q; dominates
    ``ball_size_exact(q, n, floor(n*p))``.
    """
    q = _check_q(q)
    if p < 0 or p > (q - 1) / q:
        raise ValueError(f"p must lie in [0, (q-1)/q], got {p}")
    return float(q) ** (n * entropy(q, p))


def plotkin_max_codewords(q: int, n: int, d_min: int) -> int:
    """Largest code size permitted when the minimum distance exceeds (1-1/q)n.

    Returns floor(q*d / (q*d - (q-1)*n)) using exact integer arithmetic.
    Raises if ``d_min`` is not in the Plotkin regime.
    """
    q = _check_q(q)
    if d_min * q <= (q - 1) * n:
        raise ValueError(
            f"d_min={d_min} is not in the Plotkin regime for (q={q}, n={n}); "
            f"need d_min > (1-1/q)*n"
        )
    return (q * d_min) // (q * d_min - (q - 1) * n)
