"""Cut-off, primitive, barrier and convex-pair functions of the b-equation.

Every function is a closed-form, numpy-vectorized evaluation built on the
three-piece structure of the cut-off ``T_n``: ``1/T_n(s)**2`` equals ``n**2``
below ``1/n``, ``1/s**2`` on ``[1/n, n]`` and ``1/n**2`` above ``n``.  The
quadrature and optimization oracles used to check them live in
:mod:`vbflow.oracles`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BarrierBounds",
    "check_cutoff_index",
    "cutoff_T",
    "cutoff_T_derivative",
    "theta",
    "barrier_plus",
    "barrier_minus",
    "rothe_f",
    "rothe_f_prime",
    "rothe_f_inverse",
    "rothe_F",
    "rothe_F_star",
    "lower_F_constant",
    "upper_F_constant",
]


def check_cutoff_index(n) -> float:
    if not np.isfinite(n) or n < 2:
        raise ValueError(f"cut-off index n must be >= 2, got {n}")
    return float(n)


@dataclass(frozen=True)
class BarrierBounds:
    """``b_max = max(1, sup b0)`` and ``b_min = 1 / max(1, sup 1/b0)``."""

    b_max: float
    b_min: float

    def __post_init__(self):
        if not self.b_max >= 1.0:
            raise ValueError(f"b_max must be >= 1, got {self.b_max}")
        if not 0.0 < self.b_min <= 1.0:
            raise ValueError(f"b_min must lie in (0, 1], got {self.b_min}")

    @classmethod
    def from_values(cls, b0: np.ndarray) -> "BarrierBounds":
        b0 = np.asarray(b0, dtype=float)
        if np.min(b0) <= 0:
            raise ValueError(f"initial b must be strictly positive, min is {np.min(b0)!r}")
        return cls(max(1.0, float(np.max(b0))), 1.0 / max(1.0, float(np.max(1.0 / b0))))

    def admits(self, n) -> bool:
        """True when ``n > b_max`` and ``n > 1/b_min``."""
        return n > self.b_max and n > 1.0 / self.b_min


def cutoff_T(n, s):
    """``T_n(s) = min(n, max(1/n, s))``."""
    n = check_cutoff_index(n)
    return np.minimum(n, np.maximum(1.0 / n, s))


def cutoff_T_derivative(n, s):
    """a.e. derivative of ``T_n``: 1 strictly inside ``(1/n, n)``, else 0."""
    n = check_cutoff_index(n)
    s = np.asarray(s, dtype=float)
    return ((s > 1.0 / n) & (s < n)).astype(float)


def _moment_primitive(n, c, s):
    """A primitive in ``s`` of ``(s - c) / T_n(s)**2``, continuous across the kinks."""
    a = 1.0 / n
    s = np.asarray(s, dtype=float)
    low = lambda x: n * n * 0.5 * (x - c) ** 2
    mid = lambda x: np.log(x) + c / x
    high = lambda x: 0.5 * (x - c) ** 2 / (n * n)
    # shift pieces so the primitive is continuous at 1/n and n
    mid_shift = low(a) - mid(a)
    high_shift = mid(n) + mid_shift - high(n)
    sm = np.clip(s, a, n)
    return np.where(s <= a, low(s), np.where(s >= n, high(s) + high_shift, mid(sm) + mid_shift))


def _moment_integral(n, c, lo, hi):
    """``integral_lo^hi (s - c) / T_n(s)**2 ds``."""
    return _moment_primitive(n, c, hi) - _moment_primitive(n, c, lo)


def theta(n, s):
    """``Theta_n(s) = integral_0^s t / T_n(t)**2 dt``."""
    n = check_cutoff_index(n)
    s = np.asarray(s, dtype=float)
    a = 1.0 / n
    out = np.where(
        s <= a,
        0.5 * n * n * s * s,
        np.where(
            s >= n,
            0.5 + 2.0 * np.log(n) + (s * s - n * n) / (2.0 * n * n),
            0.5 + np.log(n * np.clip(s, a, n)),
        ),
    )
    return out[()] if out.ndim == 0 else out


def barrier_plus(n, b_max, t):
    """``Gamma_+(t) = integral_{b_max}^t (s - b_max)_+ / T_n(s)**2 ds``."""
    n = check_cutoff_index(n)
    if b_max < 1:
        raise ValueError(f"b_max must be >= 1, got {b_max}")
    t = np.asarray(t, dtype=float)
    tt = np.maximum(t, b_max)
    out = np.maximum(_moment_integral(n, b_max, b_max, tt), 0.0)
    out = np.where(t > b_max, out, 0.0)
    return out[()] if out.ndim == 0 else out


def barrier_minus(n, b_min, t):
    """``Gamma_-(t) = -integral_t^{b_min} (s - b_min)_- / T_n(s)**2 ds``."""
    n = check_cutoff_index(n)
    if not 0 < b_min <= 1:
        raise ValueError(f"b_min must lie in (0, 1], got {b_min}")
    t = np.asarray(t, dtype=float)
    tt = np.minimum(t, b_min)
    # integrand (b_min - s)/T^2 on [t, b_min]
    out = np.maximum(-_moment_integral(n, b_min, tt, b_min), 0.0)
    out = np.where(t < b_min, out, 0.0)
    return out[()] if out.ndim == 0 else out


def rothe_f(n, s):
    """``f(s) = integral_0^s dt / T_n(t)**2``."""
    n = check_cutoff_index(n)
    s = np.asarray(s, dtype=float)
    a = 1.0 / n
    out = np.where(
        s <= a,
        n * n * s,
        np.where(s >= n, 2.0 * n - 1.0 / n + (s - n) / (n * n), 2.0 * n - 1.0 / np.clip(s, a, n)),
    )
    return out[()] if out.ndim == 0 else out


def rothe_f_prime(n, s):
    """``f'(s) = 1 / T_n(s)**2``."""
    return 1.0 / cutoff_T(n, s) ** 2


def rothe_f_inverse(n, y):
    """Inverse of the strictly increasing ``f``."""
    n = check_cutoff_index(n)
    y = np.asarray(y, dtype=float)
    top = 2.0 * n - 1.0 / n
    out = np.where(
        y <= n,
        y / (n * n),
        np.where(y >= top, n + n * n * (y - top), 1.0 / (2.0 * n - np.clip(y, n, top))),
    )
    return out[()] if out.ndim == 0 else out


def rothe_F(n, s):
    """``F(s) = integral_0^s f(t) dt = integral_0^s (s - t) / T_n(t)**2 dt``."""
    n = check_cutoff_index(n)
    s = np.asarray(s, dtype=float)
    a = 1.0 / n
    F_n = 0.5 + 2.0 * n * n - 2.0 - 2.0 * np.log(n)
    sm = np.clip(s, a, n)
    out = np.where(
        s <= a,
        0.5 * n * n * s * s,
        np.where(
            s >= n,
            F_n + (2.0 * n - 1.0 / n) * (s - n) + (s - n) ** 2 / (2.0 * n * n),
            0.5 + 2.0 * n * sm - 2.0 - np.log(n * sm),
        ),
    )
    return out[()] if out.ndim == 0 else out


def rothe_F_star(n, s):
    """Convex conjugate ``F*(s) = sup_t (s t - F(t))``, attained at ``t = f^{-1}(s)``."""
    t = rothe_f_inverse(n, s)
    out = np.asarray(s, dtype=float) * t - rothe_F(n, t)
    out = np.maximum(out, 0.0)
    return out[()] if np.ndim(out) == 0 else out


def lower_F_constant(n) -> float:
    """Admissible ``C1`` in ``C1 s^2 <= F(s)``."""
    return 0.5 / check_cutoff_index(n) ** 2


def upper_F_constant(n) -> float:
    """Admissible ``C2`` in ``F(s) <= C2 s^2``."""
    return 0.5 * check_cutoff_index(n) ** 2
