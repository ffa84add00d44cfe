"""Brute-force reference evaluations used to check the fast paths.

Nothing here calls the closed forms of :mod:`vbflow.scalars` or the spectral
machinery, except where a function says so explicitly (the Rothe bisection
oracle needs ``f`` and ``T_n`` by definition of the scalar equation it solves).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize

_QUAD = dict(epsabs=1e-15, epsrel=1e-13, limit=200)


def cutoff(n: float, s: float) -> float:
    return min(n, max(1.0 / n, s))


def _quad(fun, lo, hi, n):
    """Adaptive quadrature, split at the kinks ``1/n`` and ``n`` of the cut-off."""
    if lo == hi:
        return 0.0
    sign = 1.0
    if lo > hi:
        lo, hi, sign = hi, lo, -1.0
    nodes = [lo] + [p for p in (1.0 / n, n) if lo < p < hi] + [hi]
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += integrate.quad(fun, a, b, **_QUAD)[0]
    return sign * total


def f_quad(n: float, s: float) -> float:
    return _quad(lambda t: 1.0 / cutoff(n, t) ** 2, 0.0, s, n)


def F_quad(n: float, s: float) -> float:
    # repeated integral collapsed to one: int_0^s (s - t) / T(t)^2 dt
    return _quad(lambda t: (s - t) / cutoff(n, t) ** 2, 0.0, s, n)


def theta_quad(n: float, s: float) -> float:
    return _quad(lambda t: t / cutoff(n, t) ** 2, 0.0, s, n)


def barrier_plus_quad(n: float, b_max: float, t: float) -> float:
    return _quad(lambda s: max(0.0, s - b_max) / cutoff(n, s) ** 2, b_max, t, n)


def barrier_minus_quad(n: float, b_min: float, t: float) -> float:
    return -_quad(lambda s: min(0.0, s - b_min) / cutoff(n, s) ** 2, t, b_min, n)


def golden_section_max(fun, lo: float, hi: float, iters: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``fun`` on ``[lo, hi]``; returns ``(argmax, max)``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    t = 0.5 * (a + b)
    return t, max(fun(t), fc, fd)


def F_star_golden(n: float, s: float, F) -> float:
    """``sup_t (s t - F(t))`` by golden-section search on a bracket that contains the maximizer.

    ``F(t) >= t^2 / (2 n^2)`` makes ``s t - F(t) < 0`` once ``|t| > 2 n^2 |s|``.
    """
    r = 2.0 * n * n * abs(s) + 1.0
    _, val = golden_section_max(lambda t: s * t - float(F(n, t)), -r, r)
    return val


def rothe_uniform_bisection(n, c, tau, nu1, mu, f, T, lo=None, hi=None) -> float:
    """Root ``b'`` of ``nu1 (f(b') - f(c)) / tau + mu (1 - 1/T_n(b')) = 0``.

    The left side is strictly increasing in ``b'`` so bisection is safe.
    """
    g = lambda b: nu1 * (float(f(n, b)) - float(f(n, c))) / tau + mu * (1.0 - 1.0 / float(T(n, b)))
    lo = -10.0 * n if lo is None else lo
    hi = 10.0 * n if hi is None else hi
    return optimize.bisect(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def logistic(c: float, r: float, t):
    """Solution of ``b' = r b (1 - b)``, ``b(0) = c``."""
    e = np.exp(r * np.asarray(t, dtype=float))
    return c * e / (1.0 + c * (e - 1.0))


def logistic_ode(c: float, r: float, t: float) -> float:
    """High-accuracy numerical integration of the same ODE, independent of the formula."""
    sol = integrate.solve_ivp(lambda _t, y: r * y * (1.0 - y), (0.0, t), [c], method="DOP853",
                              rtol=1e-13, atol=1e-15)
    return float(sol.y[0, -1])


def fd_derivative(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Sixth-order centered periodic finite difference."""
    r = lambda k: np.roll(a, -k, axis=axis)
    return (45.0 * (r(1) - r(-1)) - 9.0 * (r(2) - r(-2)) + (r(3) - r(-3))) / (60.0 * h)


def fd_poisson_solve(rhs: np.ndarray, h: float) -> np.ndarray:
    """Solve the 6th-order FD Laplacian ``Lap p = rhs`` on a periodic grid (p orthogonal to the FD null space).

    The FD Laplacian is the square of the FD first derivative, so the result is
    consistent with :func:`fd_derivative`; it is diagonalized by the DFT, which is
    only used as a fast linear solver here.
    """
    N = rhs.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(N)
    sym = (45.0 * 2j * np.sin(k) - 9.0 * 2j * np.sin(2 * k) + 2j * np.sin(3 * k)) / (60.0 * h)
    SX, SY = np.meshgrid(sym, sym, indexing="ij")
    lap = SX**2 + SY**2
    # the FD gradient also annihilates the Nyquist checkerboards, where sin(pi) leaves ~1e-30
    null = np.abs(lap) < 1e-8 / h**2
    ph = np.fft.fft2(rhs) / np.where(null, 1.0, lap)
    ph[null] = 0.0
    return np.fft.ifft2(ph).real


def trapezoid_integral(values: np.ndarray, h: float) -> float:
    return float(np.sum(values)) * h * h
