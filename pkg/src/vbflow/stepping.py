"""Time integration of the Galerkin system.

Two steppers are provided:

``explicit_rk4``
    classical four-stage Runge-Kutta on the coupled semi-discrete system.
``rothe_semi_implicit``
    Lie splitting: the velocity takes one RK4 step with ``b`` frozen, then ``b``
    takes one implicit Rothe step driven by the trapezoidal time average of the
    velocity over the step.

The Rothe step is written in terms of ``f(s) = integral_0^s T_n(t)^-2 dt``; for
each retained test mode ``w`` it solves

    int nu1 (f(b') - f(b)) / tau w + nu1 f'(b') (v_avg . grad b') w
        + mu (1 - 1/T_n(b')) w + 2 sigma grad b' . grad w dx = 0

by damped Newton with a matrix-free GMRES inner solve, falling back to a damped
Picard iteration.  Residuals are reported after multiplying by ``tau / nu1`` so
they carry the units of ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import scalars
from .dynamics import FluidParams, GalerkinIndices, State, b_rhs, momentum_rhs
from .spectral import Grid, SpectralField, VectorField, leray_coeffs

__all__ = [
    "STEPPERS",
    "SchemeConfig",
    "RotheStepRecord",
    "Forcing",
    "BlowUpError",
    "RotheSolveError",
    "semi_discrete_rhs",
    "rk4_step",
    "time_average_velocity",
    "rothe_residual",
    "rothe_residual_field",
    "rothe_identity",
    "rothe_step",
    "rothe_interpolant",
    "semi_implicit_coupled_step",
    "advance",
]

STEPPERS = ("explicit_rk4", "rothe_semi_implicit")


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    stepper: str = "explicit_rk4"
    newton_tol: float = 1e-10
    newton_max_iter: int = 20
    mass_solve_tol: float = 1e-12

    def __post_init__(self):
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        for name in ("dt", "t_end", "newton_tol", "mass_solve_tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ValueError(f"newton_max_iter must be a positive integer, got {self.newton_max_iter!r}")

    @property
    def n_steps(self) -> int:
        """Number of steps to reach ``t_end``; the last one may be short."""
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    def step_sizes(self) -> list[float]:
        n = self.n_steps
        sizes = [self.dt] * n
        sizes[-1] = self.t_end - self.dt * (n - 1)
        if sizes[-1] <= 0:
            sizes[-1] = self.dt
        return sizes


@dataclass
class RotheStepRecord:
    step_index: int
    newton_iterations: int
    residual_norm: float
    per_step_identity_residual: float
    transport_pairing: float = 0.0
    used_picard: bool = False


@dataclass(frozen=True)
class Forcing:
    """Optional body forcing, used only by manufactured-solution tests."""

    velocity: Callable[[float], VectorField] | None = None
    scalar: Callable[[float], SpectralField] | None = None

    def v_at(self, t: float):
        return None if self.velocity is None else self.velocity(t)

    def b_at(self, t: float):
        return None if self.scalar is None else self.scalar(t)


class BlowUpError(RuntimeError):
    """The state became non-finite; carries the last finite total energy."""

    def __init__(self, message: str, last_energy: float, time: float):
        super().__init__(message)
        self.last_energy = last_energy
        self.time = time


class RotheSolveError(RuntimeError):
    """Neither Newton nor the Picard fallback reached the tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# explicit path


def semi_discrete_rhs(state: State, params: FluidParams, idx: GalerkinIndices,
                      forcing: Forcing | None = None, mass_tol: float = 1e-12):
    """``(dv/dt, db/dt)`` of the Galerkin system at ``state``."""
    fv = forcing.v_at(state.time) if forcing is not None else None
    fb = forcing.b_at(state.time) if forcing is not None else None
    return (momentum_rhs(state, params, idx, fv), b_rhs(state, params, idx, fb, tol=mass_tol))


def _clean_velocity(v: VectorField, n_v: int) -> VectorField:
    grid = v.grid
    px, py = leray_coeffs(grid, v.x.coeffs, v.y.coeffs)
    ball = grid.ball(n_v)
    return VectorField.from_coeffs(grid, np.where(ball, px, 0.0), np.where(ball, py, 0.0))


def _clean_scalar(b: SpectralField, l_b: int) -> SpectralField:
    return SpectralField(b.grid, np.where(b.grid.ball(l_b), b.coeffs, 0.0))


def _check_finite(new: State, old: State, params: FluidParams, idx: GalerkinIndices) -> None:
    if new.is_finite():
        return
    from .diagnostics import total_energy

    energy = total_energy(old, params, idx.n_cut).E_total
    raise BlowUpError(
        f"non-finite state after step from t={old.time:.6g}; last finite E_total={energy!r}",
        last_energy=energy,
        time=old.time,
    )


def rk4_step(state: State, dt: float, params: FluidParams, idx: GalerkinIndices,
             forcing: Forcing | None = None, k1=None, mass_tol: float = 1e-12) -> State:
    """One classical RK4 step of the coupled Galerkin system.

    ``k1`` may carry a precomputed ``semi_discrete_rhs(state)`` to save one evaluation.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rhs = lambda s: semi_discrete_rhs(s, params, idx, forcing, mass_tol)

    def shifted(k, h):
        return State(state.v + k[0] * h, state.b + k[1] * h, state.time + h)

    k1 = rhs(state) if k1 is None else k1
    k2 = rhs(shifted(k1, 0.5 * dt))
    k3 = rhs(shifted(k2, 0.5 * dt))
    k4 = rhs(shifted(k3, dt))
    w = dt / 6.0
    v = state.v + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * w
    b = state.b + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * w
    new = State(_clean_velocity(v, idx.n_v), _clean_scalar(b, idx.l_b), state.time + dt)
    _check_finite(new, state, params, idx)
    return new


def _velocity_rk4(state: State, dt: float, params: FluidParams, idx: GalerkinIndices,
                  forcing: Forcing | None) -> VectorField:
    """RK4 for the momentum equation alone, with ``b`` held at its current value."""
    def rhs(v, t):
        fv = forcing.v_at(t) if forcing is not None else None
        return momentum_rhs(State(v, state.b, t), params, idx, fv)

    t = state.time
    k1 = rhs(state.v, t)
    k2 = rhs(state.v + k1 * (0.5 * dt), t + 0.5 * dt)
    k3 = rhs(state.v + k2 * (0.5 * dt), t + 0.5 * dt)
    k4 = rhs(state.v + k3 * dt, t + dt)
    v = state.v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    return _clean_velocity(v, idx.n_v)


def time_average_velocity(v_history: Sequence[VectorField], times: Sequence[float] | None = None) -> VectorField:
    """Trapezoidal average ``(1/tau) int v dt`` over the sampled history.

    With ``times`` omitted the samples are taken as equally spaced.
    """
    if len(v_history) == 0:
        raise ValueError("velocity history is empty")
    if len(v_history) == 1:
        return v_history[0]
    n = len(v_history)
    t = np.linspace(0.0, 1.0, n) if times is None else np.asarray(times, dtype=float)
    if t.shape != (n,) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing and match the history length")
    span = t[-1] - t[0]
    weights = np.zeros(n)
    h = np.diff(t)
    weights[:-1] += 0.5 * h
    weights[1:] += 0.5 * h
    weights /= span
    cx = sum(w * v.x.coeffs for w, v in zip(weights, v_history))
    cy = sum(w * v.y.coeffs for w, v in zip(weights, v_history))
    return VectorField.from_coeffs(v_history[0].grid, cx, cy)


# ---------------------------------------------------------------------------
# Rothe step


class _RotheProblem:
    """Residual and Jacobian of the scaled Rothe system for one step."""

    def __init__(self, b_prev: SpectralField, v_avg: VectorField, dt: float, params: FluidParams,
                 idx: GalerkinIndices, forcing: SpectralField | None = None):
        self.grid: Grid = b_prev.grid
        self.n = idx.n_cut
        self.l_b = idx.l_b
        self.dt = float(dt)
        self.params = params
        self.mask = self.grid.ball(idx.l_b) & self.grid.dealias_mask
        self.f_prev = scalars.rothe_f(self.n, b_prev.values)
        self.vx = v_avg.x.values
        self.vy = v_avg.y.values
        self.g = None if forcing is None else forcing.values
        self.scale = self.dt / params.nu1
        self.k2 = self.grid.k_squared

    def _grad(self, c):
        dx, dy = self.grid._derivative_multipliers
        return np.fft.ifft2(dx * c, norm="forward"), np.fft.ifft2(dy * c, norm="forward")

    def _proj(self, values):
        return np.where(self.mask, np.fft.fft2(values, norm="forward"), 0.0)

    def parts(self, c: np.ndarray):
        """Grid values needed by both residual and Jacobian at coefficients ``c``."""
        bvals = self.grid.inverse(c)
        gx, gy = self._grad(c)
        conv = self.vx * gx.real + self.vy * gy.real
        return bvals, conv

    def residual(self, c: np.ndarray) -> np.ndarray:
        p = self.params
        bvals, conv = self.parts(c)
        T = scalars.cutoff_T(self.n, bvals)
        fp = 1.0 / T**2
        grid_terms = (p.nu1 * (scalars.rothe_f(self.n, bvals) - self.f_prev) / self.dt
                      + p.nu1 * conv * fp + p.mu * (1.0 - 1.0 / T))
        if self.g is not None:
            grid_terms = grid_terms - p.nu1 * self.g * fp
        r = self._proj(grid_terms) + 2.0 * p.sigma * self.k2 * np.where(self.mask, c, 0.0)
        return self.scale * r

    def jacobian(self, c: np.ndarray):
        """Complex-linear matvec of the scaled Jacobian at ``c``."""
        p = self.params
        bvals, conv = self.parts(c)
        T = scalars.cutoff_T(self.n, bvals)
        Tp = scalars.cutoff_T_derivative(self.n, bvals)
        fp = 1.0 / T**2
        fpp = -2.0 * Tp / T**3
        a0 = p.nu1 * fp / self.dt + p.nu1 * conv * fpp + p.mu * Tp / T**2
        if self.g is not None:
            a0 = a0 - p.nu1 * self.g * fpp
        a1x = p.nu1 * self.vx * fp
        a1y = p.nu1 * self.vy * fp
        stiff = 2.0 * p.sigma * self.k2
        mean_fp = float(np.mean(fp))

        def matvec(d):
            d = np.where(self.mask, d, 0.0)
            dv = np.fft.ifft2(d, norm="forward")
            dx, dy = self._grad(d)
            out = self._proj(a0 * dv + a1x * dx + a1y * dy) + stiff * d
            return self.scale * out

        precond_diag = self.scale * (p.nu1 * mean_fp / self.dt + stiff)
        return matvec, precond_diag


def _pack(mask, c):
    return c[mask]


def _unpack(mask, x):
    out = np.zeros(mask.shape, dtype=complex)
    out[mask] = x
    return out


def _hermitian(c: np.ndarray) -> np.ndarray:
    """Nearest Hermitian-symmetric coefficient array (coefficients of a real field)."""
    flipped = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
    return 0.5 * (c + flipped)


def _max_abs(r: np.ndarray) -> float:
    return float(np.max(np.abs(r)))


def _l2(r: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(r) ** 2)))


def rothe_residual_field(b_candidate: SpectralField, b_prev: SpectralField, v_avg: VectorField, dt: float,
                         params: FluidParams, idx: GalerkinIndices,
                         forcing: SpectralField | None = None) -> SpectralField:
    """Riesz representative of the (unscaled) Rothe map on the retained modes."""
    prob = _RotheProblem(b_prev, v_avg, dt, params, idx, forcing)
    return SpectralField(b_prev.grid, prob.residual(b_candidate.coeffs) / prob.scale)


def rothe_residual(b_candidate: SpectralField, b_prev: SpectralField, v_avg: VectorField, dt: float,
                   params: FluidParams, idx: GalerkinIndices, test: SpectralField,
                   forcing: SpectralField | None = None) -> float:
    """Pairing of the Rothe map at ``b_candidate`` with a retained test function.

    Evaluated term by term with grid quadrature, independently of the Newton assembly.
    """
    grid = b_prev.grid
    n = idx.n_cut
    b = b_candidate.values
    T = scalars.cutoff_T(n, b)
    fp = 1.0 / T**2
    dx, dy = grid._derivative_multipliers
    bx, by = grid.inverse(dx * b_candidate.coeffs), grid.inverse(dy * b_candidate.coeffs)
    w = test.values
    integrand = (params.nu1 * (scalars.rothe_f(n, b) - scalars.rothe_f(n, b_prev.values)) / dt * w
                 + params.nu1 * fp * (v_avg.x.values * bx + v_avg.y.values * by) * w
                 + params.mu * (1.0 - 1.0 / T) * w)
    if forcing is not None:
        integrand = integrand - params.nu1 * forcing.values * fp * w
    wx, wy = grid.inverse(dx * test.coeffs), grid.inverse(dy * test.coeffs)
    integrand = integrand + 2.0 * params.sigma * (bx * wx + by * wy)
    return grid.quadrature(integrand)


def rothe_identity(b_next: SpectralField, b_prev: SpectralField, v_avg: VectorField, dt: float,
                   params: FluidParams, idx: GalerkinIndices,
                   forcing: SpectralField | None = None) -> tuple[float, float, float]:
    """Per-step energy identity obtained by testing the Rothe step with ``b_next``.

    Returns ``(identity, transport, normalizer)`` where ``identity`` is

        int (f(b') - f(b)) b' + (tau/nu1) [mu (1 - 1/T_n(b')) b' + 2 sigma |grad b'|^2
            + nu1 f'(b') (v . grad b') b' - nu1 g f'(b') b'] dx,

    ``transport`` is the velocity term alone (an exact derivative in the continuum,
    hence zero there) and ``normalizer = |Omega| * sum |b'_k|`` bounds the pairing of
    a residual whose modes are all below one in magnitude.
    """
    grid = b_prev.grid
    n = idx.n_cut
    b = b_next.values
    T = scalars.cutoff_T(n, b)
    fp = 1.0 / T**2
    dx, dy = grid._derivative_multipliers
    bx, by = grid.inverse(dx * b_next.coeffs), grid.inverse(dy * b_next.coeffs)
    s = dt / params.nu1
    jump = grid.quadrature((scalars.rothe_f(n, b) - scalars.rothe_f(n, b_prev.values)) * b)
    reaction = s * params.mu * grid.quadrature((1.0 - 1.0 / T) * b)
    gradient_term = s * 2.0 * params.sigma * grid.quadrature(bx * bx + by * by)
    transport = dt * grid.quadrature(fp * (v_avg.x.values * bx + v_avg.y.values * by) * b)
    identity = jump + reaction + gradient_term + transport
    if forcing is not None:
        identity -= dt * grid.quadrature(forcing.values * fp * b)
    normalizer = grid.area * float(np.sum(np.abs(b_next.coeffs)))
    return identity, transport, normalizer


def rothe_step(b_prev: SpectralField, v_avg: VectorField, dt: float, params: FluidParams,
               idx: GalerkinIndices, cfg: SchemeConfig, forcing: SpectralField | None = None,
               step_index: int = 0) -> tuple[SpectralField, RotheStepRecord]:
    """Solve one implicit Rothe step for ``b``.

    Convergence means every retained coefficient of the scaled residual is at
    most ``cfg.newton_tol`` in magnitude.
    """
    prob = _RotheProblem(b_prev, v_avg, dt, params, idx, forcing)
    mask = prob.mask
    tol = cfg.newton_tol
    c = np.where(mask, b_prev.coeffs, 0.0)
    r = prob.residual(c)
    iters = 0
    converged = _max_abs(r) <= tol
    while not converged and iters < cfg.newton_max_iter:
        matvec, diag = prob.jacobian(c)
        m = int(np.count_nonzero(mask))
        diag_packed = _pack(mask, diag)
        A = LinearOperator((m, m), matvec=lambda x: _pack(mask, matvec(_unpack(mask, x))), dtype=complex)
        P = LinearOperator((m, m), matvec=lambda x: x / diag_packed, dtype=complex)
        rhs = -_pack(mask, r)
        delta, _info = gmres(A, rhs, M=P, rtol=1e-10, atol=0.1 * tol, restart=60, maxiter=20)
        step = _hermitian(_unpack(mask, delta))
        norm0 = _l2(r)
        lam = 1.0
        for _ in range(30):
            c_try = c + lam * step
            r_try = prob.residual(c_try)
            if _l2(r_try) <= (1.0 - 1e-4 * lam) * norm0 or _max_abs(r_try) <= tol:
                break
            lam *= 0.5
        else:
            iters += 1
            break  # stagnated; the Picard fallback takes over
        c, r = c_try, r_try
        iters += 1
        converged = _max_abs(r) <= tol

    used_picard = False
    if not converged:
        used_picard = True
        c, r, converged = _picard(prob, c, r, tol, max_iter=50 * cfg.newton_max_iter)
    if not converged:
        raise RotheSolveError(
            f"Rothe step {step_index} failed: residual {_max_abs(r):.3e} > tol {tol:g} after Newton "
            f"and Picard; dt={dt:g} is probably too large",
            residual=_max_abs(r),
        )
    b_next = SpectralField(b_prev.grid, _hermitian(c))
    identity, transport, normalizer = rothe_identity(b_next, b_prev, v_avg, dt, params, idx, forcing)
    record = RotheStepRecord(
        step_index=step_index,
        newton_iterations=iters,
        residual_norm=_max_abs(r),
        per_step_identity_residual=abs(identity) / max(normalizer, np.finfo(float).tiny),
        transport_pairing=transport,
        used_picard=used_picard,
    )
    return b_next, record


def _picard(prob: _RotheProblem, c, r, tol, max_iter):
    """Damped fixed-point iteration preconditioned by the constant-coefficient Jacobian."""
    _, diag = prob.jacobian(c)
    omega = 1.0
    for _ in range(max_iter):
        if _max_abs(r) <= tol:
            return c, r, True
        c_try = c - omega * np.where(prob.mask, r / diag, 0.0)
        r_try = prob.residual(c_try)
        if _l2(r_try) < _l2(r):
            c, r = c_try, r_try
            omega = min(1.0, 2.0 * omega)
        else:
            omega *= 0.5
            if omega < 1e-8:
                break
    return c, r, _max_abs(r) <= tol


def rothe_interpolant(b_seq: Sequence[SpectralField], t: float, dt: float, t0: float = 0.0) -> SpectralField:
    """Piecewise-linear-in-time reconstruction through the Rothe nodes ``t0 + k dt``."""
    if len(b_seq) == 0:
        raise ValueError("empty Rothe sequence")
    t_last = t0 + dt * (len(b_seq) - 1)
    eps = 1e-12 * max(1.0, abs(t_last))
    if t < t0 - eps or t > t_last + eps:
        raise ValueError(f"t={t} outside the covered range [{t0}, {t_last}]")
    s = (t - t0) / dt
    k = min(max(int(math.floor(s)), 0), len(b_seq) - 1)
    theta = s - k
    if k == len(b_seq) - 1 or theta == 0.0:
        return b_seq[k]
    return b_seq[k] * (1.0 - theta) + b_seq[k + 1] * theta


def semi_implicit_coupled_step(state: State, dt: float, params: FluidParams, idx: GalerkinIndices,
                               cfg: SchemeConfig, forcing: Forcing | None = None,
                               step_index: int = 0) -> tuple[State, RotheStepRecord]:
    """Velocity by RK4 with ``b`` frozen, then ``b`` by one Rothe step."""
    v_new = _velocity_rk4(state, dt, params, idx, forcing)
    v_avg = time_average_velocity([state.v, v_new])
    fb = forcing.b_at(state.time + dt) if forcing is not None else None
    try:
        b_new, record = rothe_step(state.b, v_avg, dt, params, idx, cfg, fb, step_index)
    except RotheSolveError:
        if not State(v_new, state.b).is_finite():
            _check_finite(State(v_new, state.b, state.time + dt), state, params, idx)
        raise
    new = State(v_new, b_new, state.time + dt)
    _check_finite(new, state, params, idx)
    return new, record


def advance(state: State, dt: float, params: FluidParams, idx: GalerkinIndices, cfg: SchemeConfig,
            forcing: Forcing | None = None, step_index: int = 0, k1=None):
    """One step of the configured stepper; returns ``(state, record or None)``."""
    if cfg.stepper == "explicit_rk4":
        return rk4_step(state, dt, params, idx, forcing, k1, cfg.mass_solve_tol), None
    return semi_implicit_coupled_step(state, dt, params, idx, cfg, forcing, step_index)
