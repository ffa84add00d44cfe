"""Semi-discrete Galerkin right-hand sides for velocity and b.

Velocity: ``dv/dt = P^{n_v} Leray[-div(v (x) v) + (nu/rho) Lap v - (sigma/rho) div(grad b (x) grad b)]``.

b: the weak form ``int nu1 (db/dt + v.grad b) w / T(b)^2 + mu (1 - 1/T(b)) w
+ 2 sigma grad b . grad w dx = 0`` for every retained mode ``w`` is solved for
``db/dt`` by inverting the weighted mass operator ``M(b) w = P^{l_b}[w / T(b)^2]``
with conjugate gradients.

Products are formed on the grid, transformed, dealiased and truncated.  With
``3 n_v < N`` the convective term is alias-free on the retained modes, and
with ``n_v + 2 l_b < N`` so is the Korteweg term; the energy cancellations in
:func:`korteweg_exchange` then hold to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import scalars
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    gradient,
    inner_product,
    leray_coeffs,
    vector_inner_product,
)

__all__ = [
    "FluidParams",
    "GalerkinIndices",
    "State",
    "MassSolveError",
    "stress_extra",
    "momentum_rhs",
    "weighted_mass_apply",
    "weighted_mass_solve",
    "b_weak_terms",
    "b_weak_residual",
    "b_rhs",
    "korteweg_exchange",
    "convective_transfer",
]


@dataclass(frozen=True)
class FluidParams:
    """Material constants.

    ``rho``, ``nu``, ``nu1`` and ``mu`` must be strictly positive.  ``sigma`` must
    be positive as well, except that ``sigma = 0`` is accepted to select the
    decoupled case in which the momentum equation no longer sees ``b``.
    """

    rho: float = 1.0
    nu: float = 1.0
    nu1: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("rho", "nu", "nu1", "mu", "sigma"):
            value = getattr(self, name)
            ok = isinstance(value, (int, float)) and math.isfinite(value)
            ok = ok and (value > 0 or (name == "sigma" and value == 0))
            if not ok:
                raise ValueError(
                    f"{name} must be positive (material constants are assumed strictly positive), got {value!r}"
                )
            object.__setattr__(self, name, float(value))

    @property
    def decoupled(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class GalerkinIndices:
    """Truncation of velocity (``n_v``) and b (``l_b``), and the cut-off index ``n_cut``."""

    n_v: int
    l_b: int
    n_cut: float = 10.0

    def __post_init__(self):
        for name in ("n_v", "l_b"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not (np.isfinite(self.n_cut) and self.n_cut >= 2):
            raise ValueError(f"n_cut must be a finite cut-off index >= 2, got {self.n_cut!r}")
        object.__setattr__(self, "n_cut", float(self.n_cut))

    def check_grid(self, grid: Grid) -> None:
        for name in ("n_v", "l_b"):
            if 3 * getattr(self, name) > grid.N:
                raise ValueError(
                    f"{name}={getattr(self, name)} exceeds N/3 for N={grid.N} (dealiasing compatibility)"
                )


@dataclass(frozen=True, eq=False)
class State:
    """Velocity, b and time."""

    v: VectorField
    b: SpectralField
    time: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.b.grid

    def replace(self, v=None, b=None, time=None) -> "State":
        return State(self.v if v is None else v, self.b if b is None else b,
                     self.time if time is None else float(time))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(c.coeffs)) for c in (*self.v.components, self.b))


class MassSolveError(RuntimeError):
    """Conjugate gradients on the weighted mass operator hit the iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


# ---------------------------------------------------------------------------
# raw-array helpers


def _phys(grid: Grid, c: np.ndarray) -> np.ndarray:
    return grid.inverse(c)


def _project(grid: Grid, values: np.ndarray, cutoff: int) -> np.ndarray:
    """Forward transform, dealias and truncate a grid product."""
    c = grid.forward(values)
    return np.where(grid.ball(cutoff) & grid.dealias_mask, c, 0.0)


def _grad_phys(grid: Grid, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dx, dy = grid._derivative_multipliers
    return _phys(grid, dx * c), _phys(grid, dy * c)


def _velocity_gradient(v: VectorField) -> np.ndarray:
    """``G[i, j] = d v_i / d x_j`` on the grid."""
    grid = v.grid
    out = np.empty((2, 2, grid.N, grid.N))
    for i, comp in enumerate(v.components):
        out[i, 0], out[i, 1] = _grad_phys(grid, comp.coeffs)
    return out


def _symmetric_gradient(v: VectorField) -> np.ndarray:
    G = _velocity_gradient(v)
    return 0.5 * (G + G.transpose(1, 0, 2, 3))


def _tensor_divergence(grid: Grid, A: dict, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Divergence of a symmetric tensor given by grid values ``A['xx'], A['xy'], A['yy']``."""
    dx, dy = grid._derivative_multipliers
    axx = _project(grid, A["xx"], cutoff)
    axy = _project(grid, A["xy"], cutoff)
    ayy = _project(grid, A["yy"], cutoff)
    return dx * axx + dy * axy, dx * axy + dy * ayy


def _trunc_leray(grid: Grid, cx, cy, cutoff):
    px, py = leray_coeffs(grid, cx, cy)
    ball = grid.ball(cutoff)
    return np.where(ball, px, 0.0), np.where(ball, py, 0.0)


# ---------------------------------------------------------------------------
# momentum


def stress_extra(state: State, params: FluidParams) -> np.ndarray:
    """Extra stress ``2 nu D(v) - sigma grad b (x) grad b`` on the grid, shape ``(2, 2, N, N)``."""
    D = _symmetric_gradient(state.v)
    bx, by = _grad_phys(state.grid, state.b.coeffs)
    gg = np.array([[bx * bx, bx * by], [by * bx, by * by]])
    return 2.0 * params.nu * D - params.sigma * gg


def _momentum_parts(state: State, params: FluidParams, n_v: int):
    """Truncated, Leray-projected coefficient pairs of each momentum term (already divided by rho)."""
    grid = state.grid
    vx, vy = state.v.x.values, state.v.y.values
    bx, by = _grad_phys(grid, state.b.coeffs)
    # convection and Korteweg share the truncation below, so dealiasing is applied to both products
    conv = _tensor_divergence(grid, {"xx": vx * vx, "xy": vx * vy, "yy": vy * vy}, n_v)
    kort = _tensor_divergence(grid, {"xx": bx * bx, "xy": bx * by, "yy": by * by}, n_v)
    k2 = grid.k_squared
    visc = (-k2 * state.v.x.coeffs, -k2 * state.v.y.coeffs)
    c_conv = _trunc_leray(grid, -conv[0], -conv[1], n_v)
    c_visc = _trunc_leray(grid, params.nu / params.rho * visc[0], params.nu / params.rho * visc[1], n_v)
    s = params.sigma / params.rho
    c_kort = _trunc_leray(grid, -s * kort[0], -s * kort[1], n_v)
    return c_conv, c_visc, c_kort


def momentum_rhs(state: State, params: FluidParams, idx: GalerkinIndices,
                 forcing: VectorField | None = None) -> VectorField:
    """Time derivative of the velocity Galerkin coefficients."""
    grid = state.grid
    c_conv, c_visc, c_kort = _momentum_parts(state, params, idx.n_v)
    cx = c_conv[0] + c_visc[0] + c_kort[0]
    cy = c_conv[1] + c_visc[1] + c_kort[1]
    if forcing is not None:
        fx, fy = _trunc_leray(grid, forcing.x.coeffs, forcing.y.coeffs, idx.n_v)
        cx, cy = cx + fx, cy + fy
    return VectorField.from_coeffs(grid, cx, cy)


# ---------------------------------------------------------------------------
# b equation


def _weight(b_values: np.ndarray, n_cut: float) -> np.ndarray:
    return 1.0 / scalars.cutoff_T(n_cut, b_values) ** 2


def _mass_apply_coeffs(grid: Grid, weight: np.ndarray, w: np.ndarray, l_b: int) -> np.ndarray:
    return _project(grid, weight * _phys(grid, w), l_b)


def weighted_mass_apply(b: SpectralField, n_cut: float, l_b: int, w: SpectralField) -> SpectralField:
    """``P^{l_b}[w / T_n(b)^2]``: the Galerkin mass operator acting on ``w``."""
    grid = b.grid
    return SpectralField(grid, _mass_apply_coeffs(grid, _weight(b.values, n_cut), w.coeffs, l_b))


def _real_dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum((a * np.conj(b)).real))


def _cg(apply, rhs: np.ndarray, x0: np.ndarray, tol: float, max_iter: int):
    """Conjugate gradients on Hermitian coefficient arrays with the real L2 pairing.

    The recursive residual drifts from the true one at the level of round-off, so
    convergence is confirmed on the true residual and CG restarts from it if needed.
    """
    rhs_norm = math.sqrt(_real_dot(rhs, rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    x = x0.copy()
    target = (tol * rhs_norm) ** 2
    it = 0
    while True:
        r = rhs - apply(x)
        rr = _real_dot(r, r)
        if not rr > target or it >= max_iter:
            break  # converged, capped, or non-finite (left for the caller's finiteness check)
        p = r.copy()
        while rr > target and it < max_iter:
            Ap = apply(p)
            alpha = rr / _real_dot(p, Ap)
            x += alpha * p
            r -= alpha * Ap
            rr_new = _real_dot(r, r)
            p = r + (rr_new / rr) * p
            rr = rr_new
            it += 1
    return x, it, math.sqrt(rr) / rhs_norm


def _mass_solve_coeffs(grid: Grid, weight: np.ndarray, rhs: np.ndarray, l_b: int,
                       tol: float, max_iter: int) -> np.ndarray:
    apply = lambda w: _mass_apply_coeffs(grid, weight, w, l_b)
    # the constant-weight inverse is exact for uniform b and a good start otherwise
    x0 = _project(grid, _phys(grid, rhs) / weight, l_b)
    x, it, res = _cg(apply, rhs, x0, tol, max_iter)
    if res > tol:
        raise MassSolveError(
            f"weighted mass solve did not reach tol={tol:g} in {it} iterations "
            f"(relative residual {res:.3e}); tol too tight or n_cut too large",
            residual=res,
            iterations=it,
        )
    return x


def weighted_mass_solve(b: SpectralField, n_cut: float, l_b: int, rhs: SpectralField,
                        tol: float = 1e-12, max_iter: int | None = None) -> SpectralField:
    """Solve ``M(b) y = rhs`` on the retained modes by matrix-free conjugate gradients."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    grid = b.grid
    if max_iter is None:
        max_iter = 2 * int(np.count_nonzero(grid.ball(l_b))) + 50
    y = _mass_solve_coeffs(grid, _weight(b.values, n_cut), np.where(grid.ball(l_b), rhs.coeffs, 0.0),
                           l_b, tol, max_iter)
    return SpectralField(grid, y)


def _b_strong_parts(state: State, params: FluidParams, idx: GalerkinIndices):
    """Grid values of ``v.grad b``, ``1/T(b)^2`` and ``mu (1 - 1/T(b))``."""
    grid = state.grid
    bvals = state.b.values
    bx, by = _grad_phys(grid, state.b.coeffs)
    conv = state.v.x.values * bx + state.v.y.values * by
    T = scalars.cutoff_T(idx.n_cut, bvals)
    return conv, 1.0 / T**2, params.mu * (1.0 - 1.0 / T)


def b_rhs(state: State, params: FluidParams, idx: GalerkinIndices,
          forcing: SpectralField | None = None, tol: float = 1e-12) -> SpectralField:
    """``db/dt`` making :func:`b_weak_residual` vanish on every retained mode."""
    grid = state.grid
    conv, weight, reaction = _b_strong_parts(state, params, idx)
    lap_b = np.where(grid.ball(idx.l_b), -grid.k_squared * state.b.coeffs, 0.0)
    rhs = _project(grid, params.nu1 * conv * weight + reaction, idx.l_b) - 2.0 * params.sigma * lap_b
    max_iter = 2 * int(np.count_nonzero(grid.ball(idx.l_b))) + 50
    y = _mass_solve_coeffs(grid, weight, rhs, idx.l_b, tol, max_iter)
    bdot = -y / params.nu1
    if forcing is not None:
        bdot = bdot + np.where(grid.ball(idx.l_b), forcing.coeffs, 0.0)
    return SpectralField(grid, bdot)


def b_weak_terms(state: State, bdot: SpectralField, params: FluidParams, idx: GalerkinIndices,
                 test: SpectralField) -> tuple[float, float, float]:
    """The three integrals of the b weak form against ``test``: transport, reaction, diffusion."""
    grid = state.grid
    conv, weight, reaction = _b_strong_parts(state, params, idx)
    w = test.values
    transport = grid.quadrature(params.nu1 * (bdot.values + conv) * weight * w)
    react = grid.quadrature(reaction * w)
    gb = gradient(state.b)
    gw = gradient(test)
    diffusion = 2.0 * params.sigma * (inner_product(gb.x, gw.x) + inner_product(gb.y, gw.y))
    return transport, react, diffusion


def b_weak_residual(state: State, bdot: SpectralField, params: FluidParams, idx: GalerkinIndices,
                    test: SpectralField) -> float:
    return float(sum(b_weak_terms(state, bdot, params, idx, test)))


# ---------------------------------------------------------------------------
# energy exchange


def korteweg_exchange(state: State, params: FluidParams, idx: GalerkinIndices) -> tuple[float, float]:
    """Korteweg coupling seen from each equation.

    Returns ``(momentum_side, b_side)``: the power ``rho <dv/dt|_Korteweg, v>``
    delivered by the Korteweg stress to the kinetic energy, and the term
    ``sigma <Lap b, v.grad b>`` through which the stress-diffusion part of the
    b-equation feeds the gradient energy.  They cancel exactly in the continuum;
    here they agree in magnitude with opposite sign up to round-off whenever
    ``n_v + 2 l_b < N``.
    """
    grid = state.grid
    _, _, c_kort = _momentum_parts(state, params, idx.n_v)
    kort = VectorField.from_coeffs(grid, *c_kort)
    momentum_side = params.rho * vector_inner_product(kort, state.v)
    conv, _, _ = _b_strong_parts(state, params, idx)
    lap_b = _phys(grid, -grid.k_squared * state.b.coeffs)
    b_side = params.sigma * grid.quadrature(lap_b * conv)
    return momentum_side, b_side


def convective_transfer(v: VectorField, n_v: int) -> float:
    """``<Leray P div(v (x) v), v>``; zero for solenoidal ``v`` when ``3 n_v < N``."""
    grid = v.grid
    conv = _tensor_divergence(
        grid, {"xx": v.x.values ** 2, "xy": v.x.values * v.y.values, "yy": v.y.values ** 2}, n_v
    )
    cx, cy = _trunc_leray(grid, conv[0], conv[1], n_v)
    return vector_inner_product(VectorField.from_coeffs(grid, cx, cy), v)
