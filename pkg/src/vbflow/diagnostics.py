"""Energy ledger, dissipation, entropy production, barrier and a priori monitors.

Conventions
-----------
* ``E_kin = rho/2 ||v||^2``, ``E_grad = sigma/2 ||grad b||^2`` and
  ``E_log = mu/2 int (b - ln b)``.  ``E_log`` is integrated with the grid rule,
  which is the quadrature the Galerkin weak form itself uses.
* ``D_visc = 2 nu ||D(v)||^2`` and
  ``D_relax = int nu1 |db/dt + v.grad b|^2 / (2 T_n(b)^2)``, where ``db/dt`` is the
  semi-discrete right-hand side at the recorded state.
* ``cum_dissipation`` integrates ``D_visc + D_relax`` with the trapezoidal rule in
  time, so the budget residual of a fourth-order run still converges at second
  order in ``dt``.
* Wherever the analysis has ``1/b`` the Galerkin-level diagnostics use
  ``1/T_n(b)``; the two agree whenever ``b`` stays inside ``[1/n, n]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import scalars
from .dynamics import FluidParams, State, _symmetric_gradient
from .spectral import SpectralField, VectorField, gradient, vector_inner_product

__all__ = [
    "LEDGER_COLUMNS",
    "EnergyParts",
    "EnergyLedger",
    "BudgetReport",
    "MinMaxReport",
    "AprioriReport",
    "EntropyProductionError",
    "total_energy",
    "dissipation_rate",
    "ledger_row",
    "accumulate",
    "energy_budget",
    "barrier_bounds",
    "minmax_monitor",
    "weak_residual_momentum",
    "momentum_weak_terms",
    "thermo_report",
    "apriori_monitor",
    "oversampled_values",
]

LEDGER_COLUMNS = (
    "t",
    "E_kin",
    "E_grad",
    "E_log",
    "E_total",
    "D_visc",
    "D_relax",
    "cum_dissipation",
    "budget_residual",
    "b_min_obs",
    "b_max_obs",
    "div_v_max",
    "newton_iters",
)


@dataclass(frozen=True)
class EnergyParts:
    E_kin: float
    E_grad: float
    E_log: float
    E_total: float
    fault: bool = False


@dataclass
class EnergyLedger:
    """One row of the time series; field order is the CSV column order."""

    t: float
    E_kin: float
    E_grad: float
    E_log: float
    E_total: float
    D_visc: float
    D_relax: float
    cum_dissipation: float = 0.0
    budget_residual: float = 0.0
    b_min_obs: float = float("nan")
    b_max_obs: float = float("nan")
    div_v_max: float = 0.0
    newton_iters: int = 0
    fault: bool = field(default=False, compare=False)

    def as_row(self) -> list:
        return [getattr(self, name) for name in LEDGER_COLUMNS]

    @property
    def dissipation(self) -> float:
        return self.D_visc + self.D_relax


class EntropyProductionError(ArithmeticError):
    """A pointwise entropy production value came out negative."""


# ---------------------------------------------------------------------------
# energies and rates


def total_energy(state: State, params: FluidParams, n_cut: float) -> EnergyParts:
    """Kinetic, gradient and logarithmic energies; ``E_log = inf`` flags a nonpositive ``b``."""
    grid = state.grid
    e_kin = 0.5 * params.rho * vector_inner_product(state.v, state.v)
    gb = gradient(state.b)
    e_grad = 0.5 * params.sigma * vector_inner_product(gb, gb)
    b = state.b.values
    if np.min(b) <= 0.0:
        return EnergyParts(e_kin, e_grad, math.inf, math.inf, fault=True)
    e_log = 0.5 * params.mu * grid.quadrature(b - np.log(b))
    return EnergyParts(e_kin, e_grad, e_log, e_kin + e_grad + e_log)


def _material_derivative(state: State, bdot: SpectralField) -> np.ndarray:
    gb = gradient(state.b)
    return bdot.values + state.v.x.values * gb.x.values + state.v.y.values * gb.y.values


def _dissipation_parts(state: State, bdot: SpectralField, params: FluidParams, n_cut: float):
    D = _symmetric_gradient(state.v)
    visc_density = 2.0 * params.nu * np.sum(D * D, axis=(0, 1))
    T = scalars.cutoff_T(n_cut, state.b.values)
    relax_density = params.nu1 * _material_derivative(state, bdot) ** 2 / (2.0 * T**2)
    return visc_density, relax_density


def dissipation_rate(state: State, bdot: SpectralField, params: FluidParams, n_cut: float,
                     split: bool = False):
    """``int 2 nu |D|^2 + nu1 |db/dt + v.grad b|^2 / (2 T_n(b)^2) dx``.

    With ``split=True`` returns ``(D_visc, D_relax)`` instead of the sum.
    """
    grid = state.grid
    visc, relax = _dissipation_parts(state, bdot, params, n_cut)
    d_visc, d_relax = grid.quadrature(visc), grid.quadrature(relax)
    return (d_visc, d_relax) if split else d_visc + d_relax


def ledger_row(state: State, bdot: SpectralField, params: FluidParams, n_cut: float,
               newton_iters: int = 0) -> EnergyLedger:
    """Instantaneous ledger entry; cumulative columns are filled by :func:`accumulate`."""
    e = total_energy(state, params, n_cut)
    d_visc, d_relax = dissipation_rate(state, bdot, params, n_cut, split=True)
    b = state.b.values
    return EnergyLedger(
        t=float(state.time),
        E_kin=e.E_kin,
        E_grad=e.E_grad,
        E_log=e.E_log,
        E_total=e.E_total,
        D_visc=d_visc,
        D_relax=d_relax,
        b_min_obs=float(np.min(b)),
        b_max_obs=float(np.max(b)),
        div_v_max=state.v.max_divergence(),
        newton_iters=int(newton_iters),
        fault=e.fault,
    )


def accumulate(previous: EnergyLedger | None, row: EnergyLedger, initial_energy: float) -> EnergyLedger:
    """Fill ``cum_dissipation`` (trapezoid from ``previous``) and ``budget_residual``."""
    if previous is None:
        row.cum_dissipation = 0.0
    else:
        dt = row.t - previous.t
        row.cum_dissipation = previous.cum_dissipation + 0.5 * dt * (previous.dissipation + row.dissipation)
    row.budget_residual = row.E_total + row.cum_dissipation - initial_energy
    return row


@dataclass(frozen=True)
class BudgetReport:
    max_residual: float
    max_abs_residual: float
    initial_energy: float
    dissipation_nondecreasing: bool
    dissipation_nonnegative: bool

    @property
    def relative(self) -> float:
        return self.max_abs_residual / self.initial_energy if self.initial_energy else math.inf


def energy_budget(ledger_series: Sequence[EnergyLedger]) -> BudgetReport:
    """Summarize ``E_total(t) + cum_dissipation(t) - E_total(0)`` over a run."""
    if not ledger_series:
        raise ValueError("empty ledger series")
    res = np.array([row.budget_residual for row in ledger_series])
    cum = np.array([row.cum_dissipation for row in ledger_series])
    return BudgetReport(
        max_residual=float(np.max(res)),
        max_abs_residual=float(np.max(np.abs(res))),
        initial_energy=ledger_series[0].E_total,
        dissipation_nondecreasing=bool(np.all(np.diff(cum) >= 0.0)),
        dissipation_nonnegative=bool(np.all(cum >= 0.0)),
    )


# ---------------------------------------------------------------------------
# min/max principle


def oversampled_values(f: SpectralField, factor: int = 4) -> np.ndarray:
    """Physical values of ``f`` on a grid ``factor`` times finer, by zero padding.

    Exact for fields without Nyquist content, which holds for every truncated field.
    """
    N = f.grid.N
    M = factor * N
    shifted = np.fft.fftshift(f.coeffs)
    pad = (M - N) // 2
    big = np.zeros((M, M), dtype=complex)
    big[pad:pad + N, pad:pad + N] = shifted
    big = np.fft.ifftshift(big)
    return np.fft.ifft2(big, norm="forward").real


def barrier_bounds(b0: SpectralField, oversample: int = 4) -> scalars.BarrierBounds:
    """``b_max = max(1, sup b0)``, ``b_min = 1/max(1, sup 1/b0)`` with the sup taken on a refined grid."""
    vals = np.concatenate([oversampled_values(b0, oversample).ravel(), b0.values.ravel()])
    return scalars.BarrierBounds.from_values(vals)


@dataclass(frozen=True)
class MinMaxReport:
    violation_above: float
    violation_below: float
    barrier_integrals: tuple[float, float]


def minmax_monitor(state: State, bounds: scalars.BarrierBounds, n_cut: float) -> MinMaxReport:
    """Excursions of ``b`` beyond ``[b_min, b_max]`` and the barrier integrals ``int Gamma_pm(b)``."""
    b = state.b.values
    grid = state.grid
    above = max(0.0, float(np.max(b)) - bounds.b_max)
    below = max(0.0, bounds.b_min - float(np.min(b)))
    g_plus = grid.quadrature(scalars.barrier_plus(n_cut, bounds.b_max, b))
    g_minus = grid.quadrature(scalars.barrier_minus(n_cut, bounds.b_min, b))
    return MinMaxReport(above, below, (g_plus, g_minus))


# ---------------------------------------------------------------------------
# weak residual of the momentum balance


def momentum_weak_terms(state: State, vdot: VectorField, params: FluidParams, test: VectorField):
    """The four integrals of the momentum weak form: inertia, viscous, Korteweg, convective."""
    grid = state.grid
    inertia = params.rho * vector_inner_product(vdot, test)
    D = _symmetric_gradient(state.v)
    gw = [gradient(c) for c in test.components]
    grad_w = np.array([[gw[i].components[j].values for j in range(2)] for i in range(2)])
    gb = gradient(state.b)
    gbv = (gb.x.values, gb.y.values)
    vv = (state.v.x.values, state.v.y.values)
    viscous = grid.quadrature(np.sum(2.0 * params.nu * D * grad_w, axis=(0, 1)))
    korteweg = -params.sigma * grid.quadrature(sum(gbv[i] * gbv[j] * grad_w[i, j] for i in range(2) for j in range(2)))
    convective = -params.rho * grid.quadrature(sum(vv[i] * vv[j] * grad_w[i, j] for i in range(2) for j in range(2)))
    return inertia, viscous, korteweg, convective


def weak_residual_momentum(state: State, vdot: VectorField, params: FluidParams, test: VectorField) -> float:
    """``<rho dv/dt, w> + int (2 nu D - sigma grad b (x) grad b - rho v (x) v) : grad w dx``."""
    return float(sum(momentum_weak_terms(state, vdot, params, test)))


# ---------------------------------------------------------------------------
# thermodynamics


def thermo_report(state: State, bdot: SpectralField, params: FluidParams, n_cut: float):
    """``(free_energy, entropy_production)``.

    The free energy is ``int mu (b - 1 - ln b)/2 + sigma |grad b|^2 / 2 dx`` (the
    density-only part is an arbitrary constant, reported as zero).  Entropy
    production integrates ``2 nu |D|^2 + nu1/2 |(db/dt + v.grad b) / T_n(b)|^2``; a
    negative pointwise value raises :class:`EntropyProductionError`.  A
    nonpositive ``b`` returns ``(inf, production)`` as a fault marker.
    """
    grid = state.grid
    visc, relax = _dissipation_parts(state, bdot, params, n_cut)
    xi = visc + relax
    xi_min = float(np.min(xi))
    if xi_min < 0.0 or not np.all(np.isfinite(xi)):
        raise EntropyProductionError(f"entropy production negative or non-finite: min xi = {xi_min!r}")
    production = grid.quadrature(xi)
    b = state.b.values
    if np.min(b) <= 0.0:
        return math.inf, production
    gb = gradient(state.b)
    free = 0.5 * params.mu * grid.quadrature(b - 1.0 - np.log(b)) + 0.5 * params.sigma * vector_inner_product(gb, gb)
    return free, production


# ---------------------------------------------------------------------------
# a priori estimates


@dataclass(frozen=True)
class AprioriReport:
    """Monitored norms, their data bounds and any exceedances.

    ``data_bound`` is the initial total energy.  Every bound is built from
    ``excess = E_total(0) - mu |Omega| / 2 + slack``, which controls the
    energies because ``b - ln b >= 1``; ``slack`` is the largest positive budget
    residual of the run plus ``1e-12 E_total(0)``.
    """

    sup_v_L2: float
    int_v_H1_sq: float
    sup_grad_b_L2: float
    int_relax_sq: float
    data_bound: float
    excess: float
    bounds: dict
    flags: tuple

    @property
    def ok(self) -> bool:
        return not self.flags


def _trapezoid(t: np.ndarray, y: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(t) * (y[1:] + y[:-1])))


def apriori_monitor(ledger_series: Sequence[EnergyLedger], params: FluidParams, area: float) -> AprioriReport:
    """Check the energy-derived a priori bounds along a completed run."""
    if not ledger_series:
        raise ValueError("empty ledger series")
    t = np.array([r.t for r in ledger_series])
    e_kin = np.array([r.E_kin for r in ledger_series])
    e_grad = np.array([r.E_grad for r in ledger_series])
    d_visc = np.array([r.D_visc for r in ledger_series])
    d_relax = np.array([r.D_relax for r in ledger_series])
    res = np.array([r.budget_residual for r in ledger_series])
    v_sq = 2.0 * e_kin / params.rho
    # for solenoidal periodic fields ||grad v||^2 = 2 ||D v||^2
    v_h1_sq = v_sq + d_visc / params.nu
    grad_b_sq = 2.0 * e_grad / params.sigma if params.sigma > 0 else np.zeros_like(e_grad)
    relax_sq = 2.0 * d_relax / params.nu1

    e0 = ledger_series[0].E_total
    slack = max(0.0, float(np.max(res))) + 1e-12 * abs(e0)
    excess = max(0.0, e0 - 0.5 * params.mu * area) + slack
    duration = float(t[-1] - t[0])
    monitored = {
        "sup_v_L2": float(np.sqrt(np.max(v_sq))),
        "int_v_H1_sq": _trapezoid(t, v_h1_sq),
        "sup_grad_b_L2": float(np.sqrt(np.max(grad_b_sq))),
        "int_relax_sq": _trapezoid(t, relax_sq),
    }
    bounds = {
        "sup_v_L2": math.sqrt(2.0 * excess / params.rho),
        "int_v_H1_sq": duration * 2.0 * excess / params.rho + excess / params.nu,
        "sup_grad_b_L2": math.sqrt(2.0 * excess / params.sigma) if params.sigma > 0 else math.inf,
        "int_relax_sq": 2.0 * excess / params.nu1,
    }
    flags = tuple(k for k, val in monitored.items() if not (np.isfinite(val) and val <= bounds[k] * (1 + 1e-12)))
    return AprioriReport(data_bound=e0, excess=excess, bounds=bounds, flags=flags, **monitored)
