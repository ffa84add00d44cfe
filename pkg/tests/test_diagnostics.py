import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbflow import diagnostics as dg
from vbflow import scalars
from vbflow.dynamics import FluidParams, GalerkinIndices, State, b_rhs, momentum_rhs
from vbflow.spectral import Grid, SpectralField, VectorField
from vbflow.verification import random_state

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def taylor_green(g):
    X, Y = g.coords
    return VectorField.from_physical(np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y), g)


def row(t, e, d, res=0.0, e_kin=0.0, e_grad=0.0, d_relax=0.0):
    return dg.EnergyLedger(t=t, E_kin=e_kin, E_grad=e_grad, E_log=e - e_kin - e_grad, E_total=e, D_visc=d - d_relax,
                           D_relax=d_relax, budget_residual=res)


# ---------------------------------------------------------------- energies


def test_equilibrium_energy():
    g = Grid(8)
    p = FluidParams(mu=2.0)
    e = dg.total_energy(State(VectorField.zeros(g), SpectralField.constant(g, 1.0)), p, 10.0)
    assert e.E_kin == 0 and e.E_grad == 0
    assert e.E_log == pytest.approx(0.5 * 2.0 * g.area, rel=1e-14)
    assert not e.fault


def test_taylor_green_kinetic_energy():
    g = Grid(16)
    p = FluidParams(rho=3.0)
    e = dg.total_energy(State(taylor_green(g), SpectralField.constant(g, 1.0)), p, 10.0)
    # ||v||^2 = |Omega| / 2 for unit-amplitude Taylor-Green
    assert e.E_kin == pytest.approx(0.5 * 3.0 * g.area / 2, rel=1e-14)


def test_nonpositive_b_is_flagged():
    g = Grid(8)
    X, _ = g.coords
    s = State(VectorField.zeros(g), SpectralField.from_physical(np.sin(X), g))
    e = dg.total_energy(s, FluidParams(), 10.0)
    assert e.fault and math.isinf(e.E_log) and math.isinf(e.E_total)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_log_energy_bounded_below(seed):
    g = Grid(16)
    s = random_state(g, GalerkinIndices(5, 5), np.random.default_rng(seed), b_amp=0.9)
    p = FluidParams(mu=1.7)
    e = dg.total_energy(s, p, 10.0)
    assert e.E_log >= 0.5 * p.mu * g.area * (1 - 1e-14)
    assert e.E_total >= e.E_log


# ---------------------------------------------------------------- dissipation and entropy


def test_dissipation_taylor_green():
    g = Grid(16)
    p = FluidParams(nu=0.4)
    s = State(taylor_green(g), SpectralField.constant(g, 1.0))
    idx = GalerkinIndices(4, 4)
    d_visc, d_relax = dg.dissipation_rate(s, b_rhs(s, p, idx), p, 10.0, split=True)
    # 2 nu ||D v||^2 = nu ||grad v||^2 = nu * 2 * ||v||^2 for this mode
    assert d_visc == pytest.approx(0.4 * 2 * g.area / 2, rel=1e-13)
    assert abs(d_relax) < 1e-28
    assert dg.dissipation_rate(s, b_rhs(s, p, idx), p, 10.0) == pytest.approx(d_visc)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_entropy_production_nonnegative_and_matches_dissipation(seed):
    g = Grid(24)
    idx = GalerkinIndices(7, 7)
    s = random_state(g, idx, np.random.default_rng(seed), b_amp=0.8)
    p = FluidParams(nu=0.05, sigma=0.02)
    bdot = b_rhs(s, p, idx)
    free, production = dg.thermo_report(s, bdot, p, idx.n_cut)
    assert production >= 0
    assert production == pytest.approx(dg.dissipation_rate(s, bdot, p, idx.n_cut), rel=1e-14)
    e = dg.total_energy(s, p, idx.n_cut)
    assert free == pytest.approx(e.E_total - e.E_kin - 0.5 * p.mu * g.area, rel=1e-10, abs=1e-12)


def test_entropy_error_on_negative_production(monkeypatch):
    g = Grid(8)
    s = State(VectorField.zeros(g), SpectralField.constant(g, 1.0))
    monkeypatch.setattr(dg, "_dissipation_parts", lambda *a: (np.full((8, 8), -1e-3), np.zeros((8, 8))))
    with pytest.raises(dg.EntropyProductionError, match="negative"):
        dg.thermo_report(s, SpectralField.zeros(g), FluidParams(), 10.0)


# ---------------------------------------------------------------- ledger and budget


def test_accumulate_trapezoid():
    r0 = dg.accumulate(None, row(0.0, 10.0, 2.0), 10.0)
    r1 = dg.accumulate(r0, row(0.5, 9.0, 2.0), 10.0)
    r2 = dg.accumulate(r1, row(1.0, 8.0, 0.0), 10.0)
    assert r0.cum_dissipation == 0 and r0.budget_residual == 0
    assert r1.cum_dissipation == pytest.approx(1.0)
    assert r2.cum_dissipation == pytest.approx(1.5)
    assert r2.budget_residual == pytest.approx(8.0 + 1.5 - 10.0)
    rep = dg.energy_budget([r0, r1, r2])
    assert rep.max_residual == pytest.approx(0.0) and rep.max_abs_residual == pytest.approx(0.5)
    assert rep.relative == pytest.approx(0.05)
    assert rep.dissipation_nondecreasing and rep.dissipation_nonnegative


def test_ledger_columns_and_row():
    assert dg.LEDGER_COLUMNS[:5] == ("t", "E_kin", "E_grad", "E_log", "E_total")
    g = Grid(16)
    p = FluidParams()
    idx = GalerkinIndices(4, 4)
    s = random_state(g, idx, np.random.default_rng(0))
    r = dg.ledger_row(s, b_rhs(s, p, idx), p, idx.n_cut, newton_iters=3)
    values = r.as_row()
    assert len(values) == len(dg.LEDGER_COLUMNS)
    assert values[dg.LEDGER_COLUMNS.index("newton_iters")] == 3
    assert r.b_min_obs == pytest.approx(np.min(s.b.values))
    assert r.div_v_max < 1e-12


def test_energy_budget_empty():
    with pytest.raises(ValueError):
        dg.energy_budget([])


# ---------------------------------------------------------------- min/max monitor


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_oversampling_is_exact_for_band_limited(seed):
    g = Grid(12)
    f = random_state(g, GalerkinIndices(4, 4), np.random.default_rng(seed)).b
    fine = dg.oversampled_values(f, 4)
    assert fine.shape == (48, 48)
    assert np.max(np.abs(fine[::4, ::4] - f.values)) < 1e-13
    X = np.arange(48) * g.L / 48
    XX, YY = np.meshgrid(X, X, indexing="ij")
    direct = np.zeros_like(XX)
    for (i, j), c in np.ndenumerate(f.coeffs):
        kx, ky = np.fft.fftfreq(12, 1 / 12)[[i, j]]
        direct += (c * np.exp(1j * (kx * XX + ky * YY))).real
    assert np.max(np.abs(fine - direct)) < 1e-12


def test_barrier_bounds_and_monitor():
    g = Grid(16)
    X, _ = g.coords
    b0 = SpectralField.from_physical(1.0 + 0.5 * np.cos(X), g)
    bounds = dg.barrier_bounds(b0)
    assert bounds.b_max == pytest.approx(1.5, abs=1e-12) and bounds.b_min == pytest.approx(0.5, abs=1e-12)
    inside = dg.minmax_monitor(State(VectorField.zeros(g), b0), bounds, 10.0)
    assert inside.violation_above == 0 and inside.violation_below == 0
    assert inside.barrier_integrals == (0.0, 0.0)
    out = dg.minmax_monitor(State(VectorField.zeros(g), b0 * 1.2), bounds, 10.0)
    assert out.violation_above == pytest.approx(0.3, abs=1e-12)
    assert out.barrier_integrals[0] > 0
    expected = g.quadrature(scalars.barrier_plus(10.0, bounds.b_max, (b0 * 1.2).values))
    assert out.barrier_integrals[0] == pytest.approx(expected)


# ---------------------------------------------------------------- weak residual


@settings(max_examples=10, deadline=None)
@given(seed=seeds)
def test_momentum_rhs_solves_weak_form(seed):
    g = Grid(24)
    idx = GalerkinIndices(7, 7)
    s = random_state(g, idx, np.random.default_rng(seed))
    p = FluidParams(rho=1.3, nu=0.07, sigma=0.2)
    vdot = momentum_rhs(s, p, idx)
    rng = np.random.default_rng(seed + 1)
    w = random_state(g, idx, rng).v
    terms = dg.momentum_weak_terms(s, vdot, p, w)
    assert abs(sum(terms)) <= 1e-12 * max(1.0, max(abs(t) for t in terms))
    assert dg.weak_residual_momentum(s, vdot, p, w) == pytest.approx(sum(terms), abs=1e-15)
    # a wrong time derivative leaves a residual
    assert abs(dg.weak_residual_momentum(s, vdot * 1.5, p, w)) > 1e-6 * abs(terms[0])


# ---------------------------------------------------------------- a priori monitor


def test_apriori_bounds_formulae():
    p = FluidParams(rho=2.0, nu=0.5, nu1=4.0, mu=1.0, sigma=0.25)
    area = 1.0
    rows = [row(0.0, 3.0, 0.0, e_kin=1.0, e_grad=0.5), row(2.0, 2.0, 0.0, e_kin=0.5, e_grad=0.25)]
    rep = dg.apriori_monitor(rows, p, area)
    excess = 3.0 - 0.5 + 1e-12 * 3.0
    assert rep.excess == pytest.approx(excess, rel=1e-15)
    assert rep.bounds["sup_v_L2"] == pytest.approx(math.sqrt(2 * excess / 2.0))
    assert rep.bounds["int_v_H1_sq"] == pytest.approx(2.0 * 2 * excess / 2.0 + excess / 0.5)
    assert rep.bounds["sup_grad_b_L2"] == pytest.approx(math.sqrt(2 * excess / 0.25))
    assert rep.bounds["int_relax_sq"] == pytest.approx(2 * excess / 4.0)
    assert rep.sup_v_L2 == pytest.approx(1.0)
    assert rep.ok


def test_apriori_flags_violation():
    p = FluidParams(rho=1.0, mu=1.0)
    rows = [row(0.0, 1.0, 0.0, e_kin=0.25), row(1.0, 1.0, 0.0, e_kin=5.0)]
    rep = dg.apriori_monitor(rows, p, 1.0)
    assert "sup_v_L2" in rep.flags and not rep.ok


def test_apriori_decoupled_has_no_gradient_bound():
    rep = dg.apriori_monitor([row(0.0, 1.0, 0.0)], FluidParams(sigma=0.0), 1.0)
    assert rep.bounds["sup_grad_b_L2"] == math.inf and rep.ok
