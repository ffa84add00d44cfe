"""Run orchestration, file outputs and convergence studies."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import diagnostics as dg
from .config import RunConfig, format_config
from .dynamics import MassSolveError, State, b_rhs
from .initial import make_initial_condition
from .oracles import logistic
from .snapshot import write_snapshot
from .spectral import Grid, SpectralField, VectorField
from .stepping import (
    BlowUpError,
    Forcing,
    RotheSolveError,
    RotheStepRecord,
    advance,
    semi_discrete_rhs,
)

__all__ = ["SimulationResult", "RunResult", "simulate", "run", "write_ledger_csv", "convergence_study",
           "ConvergenceTable", "embed_state", "state_distance"]


@dataclass
class SimulationResult:
    rows: list[dg.EnergyLedger]
    final_state: State
    bounds: object
    records: list[RotheStepRecord] = field(default_factory=list)
    max_violation_above: float = 0.0
    max_violation_below: float = 0.0
    max_gamma_plus: float = 0.0
    max_gamma_minus: float = 0.0
    min_entropy_density: float = math.inf
    failure: str | None = None
    failed_step: int | None = None
    steps_taken: int = 0

    @property
    def ok(self) -> bool:
        return self.failure is None


def _ledger_bdot(state: State, cfg: RunConfig, forcing: Forcing | None, k1):
    if k1 is not None:
        return k1[1]
    fb = forcing.b_at(state.time) if forcing is not None else None
    return b_rhs(state, cfg.params, cfg.indices, fb, tol=cfg.scheme.mass_solve_tol)


def simulate(cfg: RunConfig, state0: State | None = None, forcing: Forcing | None = None,
             on_step: Callable[[int, State], None] | None = None) -> SimulationResult:
    """Integrate from ``state0`` (or the configured preset) to ``t_end``, recording every step."""
    p, idx, scheme = cfg.params, cfg.indices, cfg.scheme
    state = make_initial_condition(cfg.ic, cfg.grid, idx) if state0 is None else state0
    bounds = dg.barrier_bounds(state.b)
    rk4 = scheme.stepper == "explicit_rk4"
    out = SimulationResult(rows=[], final_state=state, bounds=bounds)

    def observe(st: State, k1, iters: int):
        bdot = _ledger_bdot(st, cfg, forcing, k1)
        row = dg.ledger_row(st, bdot, p, idx.n_cut, iters)
        prev = out.rows[-1] if out.rows else None
        e0 = out.rows[0].E_total if out.rows else row.E_total
        dg.accumulate(prev, row, e0)
        out.rows.append(row)
        mm = dg.minmax_monitor(st, bounds, idx.n_cut)
        out.max_violation_above = max(out.max_violation_above, mm.violation_above)
        out.max_violation_below = max(out.max_violation_below, mm.violation_below)
        out.max_gamma_plus = max(out.max_gamma_plus, mm.barrier_integrals[0])
        out.max_gamma_minus = max(out.max_gamma_minus, mm.barrier_integrals[1])
        visc, relax = dg._dissipation_parts(st, bdot, p, idx.n_cut)
        out.min_entropy_density = min(out.min_entropy_density, float(np.min(visc + relax)))
        dg.thermo_report(st, bdot, p, idx.n_cut)

    try:
        k1 = semi_discrete_rhs(state, p, idx, forcing, scheme.mass_solve_tol) if rk4 else None
        observe(state, k1, 0)
        if on_step is not None:
            on_step(0, state)
        for step, h in enumerate(scheme.step_sizes(), start=1):
            new, record = advance(state, h, p, idx, scheme, forcing, step_index=step, k1=k1)
            state = new
            iters = 0
            if record is not None:
                out.records.append(record)
                iters = record.newton_iterations
            k1 = semi_discrete_rhs(state, p, idx, forcing, scheme.mass_solve_tol) if rk4 else None
            observe(state, k1, iters)
            out.steps_taken = step
            if on_step is not None:
                on_step(step, state)
    except (BlowUpError, RotheSolveError, MassSolveError, dg.EntropyProductionError) as exc:
        out.failure = f"{type(exc).__name__}: {exc}"
        out.failed_step = out.steps_taken + 1
    out.final_state = state
    return out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_ledger_csv(rows: Sequence[dg.EnergyLedger], path, every: int = 1) -> None:
    """Write rows ``0, every, 2 every, ...`` and always the last one, with 17 significant digits."""
    keep = [r for i, r in enumerate(rows) if i % every == 0]
    if rows and keep[-1] is not rows[-1]:
        keep.append(rows[-1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dg.LEDGER_COLUMNS)
        for r in keep:
            w.writerow([_fmt(x) for x in r.as_row()])


@dataclass
class RunResult:
    simulation: SimulationResult
    report: dict
    out_dir: Path | None

    @property
    def ok(self) -> bool:
        return bool(self.report["ok"])


def _snapshot_header(cfg: RunConfig, step: int) -> dict:
    h = {"step": str(step)}
    for key, value in cfg.flat().items():
        if key.startswith(("params.", "indices.")):
            h[key] = repr(value)
    return h


def build_report(cfg: RunConfig, sim: SimulationResult, forcing: Forcing | None = None) -> dict:
    """Final report: budget, a priori monitors, min/max excursions, Rothe statistics and invariant flags."""
    rows = sim.rows
    budget = dg.energy_budget(rows)
    apriori = dg.apriori_monitor(rows, cfg.params, cfg.grid.area)
    e0 = budget.initial_energy
    iters = [r.newton_iterations for r in sim.records]
    ident = [r.per_step_identity_residual for r in sim.records]
    div_scale = max(1.0, max(r.E_kin for r in rows))
    invariants = {
        "completed": sim.ok,
        "entropy_production_nonnegative": sim.min_entropy_density >= 0.0,
        "cum_dissipation_nondecreasing": budget.dissipation_nondecreasing and budget.dissipation_nonnegative,
        "energy_inequality": budget.max_residual <= cfg.budget_rtol * abs(e0),
        "apriori_bounds": apriori.ok,
        "solenoidal": max(r.div_v_max for r in rows) <= 1e-10 * math.sqrt(div_scale),
        "b_positive": not any(r.fault for r in rows),
    }
    if sim.records:
        invariants["rothe_identity"] = max(ident) <= 10.0 * cfg.scheme.newton_tol
    report = {
        "ok": all(invariants.values()),
        "invariants": invariants,
        "status": "completed" if sim.ok else "failed",
        "failure": sim.failure,
        "failed_step": sim.failed_step,
        "steps": sim.steps_taken,
        "final_time": sim.final_state.time,
        "forcing": forcing is not None,
        "budget": asdict(budget),
        "apriori": {
            "sup_v_L2": apriori.sup_v_L2,
            "int_v_H1_sq": apriori.int_v_H1_sq,
            "sup_grad_b_L2": apriori.sup_grad_b_L2,
            "int_relax_sq": apriori.int_relax_sq,
            "data_bound": apriori.data_bound,
            "excess": apriori.excess,
            "bounds": apriori.bounds,
            "flags": list(apriori.flags),
        },
        "barrier": {
            "b_max": sim.bounds.b_max,
            "b_min": sim.bounds.b_min,
            "max_violation_above": sim.max_violation_above,
            "max_violation_below": sim.max_violation_below,
            "max_gamma_plus": sim.max_gamma_plus,
            "max_gamma_minus": sim.max_gamma_minus,
        },
        "min_entropy_density": sim.min_entropy_density,
        "rothe": None if not sim.records else {
            "steps": len(iters),
            "newton_median": float(np.median(iters)),
            "newton_max": int(max(iters)),
            "picard_fallbacks": sum(r.used_picard for r in sim.records),
            "max_identity_residual": max(ident),
            "max_residual": max(r.residual_norm for r in sim.records),
        },
    }
    return report


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(cfg: RunConfig, out_dir=None, forcing: Forcing | None = None, plots: bool = True) -> RunResult:
    """Run a configuration end to end and write ``ledger.csv``, snapshots, ``manifest.txt``, ``report.json`` and plots.

    Partial outputs are kept when the stepper fails; the report then names the failing step.
    """
    out = Path(cfg.output.dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(format_config(cfg))
    snap_every = cfg.output.snapshot_every
    written: list[str] = []

    def on_step(step, state):
        if snap_every and step % snap_every == 0:
            name = f"snapshot_{step:07d}.vbsnap"
            (out / name).write_bytes(write_snapshot(state, _snapshot_header(cfg, step)))
            written.append(name)

    sim = simulate(cfg, forcing=forcing, on_step=on_step)
    final_name = f"snapshot_{sim.steps_taken:07d}.vbsnap"
    if final_name not in written:
        (out / final_name).write_bytes(write_snapshot(sim.final_state, _snapshot_header(cfg, sim.steps_taken)))
        written.append(final_name)
    write_ledger_csv(sim.rows, out / "ledger.csv", cfg.output.ledger_every)
    report = build_report(cfg, sim, forcing)
    report["snapshots"] = written
    if plots:
        from .plotting import emit_plots

        paths = emit_plots(out / "ledger.csv", out, bounds=(sim.bounds.b_min, sim.bounds.b_max))
        report["plots"] = [p.name for p in paths]
    (out / "report.json").write_text(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    return RunResult(sim, report, out)


# ---------------------------------------------------------------------------
# convergence studies


def embed_state(state: State, grid: Grid) -> State:
    """Same band-limited fields on another (larger or equal) grid, by wavenumber."""
    src = state.grid
    if grid.N < src.N or grid.L != src.L:
        raise ValueError("target grid must be at least as fine and share the box length")

    def emb(c):
        big = np.zeros((grid.N, grid.N), dtype=complex)
        pad = (grid.N - src.N) // 2
        big[pad:pad + src.N, pad:pad + src.N] = np.fft.fftshift(np.where(src.nyquist, 0.0, c))
        return np.fft.ifftshift(big)

    v = VectorField.from_coeffs(grid, emb(state.v.x.coeffs), emb(state.v.y.coeffs))
    return State(v, SpectralField(grid, emb(state.b.coeffs)), state.time)


def state_distance(a: State, b: State) -> float:
    """``(||v_a - v_b||^2 + ||b_a - b_b||^2)^(1/2)`` on the finer of the two grids."""
    grid = a.grid if a.grid.N >= b.grid.N else b.grid
    a, b = embed_state(a, grid), embed_state(b, grid)
    d = sum(np.sum(np.abs(x.coeffs - y.coeffs) ** 2) for x, y in
            ((a.v.x, b.v.x), (a.v.y, b.v.y), (a.b, b.b)))
    return float(np.sqrt(grid.area * d))


def _analytic_final(cfg: RunConfig, state0: State) -> State | None:
    """Exact final state for benchmarks that have one, else ``None``."""
    grid, p, t = cfg.grid, cfg.params, cfg.scheme.t_end
    if cfg.ic.preset == "uniform":
        c = logistic(cfg.ic.b0, p.mu / p.nu1, t)
        return State(VectorField.zeros(grid), SpectralField.constant(grid, float(c)), t)
    if cfg.ic.preset == "taylor_green" and p.sigma == 0.0 and cfg.ic.b0 == 1.0:
        decay = math.exp(-2.0 * p.nu * grid.scale**2 * t / p.rho)
        return State(state0.v * decay, state0.b, t)
    return None


@dataclass
class ConvergenceTable:
    axis: str
    levels: list
    errors: list
    orders: list
    reference: str
    gamma_plus: list
    violations: list
    flags: list

    @property
    def ok(self) -> bool:
        return not self.flags

    def format(self) -> str:
        head = f"{'level':>12} {'error':>14} {'order':>8} {'max_violation':>14} {'max_Gamma+':>12}"
        lines = [f"# axis={self.axis} reference={self.reference}", head]
        for i, lvl in enumerate(self.levels):
            order = "" if i == 0 or self.orders[i - 1] is None else f"{self.orders[i - 1]:8.3f}"
            err = "" if self.errors[i] is None else f"{self.errors[i]:14.6e}"
            lines.append(f"{lvl!s:>12} {err:>14} {order:>8} {self.violations[i]:14.6e} {self.gamma_plus[i]:12.4e}")
        for flag in self.flags:
            lines.append(f"# FLAG: {flag}")
        return "\n".join(lines)


_AXIS_KEYS = {"dt": "scheme.dt", "l_b": "indices.l_b", "n_v": "indices.n_v", "N": "grid.N"}


def convergence_study(base: RunConfig, axis: str, levels: Sequence, forcing_factory=None) -> ConvergenceTable:
    """Sweep one discretization parameter and report errors and observed orders.

    Errors are measured against the analytic final state when the benchmark has
    one (uniform logistic, decoupled Taylor-Green), otherwise against the finest
    level.  Orders are ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` with ``h = dt``
    on the time axis and ``h = 1/level`` on the resolution axes.  For the ``l_b``
    axis the min/max excursion and ``max_t int Gamma_+`` must be non-increasing.
    """
    if axis not in _AXIS_KEYS:
        raise ValueError(f"axis must be one of {tuple(_AXIS_KEYS)}, got {axis!r}")
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    levels = list(levels)
    cfgs = [base.replace({_AXIS_KEYS[axis]: lvl}) for lvl in levels]
    sims = []
    for c in cfgs:
        forcing = forcing_factory(c) if forcing_factory is not None else None
        sims.append(simulate(c, forcing=forcing))
    flags = [f"level {lvl}: {s.failure}" for lvl, s in zip(levels, sims) if not s.ok]
    state0 = make_initial_condition(base.ic, base.grid, base.indices)
    exact = _analytic_final(base, state0) if axis == "dt" else None
    if exact is not None:
        reference = "analytic"
        errors = [state_distance(s.final_state, exact) for s in sims]
    else:
        finest = int(np.argmin(levels)) if axis == "dt" else int(np.argmax(levels))
        reference = f"finest level ({levels[finest]})"
        errors = [None if i == finest else state_distance(s.final_state, sims[finest].final_state)
                  for i, s in enumerate(sims)]
    h = [float(l) if axis == "dt" else 1.0 / float(l) for l in levels]
    orders = []
    for i in range(len(levels) - 1):
        e0, e1 = errors[i], errors[i + 1]
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            orders.append(None)
        else:
            orders.append(math.log(e0 / e1) / math.log(h[i] / h[i + 1]))
    viol = [max(s.max_violation_above, s.max_violation_below) for s in sims]
    gam = [s.max_gamma_plus for s in sims]
    if reference == "analytic":
        for i in range(len(errors) - 1):
            if not errors[i + 1] < errors[i]:
                flags.append(f"non-monotone error between levels {levels[i]} and {levels[i + 1]}")
    if axis == "l_b":
        order = np.argsort(levels)
        for a, b in zip(order[:-1], order[1:]):
            if viol[b] > viol[a]:
                flags.append(f"min/max violation increased from l_b={levels[a]} to l_b={levels[b]}")
            if gam[b] > gam[a]:
                flags.append(f"max Gamma+ integral increased from l_b={levels[a]} to l_b={levels[b]}")
    return ConvergenceTable(axis, levels, errors, orders, reference, gam, viol, flags)
