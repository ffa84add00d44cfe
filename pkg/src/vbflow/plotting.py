"""Deterministic SVG line plots of a ledger CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import LEDGER_COLUMNS  # noqa: E402

__all__ = ["read_ledger", "emit_plots", "LedgerFormatError"]

_RC = {
    "svg.hashsalt": "vbflow",
    "svg.fonttype": "path",
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
}


class LedgerFormatError(ValueError):
    """Missing, empty or malformed ledger."""


def read_ledger(path) -> dict[str, np.ndarray]:
    """Columns of a ledger CSV as float arrays (``inf`` and ``nan`` accepted)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LedgerFormatError(f"{path}: empty ledger") from None
        if tuple(header) != LEDGER_COLUMNS:
            raise LedgerFormatError(f"{path}: unexpected columns {header}")
        rows = [r for r in reader if r]
    if not rows:
        raise LedgerFormatError(f"{path}: ledger has no data rows")
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise LedgerFormatError(f"{path}: {exc}") from None
    if data.shape[1] != len(LEDGER_COLUMNS):
        raise LedgerFormatError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(LEDGER_COLUMNS)}


def _annotate_faults(ax, t, fault):
    for tf in t[fault]:
        ax.axvline(tf, color="red", lw=0.8, ls=":")
    if np.any(fault):
        ax.annotate(f"fault at t={t[fault][0]:.6g} (b <= 0)", xy=(t[fault][0], 0.5),
                    xycoords=("data", "axes fraction"), color="red", fontsize=8)


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plots(ledger_path, out_dir=None, bounds: tuple[float, float] | None = None) -> list[Path]:
    """Write ``energy.svg``, ``budget.svg`` and ``minmax.svg`` next to the ledger (or in ``out_dir``).

    ``bounds = (b_min, b_max)`` draws the barrier lines; when omitted they are
    taken from the first ledger row as ``min(1, b_min_obs)`` and ``max(1, b_max_obs)``.
    """
    cols = read_ledger(ledger_path)
    out = Path(out_dir) if out_dir is not None else Path(ledger_path).parent
    out.mkdir(parents=True, exist_ok=True)
    t = cols["t"]
    fault = ~np.isfinite(cols["E_log"])
    if bounds is None:
        bounds = (min(1.0, cols["b_min_obs"][0]), max(1.0, cols["b_max_obs"][0]))
    paths = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name in ("E_kin", "E_grad", "E_log", "E_total", "cum_dissipation"):
            y = np.where(np.isfinite(cols[name]), cols[name], np.nan)
            ax.plot(t, y, label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        ax.legend(fontsize=8)
        _annotate_faults(ax, t, fault)
        paths.append(out / "energy.svg")
        _save(fig, paths[-1])

        fig, ax = plt.subplots()
        ax.plot(t, np.where(np.isfinite(cols["budget_residual"]), cols["budget_residual"], np.nan),
                label="E_total + cum_dissipation - E_total(0)")
        ax.set_xlabel("t")
        ax.set_ylabel("budget residual")
        ax.legend(fontsize=8)
        _annotate_faults(ax, t, fault)
        paths.append(out / "budget.svg")
        _save(fig, paths[-1])

        fig, ax = plt.subplots()
        ax.plot(t, cols["b_min_obs"], label="min b")
        ax.plot(t, cols["b_max_obs"], label="max b")
        ax.axhline(bounds[0], color="k", ls="--", lw=0.8, label=f"b_min = {bounds[0]:.6g}")
        ax.axhline(bounds[1], color="k", ls="-.", lw=0.8, label=f"b_max = {bounds[1]:.6g}")
        ax.set_xlabel("t")
        ax.set_ylabel("b")
        ax.legend(fontsize=8)
        _annotate_faults(ax, t, fault)
        paths.append(out / "minmax.svg")
        _save(fig, paths[-1])
    return paths
