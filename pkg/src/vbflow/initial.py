"""Initial-condition presets.

All presets are band-limited, so the Galerkin projections are exact:

``equilibrium``
    ``v = 0``, ``b = 1``.
``uniform``
    ``v = 0``, ``b = b0``.
``taylor_green``
    ``v = amplitude (sin x cos y, -cos x sin y)`` (in units of ``2 pi / L``), ``b = b0``.
``perturbed``
    ``b = 1 + b_amp * phi`` with ``phi`` a random trigonometric polynomial of
    degree ``k_max`` normalized so that ``|phi| <= 1``; hence ``b`` stays in
    ``[1 - b_amp, 1 + b_amp]`` for any ``b_amp < 1``.  ``v`` is the curl of a
    second random stream function, scaled so that ``max |v| = v_amp`` on the grid.
"""

from __future__ import annotations

import numpy as np

from .dynamics import GalerkinIndices, State
from .spectral import Grid, SpectralField, VectorField

__all__ = ["make_initial_condition", "random_trig_polynomial"]


def random_trig_polynomial(grid: Grid, k_max: int, rng: np.random.Generator, decay: float = 1.0) -> np.ndarray:
    """Coefficients of a real zero-mean trigonometric polynomial with ``sum |coeff| == 1``.

    Amplitudes decay like ``(1 + |k|^2)^(-decay)``; phases are uniform.
    """
    KX, KY = grid.wavenumbers
    c = np.zeros((grid.N, grid.N), dtype=complex)
    # one representative per +-k pair: kx > 0, or kx == 0 and ky > 0
    for kx in range(0, k_max + 1):
        for ky in range(-k_max, k_max + 1):
            if kx == 0 and ky <= 0:
                continue
            amp = (1.0 + kx * kx + ky * ky) ** (-decay) * rng.uniform(0.5, 1.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            z = amp * np.exp(1j * phase)
            c[kx % grid.N, ky % grid.N] = z
            c[-kx % grid.N, -ky % grid.N] = np.conj(z)
    total = np.sum(np.abs(c))
    return c / total


def _check_positive(b: SpectralField) -> None:
    bmin = float(np.min(b.values))
    if not bmin > 0:
        raise ValueError(f"initial b must be strictly positive on the grid after truncation, min is {bmin!r}")


def make_initial_condition(ic, grid: Grid, indices: GalerkinIndices, seed: int | None = None) -> State:
    """Build the projected initial state for an :class:`~vbflow.config.InitialCondition`."""
    preset = ic.preset
    seed = ic.seed if seed is None else seed
    X, Y = grid.coords
    s = grid.scale
    zero = VectorField.zeros(grid)
    if preset == "equilibrium":
        state = State(zero, SpectralField.constant(grid, 1.0))
    elif preset == "uniform":
        state = State(zero, SpectralField.constant(grid, float(ic.b0)))
    elif preset == "taylor_green":
        a = float(ic.amplitude)
        v = VectorField.from_physical(a * np.sin(s * X) * np.cos(s * Y), -a * np.cos(s * X) * np.sin(s * Y), grid)
        state = State(v, SpectralField.constant(grid, float(ic.b0)))
    elif preset == "perturbed":
        rng = np.random.default_rng(seed)
        k_max = int(ic.k_max)
        phi = random_trig_polynomial(grid, k_max, rng)
        bc = float(ic.b_amp) * phi
        bc[0, 0] += 1.0
        psi = random_trig_polynomial(grid, k_max, rng)
        dx, dy = grid._derivative_multipliers
        vx, vy = dy * psi, -dx * psi
        vmax = float(np.max(np.hypot(grid.inverse(vx), grid.inverse(vy))))
        factor = float(ic.v_amp) / vmax if vmax > 0 else 0.0
        state = State(VectorField.from_coeffs(grid, factor * vx, factor * vy), SpectralField(grid, bc))
    else:
        raise ValueError(f"unknown preset {preset!r}")
    b = SpectralField(grid, np.where(grid.ball(indices.l_b), state.b.coeffs, 0.0))
    ball = grid.ball(indices.n_v)
    v = VectorField.from_coeffs(grid, np.where(ball, state.v.x.coeffs, 0.0), np.where(ball, state.v.y.coeffs, 0.0))
    _check_positive(b)
    return State(v, b, 0.0)
