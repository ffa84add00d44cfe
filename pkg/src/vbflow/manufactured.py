"""Manufactured solutions: symbolic fields and the forcing that makes them exact.

The default solution on the ``2 pi`` box is

    b*(t, x, y) = exp(0.3 sin(x + y) cos t)                  (so 0.74 < b* < 1.35)
    v*          = (d psi / dy, -d psi / dx),  psi = 0.5 cos t exp(0.5 cos x) sin y

Neither field is band-limited, so Galerkin truncation errors decay
spectrally but never vanish.  The forcing terms follow by symbolic
differentiation of

    g_v = dv/dt + (v . grad) v - (nu/rho) Lap v + (sigma/rho) div(grad b (x) grad b)
    g_b = db/dt + v . grad b + (mu/nu1)(b^2 - b) - (2 sigma/nu1) b^2 Lap b

The pressure gradient is not needed because the momentum right-hand side
Leray-projects the forcing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp

from .dynamics import FluidParams, GalerkinIndices, State
from .spectral import Grid, SpectralField, VectorField
from .stepping import Forcing

__all__ = ["ManufacturedSolution"]

_t, _x, _y = sp.symbols("t x y", real=True)


@dataclass(frozen=True)
class ManufacturedSolution:
    params: FluidParams
    b_expr: sp.Expr = sp.exp(sp.Rational(3, 10) * sp.sin(_x + _y) * sp.cos(_t))
    psi_expr: sp.Expr = sp.Rational(1, 2) * sp.cos(_t) * sp.exp(sp.Rational(1, 2) * sp.cos(_x)) * sp.sin(_y)

    @cached_property
    def _symbolic(self):
        p = self.params
        rho, nu, nu1, mu, sigma = (sp.nsimplify(getattr(p, k)) for k in ("rho", "nu", "nu1", "mu", "sigma"))
        b = self.b_expr
        vx = sp.diff(self.psi_expr, _y)
        vy = -sp.diff(self.psi_expr, _x)
        lap = lambda f: sp.diff(f, _x, 2) + sp.diff(f, _y, 2)
        bx, by = sp.diff(b, _x), sp.diff(b, _y)
        kx = sp.diff(bx * bx, _x) + sp.diff(bx * by, _y)
        ky = sp.diff(bx * by, _x) + sp.diff(by * by, _y)
        adv = lambda f: vx * sp.diff(f, _x) + vy * sp.diff(f, _y)
        gvx = sp.diff(vx, _t) + adv(vx) - nu / rho * lap(vx) + sigma / rho * kx
        gvy = sp.diff(vy, _t) + adv(vy) - nu / rho * lap(vy) + sigma / rho * ky
        gb = sp.diff(b, _t) + adv(b) + mu / nu1 * (b**2 - b) - 2 * sigma / nu1 * b**2 * lap(b)
        f = lambda e: sp.lambdify((_t, _x, _y), e, "numpy", cse=True)
        return {"vx": f(vx), "vy": f(vy), "b": f(b), "gvx": f(gvx), "gvy": f(gvy), "gb": f(gb)}

    def _eval(self, name: str, grid: Grid, t: float) -> np.ndarray:
        X, Y = grid.coords
        out = self._symbolic[name](float(t), X, Y)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape).copy()

    def exact_state(self, grid: Grid, t: float) -> State:
        """The exact fields sampled on ``grid`` (no truncation)."""
        v = VectorField.from_physical(self._eval("vx", grid, t), self._eval("vy", grid, t), grid)
        return State(v, SpectralField.from_physical(self._eval("b", grid, t), grid), t)

    def initial_state(self, grid: Grid, idx: GalerkinIndices) -> State:
        """Galerkin projection of the exact fields at ``t = 0``."""
        s = self.exact_state(grid, 0.0)
        ball_v, ball_b = grid.ball(idx.n_v), grid.ball(idx.l_b)
        v = VectorField.from_coeffs(grid, np.where(ball_v, s.v.x.coeffs, 0.0), np.where(ball_v, s.v.y.coeffs, 0.0))
        return State(v, SpectralField(grid, np.where(ball_b, s.b.coeffs, 0.0)), 0.0)

    def forcing(self, grid: Grid) -> Forcing:
        def velocity(t):
            return VectorField.from_physical(self._eval("gvx", grid, t), self._eval("gvy", grid, t), grid)

        def scalar(t):
            return SpectralField.from_physical(self._eval("gb", grid, t), grid)

        return Forcing(velocity=velocity, scalar=scalar)
