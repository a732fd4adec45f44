"""Entropy-solution references: exact Burgers Riemann fans/shocks and a
first-order Engquist-Osher finite-volume scheme for polynomial fluxes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import DomainError, FluxSpec
from .transport import CFLError

__all__ = [
    "MacroField",
    "burgers_riemann_exact",
    "engquist_osher_flux",
    "godunov_run",
    "l1_distance",
]


@dataclass
class MacroField:
    x_min: float
    x_max: float
    rho: np.ndarray
    t: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)

    @property
    def nx(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def restrict(self, factor: int) -> "MacroField":
        """Cell averages on a grid ``factor`` times coarser."""
        if self.nx % factor:
            raise ValueError(f"nx = {self.nx} not divisible by {factor}")
        return replace(self, rho=self.rho.reshape(-1, factor).mean(axis=1))


def burgers_riemann_exact(rho_l: float, rho_r: float, x0: float, x, t: float):
    """Entropy solution of ``rho_t + (rho^2/2)_x = 0`` with a jump at ``x0``."""
    if t <= 0:
        raise DomainError("t must be positive")
    if rho_l < 0 or rho_r < 0:
        raise DomainError("states must be non-negative")
    xi = (np.asarray(x, dtype=float) - x0) / t
    if rho_l > rho_r:
        s = 0.5 * (rho_l + rho_r)
        out = np.where(xi < s, rho_l, rho_r)
    else:
        out = np.where(xi <= rho_l, rho_l, np.where(xi >= rho_r, rho_r, xi))
    return float(out) if np.ndim(out) == 0 else out


def engquist_osher_flux(flux: FluxSpec, u_left, u_right, hi: float | None = None):
    """``A(0) + int_0^{u_l} max(A', 0) + int_0^{u_r} min(A', 0)``; first component."""
    comp = flux.components[0]
    if hi is None:
        hi = float(max(np.max(u_left), np.max(u_right)))
    plus, _ = comp.monotone_parts(u_left, hi)
    _, minus = comp.monotone_parts(u_right, hi)
    return comp.value(0.0) + plus + minus


def _speed_bound(flux: FluxSpec, hi: float) -> float:
    return FluxSpec(flux.components, max(hi, 1e-12)).lipschitz_bound


def godunov_run(flux: FluxSpec, initial: MacroField, t_end: float, cfl: float = 0.9) -> MacroField:
    """Conservative first-order update with the Engquist-Osher flux."""
    if not 0 < cfl <= 1:
        raise CFLError(f"cfl = {cfl} outside (0, 1]")
    if flux.dim != 1:
        raise NotImplementedError("one space dimension only")
    rho = initial.rho.copy()
    if rho.min() < 0:
        raise DomainError("reference solver expects non-negative data")
    hi = float(rho.max())
    dx = initial.dx
    dt = cfl * dx / max(_speed_bound(flux, hi), 1e-12)
    t = initial.t
    n_steps = math.ceil((t_end - t) / dt - 1e-9) if t_end > t else 0
    for k in range(n_steps):
        tau = min(dt, t_end - t)
        if initial.boundary == "periodic":
            ext = np.concatenate([rho[-1:], rho, rho[:1]])
        else:
            ext = np.concatenate([rho[:1], rho, rho[-1:]])
        F = engquist_osher_flux(flux, ext[:-1], ext[1:], hi)
        rho = rho - tau / dx * (F[1:] - F[:-1])
        t += tau
    return replace(initial, rho=rho, t=t)


def l1_distance(a: MacroField, b: MacroField) -> float:
    if a.nx != b.nx or not np.allclose([a.x_min, a.x_max], [b.x_min, b.x_max]):
        raise ValueError("fields live on different grids")
    return float(np.abs(a.rho - b.rho).sum() * a.dx)
