"""Uniform space x velocity grids, kinetic states and their moments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DomainError

__all__ = [
    "PhaseGrid",
    "KineticState",
    "macro_density",
    "gibbs_entropy",
    "from_macro",
    "write_kinetic_csv",
    "write_macro_csv",
    "read_macro_csv",
]

BOUNDARIES = ("periodic", "outflow")


@dataclass(frozen=True)
class PhaseGrid:
    """Cells ``[x_min, x_max] x [0, M]`` split into ``nx x nv`` equal cells.

    ``eps`` must be an integer multiple ``n_sub`` of the velocity width ``dv`` so
    that every step of the entropy ladder is a union of velocity cells.
    """

    x_min: float
    x_max: float
    nx: int
    m_cap: float
    nv: int
    eps: float
    boundary: str = "periodic"
    n_sub: int = field(init=False)

    def __post_init__(self):
        if self.nx < 1 or self.nv < 1:
            raise ValueError("nx and nv must be positive")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if not (self.m_cap > 0 and self.eps > 0):
            raise ValueError("M and eps must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        ratio = self.eps / self.dv
        n_sub = round(ratio)
        if n_sub < 1 or abs(ratio - n_sub) > 1e-9 * max(ratio, 1.0):
            raise ValueError(
                f"n_sub: eps/dv = {ratio:.12g} is not a positive integer "
                f"(eps={self.eps}, dv={self.dv})")
        object.__setattr__(self, "n_sub", int(n_sub))

    @classmethod
    def build(cls, x_min: float, x_max: float, nx: int, m_cap: float, eps: float,
              n_sub: int, boundary: str = "periodic") -> "PhaseGrid":
        """Grid with ``dv = eps / n_sub``; M is rounded up to a whole number of cells."""
        if n_sub < 1:
            raise ValueError("n_sub must be a positive integer")
        dv = eps / n_sub
        nv = max(1, math.ceil(m_cap / dv - 1e-9))
        return cls(x_min, x_max, nx, nv * dv, nv, eps, boundary)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dv(self) -> float:
        return self.m_cap / self.nv

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return (np.arange(self.nv) + 0.5) * self.dv

    @property
    def v_edges(self) -> np.ndarray:
        return np.arange(self.nv + 1) * self.dv

    @property
    def ladder(self) -> np.ndarray:
        """Entropy-ladder value ``k`` of every velocity cell (``floor(v/eps) + 1``)."""
        return np.arange(self.nv) // self.n_sub + 1

    def same_as(self, other: "PhaseGrid") -> bool:
        return (self.nx, self.nv, self.n_sub, self.boundary) == (other.nx, other.nv, other.n_sub, other.boundary) \
            and np.allclose([self.x_min, self.x_max, self.m_cap], [other.x_min, other.x_max, other.m_cap])

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "nx": self.nx, "M": self.m_cap,
                "nv": self.nv, "eps": self.eps, "n_sub": self.n_sub, "dx": self.dx,
                "dv": self.dv, "boundary": self.boundary}


@dataclass
class KineticState:
    grid: PhaseGrid
    f: np.ndarray
    t: float = 0.0
    # cumulative net inflow through the x-boundaries, per velocity band
    influx: np.ndarray | None = None

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.grid.nx, self.grid.nv):
            raise ValueError(f"f has shape {self.f.shape}, grid wants {(self.grid.nx, self.grid.nv)}")
        if self.influx is None:
            self.influx = np.zeros(self.grid.nv)

    def copy(self) -> "KineticState":
        return KineticState(self.grid, self.f.copy(), self.t, self.influx.copy())

    def in_box(self, tol: float = 0.0) -> bool:
        return bool(self.f.min() >= -tol and self.f.max() <= 1.0 + tol)

    @property
    def total_mass(self) -> float:
        return float(self.f.sum() * self.grid.dv * self.grid.dx)


def macro_density(state: KineticState) -> np.ndarray:
    return state.f.sum(axis=1) * state.grid.dv


def gibbs_entropy(state: KineticState) -> np.ndarray:
    """Midpoint-rule ``int v f dv`` per space cell."""
    return state.f @ state.grid.v * state.grid.dv


def equilibrium_columns(grid: PhaseGrid, rho) -> np.ndarray:
    cells = np.asarray(rho, dtype=float) / grid.dv
    return np.clip(cells[..., None] - np.arange(grid.nv), 0.0, 1.0)


def from_macro(grid: PhaseGrid, rho, t: float = 0.0) -> KineticState:
    """Equilibrium state: indicator of ``[0, rho_i]`` with a fractional straddling cell."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.nx,):
        raise ValueError(f"rho must have length nx = {grid.nx}")
    tol = 1e-12 * grid.m_cap
    if rho.min() < -tol or rho.max() > grid.m_cap + tol:
        raise DomainError(f"rho outside [0, M={grid.m_cap}]: range [{rho.min()}, {rho.max()}]")
    return KineticState(grid, equilibrium_columns(grid, np.clip(rho, 0.0, grid.m_cap)), t)


def write_kinetic_csv(state: KineticState, path) -> None:
    g = state.grid
    xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "v", "f"])
        w.writerows(zip(*(map(repr, a.ravel().tolist()) for a in (xx, vv, state.f))))


def write_macro_csv(x, rho, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho"])
        w.writerows(zip(map(repr, map(float, x)), map(repr, map(float, rho))))


def read_macro_csv(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "rho"}:
        raise ValueError(f"{path}: expected header 'x,rho'")
    x = np.array([float(r["x"]) for r in rows])
    rho = np.array([float(r["rho"]) for r in rows])
    return x, rho
