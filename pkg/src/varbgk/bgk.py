"""Transport/relaxation splitting for the BGK model

    d_t f + A'(v) d_x f = (Pi_eps[f] - f) / h,    f(x, 0, v) = f0(x, v),

on a :class:`~varbgk.phase_grid.PhaseGrid`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .diagnostics import DiagnosticsRecord, RunMonitor
from .model import FluxSpec
from .phase_grid import KineticState
from .projection import ProjectionBatch, project_columns
from .transport import CFLError, band_speeds, courant, face_fluxes

__all__ = [
    "SolverConfig",
    "StepInfo",
    "NonFiniteStateError",
    "CFLError",
    "time_step",
    "transport_step",
    "relaxation_step",
    "step",
    "run",
]

SPLITTINGS = ("lie", "strang")


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step_index: int):
        super().__init__(f"non-finite values in f after step {step_index}")
        self.step_index = step_index


@dataclass
class SolverConfig:
    eps: float
    h: float
    cfl: float = 0.9
    t_end: float = 1.0
    snapshot_stride: int = 1
    boundary: str = "periodic"
    splitting: str = "lie"
    # time weight of the entropy-estimate accumulators: "exact" integrates the
    # exponential relaxation over the substep, "rectangle" uses dt
    quadrature: str = "exact"

    def __post_init__(self):
        if not (self.eps > 0 and self.h > 0):
            raise ValueError("eps and h must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}")
        if self.quadrature not in ("exact", "rectangle"):
            raise ValueError("quadrature must be 'exact' or 'rectangle'")

    def to_dict(self) -> dict:
        return asdict(self)


def time_step(flux: FluxSpec, grid, cfl: float) -> float:
    return cfl * grid.dx / max(flux.lipschitz_bound, 1e-12)


def transport_step(state: KineticState, flux: FluxSpec, dt: float) -> KineticState:
    """Upwind update of every velocity band; boundary inflow goes to ``influx``."""
    grid = state.grid
    speeds = band_speeds(flux, grid)
    if courant(speeds, dt, grid.dx) > 1.0 + 1e-12:
        raise CFLError(f"Courant number {courant(speeds, dt, grid.dx):.6g} exceeds 1")
    F = face_fluxes(state.f, speeds, grid.boundary)
    f = state.f - dt / grid.dx * (F[1:] - F[:-1])
    np.clip(f, 0.0, 1.0, out=f)
    influx = state.influx + dt * (F[0] - F[-1])
    return KineticState(grid, f, state.t + dt, influx)


def relaxation_step(state: KineticState, grid, dt: float, h: float):
    """Exact exponential relaxation towards the frozen projection.

    Returns the new state and the :class:`ProjectionBatch` used.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    proj = project_columns(state.f, grid)
    decay = math.exp(-dt / h)
    f = proj.pi + (state.f - proj.pi) * decay
    return KineticState(grid, f, state.t, state.influx.copy()), proj


@dataclass
class StepInfo:
    dt: float
    # (f before the substep, projection used, substep length)
    relaxations: list[tuple[np.ndarray, ProjectionBatch, float]] = field(default_factory=list)


def step(state: KineticState, flux: FluxSpec, config: SolverConfig, dt: float | None = None):
    """Advance by one split step; returns ``(state, StepInfo)``."""
    grid = state.grid
    if dt is None:
        dt = time_step(flux, grid, config.cfl)
    info = StepInfo(dt)
    t0 = state.t

    def relax(s, tau):
        new, proj = relaxation_step(s, grid, tau, config.h)
        info.relaxations.append((s.f, proj, tau))
        return new

    if config.splitting == "lie":
        state = relax(transport_step(state, flux, dt), dt)
    else:
        state = relax(state, dt / 2)
        state = transport_step(state, flux, dt)
        state = relax(state, dt / 2)
    state.t = t0 + dt
    return state, info


Sink = Callable[[KineticState, DiagnosticsRecord], None]


def run(initial: KineticState, flux: FluxSpec, config: SolverConfig,
        sinks: Iterable[Sink] = (), monitor: RunMonitor | None = None) -> KineticState:
    """Step from ``initial`` to ``config.t_end``.

    A snapshot (state copy plus :class:`DiagnosticsRecord`) is passed to every
    sink at t = 0, every ``snapshot_stride`` steps and at the final time.
    """
    grid = initial.grid
    if grid.boundary != config.boundary:
        raise ValueError(f"grid boundary {grid.boundary!r} differs from solver boundary {config.boundary!r}")
    if abs(grid.eps - config.eps) > 1e-12 * config.eps:
        raise ValueError(f"grid eps {grid.eps} differs from solver eps {config.eps}")
    sinks = list(sinks)
    dt = time_step(flux, grid, config.cfl)
    if monitor is None:
        monitor = RunMonitor(grid, flux, config.h, config.quadrature)

    def emit(s):
        rec = monitor.snapshot(s)
        for sink in sinks:
            sink(s.copy(), rec)

    state = initial.copy()
    emit(state)
    n_steps = math.ceil(config.t_end / dt - 1e-9) if config.t_end > 0 else 0
    for k in range(1, n_steps + 1):
        tau = min(dt, config.t_end - state.t) if k == n_steps else dt
        new, info = step(state, flux, config, tau)
        if not np.all(np.isfinite(new.f)):
            raise NonFiniteStateError(k)
        monitor.on_step(state, new, info)
        state = new
        if k % config.snapshot_stride == 0 or k == n_steps:
            emit(state)
    return state
