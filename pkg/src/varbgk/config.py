"""Run configuration: a nested JSON document parsed into typed pieces.

Example::

    {
      "flux": {"dim": 1, "poly": [[0.0, 0.0, 0.5]]},
      "grid": {"x_min": 0.0, "x_max": 2.0, "nx": 400, "eps": 0.05, "n_sub": 5},
      "solver": {"h": 1e-3, "cfl": 0.9, "t_end": 0.5, "snapshot_stride": 10,
                 "splitting": "lie", "boundary": "outflow"},
      "initial": {"type": "riemann", "rho_l": 1.0, "rho_r": 0.0, "x0": 0.5},
      "compare": {"type": "burgers_exact"},
      "output": "runs/shock"
    }

``grid.M`` defaults to ``1 + max rho0``; an explicit value must not be smaller.
``grid.nv`` may be given, but must then agree with ``eps / n_sub``.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bgk import SolverConfig
from .model import FluxSpec
from .phase_grid import PhaseGrid, read_macro_csv

OUTPUT_ROOT_ENV = "VARBGK_OUTPUT_ROOT"

INITIAL_TYPES = ("riemann", "gaussian", "sine", "csv")
COMPARE_TYPES = ("none", "burgers_exact", "godunov")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key}: missing")
    return section[key]


def _positive(value, name: str, integer: bool = False):
    try:
        value = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if not value > 0:
        raise ConfigError(f"{name}: must be positive, got {value}")
    return value


@dataclass
class RunConfig:
    raw: dict
    flux: FluxSpec
    grid: PhaseGrid
    solver: SolverConfig
    rho0: np.ndarray
    compare: dict
    output: Path
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def initial(self) -> dict:
        return self.raw["initial"]

    def manifest(self) -> dict:
        return {
            "config": self.raw,
            "grid": self.grid.to_dict(),
            "solver": self.solver.to_dict(),
            "flux": self.flux.to_dict()["flux"],
            "lipschitz_bound": self.flux.lipschitz_bound,
        }


def initial_density(desc: dict, x: np.ndarray, x_min: float, x_max: float, base_dir: Path) -> np.ndarray:
    kind = _need(desc, "type", "initial")
    if kind == "riemann":
        rl = float(_need(desc, "rho_l", "initial"))
        rr = float(_need(desc, "rho_r", "initial"))
        x0 = float(_need(desc, "x0", "initial"))
        return np.where(x < x0, rl, rr)
    if kind == "gaussian":
        amp = float(_need(desc, "amp", "initial"))
        c = float(_need(desc, "center", "initial"))
        w = _positive(_need(desc, "width", "initial"), "initial.width")
        return float(desc.get("base", 0.0)) + amp * np.exp(-(((x - c) / w) ** 2))
    if kind == "sine":
        mean = float(_need(desc, "mean", "initial"))
        amp = float(_need(desc, "amp", "initial"))
        periods = float(desc.get("periods", 1.0))
        return mean + amp * np.sin(2 * np.pi * periods * (x - x_min) / (x_max - x_min))
    if kind == "csv":
        path = Path(_need(desc, "path", "initial"))
        if not path.is_absolute():
            path = base_dir / path
        xs, rho = read_macro_csv(path)
        if rho.size != x.size:
            raise ConfigError(f"initial.path: {rho.size} rows but grid.nx = {x.size}")
        return rho
    raise ConfigError(f"initial.type: expected one of {INITIAL_TYPES}, got {kind!r}")


def parse_config(data: dict, base_dir: Path | None = None) -> RunConfig:
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    data = copy.deepcopy(data)
    for key in ("flux", "grid", "solver", "initial"):
        if not isinstance(data.get(key), dict):
            raise ConfigError(f"{key}: missing section")
    g, s = data["grid"], data["solver"]

    x_min = float(g.get("x_min", 0.0))
    x_max = float(_need(g, "x_max", "grid"))
    if not x_max > x_min:
        raise ConfigError("grid.x_max: must exceed grid.x_min")
    nx = _positive(_need(g, "nx", "grid"), "grid.nx", integer=True)
    eps = _positive(_need(g, "eps", "grid"), "grid.eps")
    n_sub = _positive(g.get("n_sub", 1), "grid.n_sub", integer=True)
    boundary = s.get("boundary", g.get("boundary", "periodic"))
    if boundary not in ("periodic", "outflow"):
        raise ConfigError(f"solver.boundary: expected 'periodic' or 'outflow', got {boundary!r}")

    x = x_min + (np.arange(nx) + 0.5) * (x_max - x_min) / nx
    rho0 = initial_density(data["initial"], x, x_min, x_max, base_dir)
    if not np.all(np.isfinite(rho0)) or rho0.min() < 0:
        raise ConfigError("initial: density must be finite and non-negative")
    m_floor = 1.0 + float(rho0.max())
    m_cap = float(g.get("M", m_floor))
    if m_cap < m_floor - 1e-12:
        raise ConfigError(f"grid.M: {m_cap} is below 1 + max rho0 = {m_floor}")

    if "nv" in g:
        nv = _positive(g["nv"], "grid.nv", integer=True)
        dv = m_cap / nv
        if abs(eps / dv - n_sub) > 1e-9 * n_sub:
            raise ConfigError(
                f"grid.n_sub: eps/dv = {eps / dv:.12g} with nv = {nv}, M = {m_cap}; "
                f"eps must be n_sub = {n_sub} velocity cells")
        try:
            grid = PhaseGrid(x_min, x_max, nx, m_cap, nv, eps, boundary)
        except ValueError as exc:
            raise ConfigError(f"grid.n_sub: {exc}") from None
    else:
        grid = PhaseGrid.build(x_min, x_max, nx, m_cap, eps, n_sub, boundary)

    try:
        flux = FluxSpec.from_dict(data["flux"], grid.m_cap)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"flux: {exc}") from None

    try:
        solver = SolverConfig(
            eps=eps,
            h=_positive(_need(s, "h", "solver"), "solver.h"),
            cfl=float(s.get("cfl", 0.9)),
            t_end=float(_need(s, "t_end", "solver")),
            snapshot_stride=int(s.get("snapshot_stride", 1)),
            boundary=boundary,
            splitting=s.get("splitting", "lie"),
            quadrature=s.get("quadrature", "exact"),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    compare = data.get("compare", {"type": "none"})
    if isinstance(compare, str):
        compare = {"type": compare}
    if compare.get("type", "none") not in COMPARE_TYPES:
        raise ConfigError(f"compare.type: expected one of {COMPARE_TYPES}")
    if compare.get("type") == "burgers_exact" and data["initial"]["type"] != "riemann":
        raise ConfigError("compare.type: burgers_exact needs riemann initial data")

    out = Path(data.get("output", "varbgk_out"))
    if not out.is_absolute():
        root = os.environ.get(OUTPUT_ROOT_ENV)
        out = (Path(root) if root else base_dir) / out
    return RunConfig(data, flux, grid, solver, rho0, compare, out, base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return parse_config(data, base_dir=path.parent)
