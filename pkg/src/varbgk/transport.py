"""First-order upwind fluxes for the free-transport part of the kinetic equation."""

from __future__ import annotations

import numpy as np


class CFLError(ValueError):
    """Time step violates the Courant condition of the upwind scheme."""


def band_speeds(flux, grid) -> np.ndarray:
    """``A'(v_j)`` at velocity cell centres; one space dimension only."""
    if flux.dim != 1:
        raise NotImplementedError("transport is implemented for one space dimension")
    return flux.derivative(grid.v)[0]


def face_fluxes(f: np.ndarray, speeds: np.ndarray, boundary: str) -> np.ndarray:
    """Upwind fluxes on the ``nx + 1`` faces, shape ``(nx + 1, nv)``.

    Face ``k`` separates cells ``k - 1`` and ``k``.  Outflow boundaries use
    zero-gradient ghost cells, periodic ones wrap around.
    """
    if boundary == "periodic":
        left_ghost, right_ghost = f[-1:], f[:1]
    else:
        left_ghost, right_ghost = f[:1], f[-1:]
    ext = np.concatenate([left_ghost, f, right_ghost])
    pos, neg = np.maximum(speeds, 0.0), np.minimum(speeds, 0.0)
    return pos * ext[:-1] + neg * ext[1:]


def upwind_divergence(f: np.ndarray, speeds: np.ndarray, dx: float, boundary: str) -> np.ndarray:
    """Discrete ``A'(v) d_x f`` in conservative upwind form."""
    F = face_fluxes(f, speeds, boundary)
    return (F[1:] - F[:-1]) / dx


def courant(speeds: np.ndarray, dt: float, dx: float) -> float:
    return float(np.max(np.abs(speeds)) * dt / dx) if speeds.size else 0.0
