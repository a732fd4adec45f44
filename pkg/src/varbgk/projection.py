"""Entropy ladder, equilibrium and variational projections.

The ladder ``eta_eps(v) = k`` on ``[(k-1) eps, k eps)`` is a non-decreasing
staircase approximation of ``eta(v) = v``.  Minimising ``int eta_eps f dv``
under ``f in [0, 1]`` and fixed mass fills every ladder step below ``N eps``
(``N = floor(rho / eps)``) and leaves the placement of the remaining mass
``rho - N eps`` inside the partial step ``[N eps, (N+1) eps]`` free.  The
variational projection uses that freedom to keep the profile of ``f`` on the
partial step.

All column routines work in *cell units* (mass divided by ``dv``) so that the
ladder bookkeeping is integer arithmetic on cell indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import DomainError
from .phase_grid import PhaseGrid, equilibrium_columns

__all__ = [
    "EntropyLadder",
    "ProjectionResult",
    "ProjectionBatch",
    "eta_eps",
    "equilibrium_projection",
    "lemma1_min_value",
    "brute_force_min",
    "variational_projection",
    "project_columns",
    "closed_form_projection",
    "lemma2_check",
    "convex_family",
    "gibbs_inequality_check",
    "ladder_moment",
]

# |partial-step mass - remaining mass| below this (in cells) counts as a tie,
# and the column is kept unchanged on the partial step
_TIE_CELLS = 1e-12


@dataclass(frozen=True)
class EntropyLadder:
    eps: float
    m_cap: float

    def __post_init__(self):
        if not (self.eps > 0 and self.m_cap > 0):
            raise DomainError("eps and M must be positive")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.m_cap / self.eps - 1e-12)

    @property
    def values(self) -> np.ndarray:
        return np.arange(1, self.n_steps + 1)

    @property
    def last_width(self) -> float:
        return self.m_cap - (self.n_steps - 1) * self.eps

    def __call__(self, v) -> np.ndarray:
        return np.floor(np.asarray(v, dtype=float) / self.eps).astype(int) + 1


def eta_eps(ladder: EntropyLadder, v: float) -> int:
    if not 0.0 <= v < ladder.m_cap:
        raise DomainError(f"v = {v} outside [0, {ladder.m_cap})")
    return int(ladder(v))


def equilibrium_projection(f_col, grid: PhaseGrid) -> np.ndarray:
    """Indicator of ``[0, rho]`` carrying the same mass as ``f_col`` (works row-wise)."""
    f_col = np.asarray(f_col, dtype=float)
    return equilibrium_columns(grid, f_col.sum(axis=-1) * grid.dv)


def lemma1_min_value(rho: float, eps: float, convention: str = "published") -> float:
    """Minimum of the ladder moment at mass ``rho``.

    ``convention`` selects the constant:

    * ``"published"``  ``eps * sum_{k<N} k + eps * N * (rho - N eps)`` (0 if N = 0),
      the closed form as published;
    * ``"ladder"`` the exact minimum for the staircase ``eta = k`` on
      ``[(k-1) eps, k eps)``: ``eps N (N+1)/2 + (N+1)(rho - N eps)``;
    * ``"floor"``  the exact minimum for ``eta = floor(v/eps)``:
      ``eps N (N-1)/2 + N (rho - N eps)``.

    The three differ by additive shifts of the staircase, which leave the set
    of minimisers unchanged.
    """
    if rho < 0 or eps <= 0:
        raise DomainError("need rho >= 0 and eps > 0")
    n = math.floor(rho / eps)
    rem = rho - n * eps
    if convention == "published":
        return 0.0 if n == 0 else eps * n * (n - 1) / 2 + eps * n * rem
    if convention == "ladder":
        return eps * n * (n + 1) / 2 + (n + 1) * rem
    if convention == "floor":
        return eps * n * (n - 1) / 2 + n * rem
    raise ValueError(f"unknown convention {convention!r}")


def ladder_moment(f_col, grid: PhaseGrid) -> np.ndarray:
    """``int eta_eps f dv`` per column."""
    return np.asarray(f_col) @ grid.ladder * grid.dv


def brute_force_min(rho: float, ladder: EntropyLadder, grid: PhaseGrid):
    """Greedy fill of velocity cells in ascending ladder order.

    The objective is linear with separable box constraints, so filling the
    cheapest cells first is optimal.  Returns ``(value, minimiser)``.
    """
    if rho < 0 or rho > grid.m_cap * (1 + 1e-12):
        raise DomainError(f"infeasible mass {rho} for M = {grid.m_cap}")
    cost = ladder(grid.v)
    order = np.argsort(cost, kind="stable")
    f = np.zeros(grid.nv)
    left = rho / grid.dv
    for j in order:
        if left <= 0:
            break
        take = min(1.0, left)
        f[j] = take
        left -= take
    return float(np.sum(cost * f) * grid.dv), f


@dataclass
class ProjectionResult:
    pi: np.ndarray
    n_steps: int
    v0: float
    dominated: bool
    mass_defect: float
    rho: float = 0.0

    def to_dict(self) -> dict:
        return {"rho": self.rho, "N": self.n_steps, "v0": self.v0,
                "dominated": self.dominated, "mass_defect": self.mass_defect}


@dataclass
class ProjectionBatch:
    """Projections of every column of a state, as arrays."""

    pi: np.ndarray
    n_steps: np.ndarray
    v0: np.ndarray
    dominated: np.ndarray
    mass_defect: np.ndarray
    rho: np.ndarray

    def __len__(self):
        return len(self.n_steps)

    def __getitem__(self, i) -> ProjectionResult:
        return ProjectionResult(self.pi[i], int(self.n_steps[i]), float(self.v0[i]),
                                bool(self.dominated[i]), float(self.mass_defect[i]),
                                float(self.rho[i]))


def project_columns(F, grid: PhaseGrid) -> ProjectionBatch:
    """Variational projection of every row of ``F`` (shape ``(n, nv)``)."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n, nv = F.shape
    ns = grid.n_sub
    rows = np.arange(n)[:, None]
    lsub = np.arange(ns)

    m = F.sum(axis=1)
    # non-finite columns are caught by the caller; keep the cast quiet
    N = np.floor(np.nan_to_num(m / ns, nan=0.0, posinf=0.0)).astype(np.int64)
    start = np.minimum(N * ns, nv)
    idx = start[:, None] + lsub
    valid = idx < nv
    part = np.where(valid, F[rows, np.minimum(idx, nv - 1)], 0.0)
    width = valid.sum(axis=1)
    rem = np.clip(m - N * ns, 0.0, width)
    s = part.sum(axis=1)

    tie = np.abs(s - rem) <= _TIE_CELLS * max(ns, 1)
    fill = (s < rem) & ~tie

    # (a) Pi = max(f, indicator of [N eps, N eps + w]) with w fixed by mass.
    # G[l] is the partial-step mass when cells 0..l-1 are raised to 1; it is
    # non-decreasing in l, so the cell holding the end of the fill band is the
    # number of l >= 1 with G[l] < rem.
    suffix = np.cumsum(part[:, ::-1], axis=1)[:, ::-1]
    G = lsub + suffix
    lstar = np.sum((G[:, 1:] < rem[:, None]) & valid[:, 1:], axis=1)
    above = np.where(lstar + 1 < ns, suffix[np.arange(n), np.minimum(lstar + 1, ns - 1)], 0.0)
    p_star = part[np.arange(n), lstar]
    theta = np.clip(rem - lstar - above, p_star, 1.0)
    pa = np.where(lsub < lstar[:, None], 1.0, np.where(lsub == lstar[:, None], theta[:, None], part))
    v0 = np.where(fill, (lstar + np.where(theta > p_star, theta, 0.0)) * grid.dv, 0.0)

    # (b) partial-step mass exceeds what is left: keep the lowest-v mass
    before = np.cumsum(part, axis=1) - part
    pb = np.clip(rem[:, None] - before, 0.0, part)

    new_part = np.where(tie[:, None], part, np.where(fill[:, None], pa, pb))
    pi = (np.arange(nv) < start[:, None]).astype(float)
    pi[np.broadcast_to(rows, idx.shape)[valid], idx[valid]] = new_part[valid]

    mass_defect = np.abs(pi.sum(axis=1) - m) * grid.dv
    return ProjectionBatch(pi, N, v0, fill | tie, mass_defect, m * grid.dv)


def variational_projection(f_col, grid: PhaseGrid) -> ProjectionResult:
    f_col = np.asarray(f_col, dtype=float)
    if f_col.shape != (grid.nv,):
        raise ValueError(f"column must have length nv = {grid.nv}")
    return project_columns(f_col[None, :], grid)[0]


def closed_form_projection(f_col, grid: PhaseGrid) -> tuple[np.ndarray, float]:
    """Published closed form: ``1`` on ``[0, N eps + v0]``, ``f`` on the rest of
    the partial step, ``0`` above, with
    ``v0 = max(0, int_0^{N eps} f + int_{(N+1) eps}^M f - N eps)``.

    Kept for comparison only; it need not conserve mass.
    """
    f_col = np.asarray(f_col, dtype=float)
    ns, dv = grid.n_sub, grid.dv
    m = f_col.sum()
    n = int(math.floor(m / ns))
    lo, hi = min(n * ns, grid.nv), min((n + 1) * ns, grid.nv)
    outside = f_col[:lo].sum() + f_col[hi:].sum()
    v0 = max(0.0, (outside - n * ns) * dv)
    cut = lo + v0 / dv
    j = np.arange(grid.nv)
    ones = np.clip(cut - j, 0.0, 1.0)
    pi = np.where(j < lo, 1.0, np.where(j < hi, ones + (1.0 - ones) * f_col, 0.0))
    return pi, v0


def _same_mass(a, b, grid, rtol=1e-10):
    ma, mb = np.sum(a) * grid.dv, np.sum(b) * grid.dv
    if abs(ma - mb) > rtol * max(abs(ma), abs(mb), grid.dv):
        raise ValueError(f"columns carry different mass: {ma} vs {mb}")


def lemma2_check(f_col, pi_col, ladder: EntropyLadder, grid: PhaseGrid, tol: float = 1e-10):
    """``int |f - pi| <= (3/eps) int eta_eps (f - pi)``; returns ``(lhs, rhs, holds)``."""
    f_col, pi_col = np.asarray(f_col, float), np.asarray(pi_col, float)
    _same_mass(f_col, pi_col, grid)
    diff = f_col - pi_col
    lhs = float(np.abs(diff).sum() * grid.dv)
    rhs = float(3.0 / ladder.eps * np.sum(ladder(grid.v) * diff) * grid.dv)
    return lhs, rhs, lhs <= rhs + tol


def convex_family(grid: PhaseGrid) -> list[tuple[str, Callable]]:
    out = [("v", lambda v: v), ("v^2", lambda v: v * v)]
    for c in (grid.eps, grid.m_cap / 2, grid.m_cap - grid.eps):
        out.append((f"|v-{c:g}|", lambda v, c=c: np.abs(v - c)))
    return out


def gibbs_inequality_check(f_col, pi_col, grid: PhaseGrid,
                           eta_samples: Sequence[Callable] | None = None,
                           detail: bool = False):
    """Minimum over the convex sample family of ``int eta (f - pi) dv``.

    With ``detail=True`` the per-function values are returned as a dict.
    """
    diff = np.asarray(f_col, float) - np.asarray(pi_col, float)
    if eta_samples is None:
        named = convex_family(grid)
    else:
        named = [(getattr(e, "__name__", f"eta{i}"), e) for i, e in enumerate(eta_samples)]
    values = {name: float(np.sum(eta(grid.v) * diff) * grid.dv) for name, eta in named}
    if detail:
        return values
    return min(values.values())
