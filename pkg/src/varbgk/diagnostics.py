"""Runtime checks of the structure of BGK solutions.

Everything here is a pure function of kinetic columns or snapshots, except
:class:`RunMonitor`, which accumulates the time integrals of the entropy
estimates while a run is in progress.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .model import FluxSpec
from .phase_grid import KineticState, PhaseGrid, equilibrium_columns
from .projection import ProjectionBatch
from .transport import band_speeds, upwind_divergence

__all__ = [
    "DegeneracyError",
    "DiagnosticsRecord",
    "DeviationBound",
    "EntropyInequality",
    "MeasureDecomposition",
    "RunMonitor",
    "deviation",
    "deviation_p3",
    "deviation_bound_check",
    "entropy_estimates_update",
    "kinetic_entropy_inequality_check",
    "entropy_content",
    "entropy_inequality_from_series",
    "defect_measure",
    "perturbed_flux_check",
    "extend_flux_derivative",
    "extension_values",
    "measure_decomposition",
    "summarize",
]

# columns lighter than this many cells are treated as empty
_EMPTY_CELLS = 1e-14
GRAM_COND_MAX = 1e8


class DegeneracyError(ValueError):
    pass


def _moments(F, grid):
    F = np.asarray(F, dtype=float)
    rho = F.sum(axis=-1) * grid.dv
    eq = equilibrium_columns(grid, rho)
    first = (F - eq) @ grid.v * grid.dv
    return rho, eq, first


def deviation(f_col, grid: PhaseGrid):
    """``int v (f - Pi_eq) dv / int f dv``; zero for empty columns."""
    rho, _, first = _moments(f_col, grid)
    empty = rho <= _EMPTY_CELLS * grid.dv
    out = np.where(empty, 0.0, first / np.where(empty, 1.0, rho))
    return float(out) if np.ndim(out) == 0 else out


def deviation_p3(f_col, grid: PhaseGrid):
    """Relative form ``int v (f - Pi_eq) dv / int v f dv``."""
    F = np.asarray(f_col, dtype=float)
    _, _, first = _moments(F, grid)
    gibbs = F @ grid.v * grid.dv
    empty = gibbs <= 0.0
    out = np.where(empty, 0.0, first / np.where(empty, 1.0, gibbs))
    return float(out) if np.ndim(out) == 0 else out


class DeviationBound(NamedTuple):
    lhs: float
    rhs_moment: float  # 4 eps int v f
    rhs_mass: float  # 4 eps int f
    holds: bool

    @property
    def rhs(self) -> float:
        return max(self.rhs_moment, self.rhs_mass)


def deviation_bound_check(f_col, grid: PhaseGrid, eps: float, tol: float = 1e-12) -> DeviationBound:
    """Both published right-hand sides are computed; ``holds`` uses the larger."""
    f_col = np.asarray(f_col, dtype=float)
    rho, _, first = _moments(f_col, grid)
    gibbs = float(f_col @ grid.v * grid.dv)
    rhs_m, rhs_f = 4 * eps * gibbs, 4 * eps * float(rho)
    return DeviationBound(float(first), rhs_m, rhs_f, float(first) <= max(rhs_m, rhs_f) + tol)


def _overlap(grid: PhaseGrid, lo, hi) -> np.ndarray:
    """Length of ``[lo_i, hi_i] & cell_j`` for every column ``i`` and cell ``j``."""
    e = grid.v_edges
    lo, hi = np.asarray(lo)[..., None], np.asarray(hi)[..., None]
    return np.clip(np.minimum(e[1:], hi) - np.maximum(e[:-1], lo), 0.0, None)


def estimate_integrands(f, pi, grid: PhaseGrid, eps: float) -> dict:
    """Space-integrated integrands of the four entropy estimates at one instant,
    without the ``1/h`` and ``eps/h`` prefactors."""
    f, pi = np.atleast_2d(f), np.atleast_2d(pi)
    diff = f - pi
    rho = f.sum(axis=1) * grid.dv
    upper = _overlap(grid, rho + eps, grid.m_cap)
    lower = _overlap(grid, 0.0, np.maximum(0.0, rho - eps))
    dx = grid.dx
    return {
        "e1": float(np.sum(diff @ grid.ladder) * grid.dv * dx),
        "e2": float(np.abs(diff).sum() * grid.dv * dx),
        "e3": float(np.sum(f * upper) * dx),
        "e4": float(np.sum((1.0 - f) * lower) * dx),
    }


def relaxation_weight(dt: float, h: float, quadrature: str = "exact") -> float:
    """Time weight of a relaxation substep: ``int_0^dt exp(-s/h) ds`` or ``dt``."""
    if quadrature == "rectangle":
        return dt
    return -h * math.expm1(-dt / h)


def entropy_estimates_update(record: "DiagnosticsRecord", state_before_relax, state_after_relax,
                             projections: ProjectionBatch, dt: float, h: float, eps: float,
                             quadrature: str = "exact") -> "DiagnosticsRecord":
    """Add one relaxation substep to the E1..E4 accumulators of ``record``.

    During the substep ``f - Pi`` decays like ``exp(-t/h)`` and ``Pi`` vanishes on
    ``[rho + eps, M]`` and equals one on ``[0, rho - eps]``, so every integrand
    is its value before the substep times ``exp(-t/h)``; ``quadrature="exact"``
    integrates that factor, ``"rectangle"`` uses ``dt``.
    """
    f_before = getattr(state_before_relax, "f", state_before_relax)
    grid = getattr(state_before_relax, "grid", None) or state_after_relax.grid
    w = relaxation_weight(dt, h, quadrature) / h
    it = estimate_integrands(f_before, projections.pi, grid, eps)
    record.e1_dissipation += w * it["e1"]
    record.e2_l1 += eps * w * it["e2"]
    record.e3_upper_tail += eps * w * it["e3"]
    record.e4_lower_gap += eps * w * it["e4"]
    f_after = getattr(state_after_relax, "f", state_after_relax)
    record.eta_sup = max(record.eta_sup, float(np.sum(f_after @ grid.ladder) * grid.dv * grid.dx))
    return record


class EntropyInequality(NamedTuple):
    max_increase: float
    max_rate: float
    increments: np.ndarray


def _a_e_derivative(eta: Callable, scale: float) -> Callable:
    step = 1e-7 * scale
    return lambda v: (eta(v + step) - eta(v - step)) / (2 * step)


def entropy_content(state: KineticState, eta_prime: Callable) -> tuple[float, float, float]:
    """``(t, iint eta' f, eta'-weighted cumulative boundary inflow)`` of a state."""
    g = state.grid
    w = eta_prime(g.v) * g.dv
    return state.t, float(np.sum(state.f @ w) * g.dx), float(state.influx @ w)


def entropy_inequality_from_series(series: Sequence[tuple[float, float, float]]) -> EntropyInequality:
    if len(series) < 2:
        raise ValueError("need at least two snapshots")
    times, content, inflow = (np.array(c) for c in zip(*series))
    inc = np.diff(content) - np.diff(inflow)
    dts = np.diff(times)
    rates = np.where(dts > 0, inc / np.where(dts > 0, dts, 1.0), 0.0)
    return EntropyInequality(float(max(inc.max(), 0.0)), float(max(rates.max(), 0.0)), inc)


def kinetic_entropy_inequality_check(snapshots: Sequence[KineticState], flux: FluxSpec,
                                     eta: Callable | None = None,
                                     eta_prime: Callable | None = None) -> EntropyInequality:
    """Changes of ``iint eta'(v) f dv dx`` between consecutive snapshots.

    The weighted boundary inflow recorded by the transport step is subtracted,
    so on closed (periodic) domains this is the plain difference and on open
    domains it is the entropy production inside the domain.
    """
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots")
    if eta_prime is None:
        if eta is None:
            raise ValueError("give eta or eta_prime")
        eta_prime = _a_e_derivative(eta, snapshots[0].grid.m_cap)
    return entropy_inequality_from_series([entropy_content(s, eta_prime) for s in snapshots])


def defect_measure(old: KineticState, new: KineticState, flux: FluxSpec, grid: PhaseGrid,
                   dt: float, sign: str = "minus") -> np.ndarray:
    """Discrete defect measure ``m`` on (x, v) for one step.

    ``R = (f_new - f_old)/dt + A'(v) D_x f_old`` is the kinetic residual.  With
    ``sign="minus"`` the equation is closed as ``... = -d_v m`` and
    ``m(v) = -int_0^v R``; ``sign="plus"`` uses ``... = +d_v m``.
    Entry ``[i, j]`` is ``m`` at the upper edge of velocity cell ``j``.
    """
    speeds = band_speeds(flux, grid)
    R = (new.f - old.f) / dt + upwind_divergence(old.f, speeds, grid.dx, grid.boundary)
    m = np.cumsum(R, axis=1) * grid.dv
    if sign == "minus":
        return -m
    if sign == "plus":
        return m
    raise ValueError(f"unknown sign convention {sign!r}")


def perturbed_flux_check(f_col, grid: PhaseGrid, flux: FluxSpec, eps: float | None = None):
    """``|int A'_i (f - Pi_eq) dv| / rho`` per component; ``None`` for empty columns."""
    f_col = np.asarray(f_col, dtype=float)
    rho, eq, _ = _moments(f_col, grid)
    if rho <= _EMPTY_CELLS * grid.dv:
        return None
    return np.abs(flux.derivative(grid.v) @ (f_col - eq)) * grid.dv / rho


def _hermite(t):
    t2, t3 = t * t, t * t * t
    return 2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2


def extension_values(flux: FluxSpec, rho, eps: float, v) -> np.ndarray:
    """C^1 cut-off of ``A'`` around ``rho`` evaluated at ``v``.

    Equals ``A'`` on ``(max(0, rho-eps), rho+eps)``, vanishes outside
    ``(max(0, rho-2 eps), rho+2 eps)`` and is a cubic Hermite blend in between.
    Shape ``(d, n_rho, n_v)``.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))[:, None]
    v = np.atleast_1d(np.asarray(v, dtype=float))[None, :]
    lo1, hi1 = np.maximum(0.0, rho - eps), rho + eps
    lo2, hi2 = np.maximum(0.0, rho - 2 * eps), rho + 2 * eps
    a_v = flux.derivative(v[0])[:, None, :]
    out = np.where((v > lo1) & (v < hi1), a_v, 0.0)

    # right blend on [hi1, hi2): value and slope of A' at hi1 down to (0, 0)
    t = (v - hi1) / eps
    h00, h10, _, _ = _hermite(t)
    right = h00 * flux.derivative(hi1[:, 0])[:, :, None] + h10 * eps * flux.second_derivative(hi1[:, 0])[:, :, None]
    out = np.where((v >= hi1) & (v < hi2), right, out)

    # left blend on (lo2, lo1]: only when the core does not reach v = 0
    wl = np.where(lo1 > lo2, lo1 - lo2, 1.0)
    t = (v - lo2) / wl
    _, _, h01, h11 = _hermite(t)
    left = h01 * flux.derivative(lo1[:, 0])[:, :, None] + h11 * wl * flux.second_derivative(lo1[:, 0])[:, :, None]
    out = np.where((v > lo2) & (v <= lo1) & (lo1 > 0), left, out)
    return out


def extend_flux_derivative(flux: FluxSpec, rho: float, eps: float, grid: PhaseGrid) -> np.ndarray:
    """The functions ``a_i`` on the velocity cell centres, shape ``(d, nv)``."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return extension_values(flux, rho, eps, grid.v)[:, 0, :]


class MeasureDecomposition(NamedTuple):
    alpha: np.ndarray
    mu_eps_mass: float
    supp_diam: float


def _decompose(F, grid: PhaseGrid, flux: FluxSpec, eps: float):
    """Batched projection of ``f - Pi_eq`` onto ``span{a_i}``.

    Returns ``(alpha, tv, diam, cond)``; rows with an ill-conditioned Gram
    matrix get NaN coefficients.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    rho, eq, _ = _moments(F, grid)
    diff = F - eq
    a = extension_values(flux, rho, eps, grid.v)  # (d, n, nv)
    gram = np.einsum("inv,jnv->nij", a, a) * grid.dv
    rhs = np.einsum("inv,nv->ni", a, diff) * grid.dv
    n, d = rhs.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(gram) if d > 1 else np.where(gram[:, 0, 0] > 0, 1.0, np.inf)
    ok = np.isfinite(cond) & (cond < GRAM_COND_MAX)
    alpha = np.full((n, d), np.nan)
    if ok.any():
        alpha[ok] = np.linalg.solve(gram[ok], rhs[ok][..., None])[..., 0]
    f0 = np.einsum("ni,inv->nv", np.nan_to_num(alpha), a)
    padded = np.pad(f0, ((0, 0), (1, 1)))
    tv = np.abs(np.diff(padded, axis=1)).sum(axis=1)
    nz = np.abs(f0) > 0
    has = nz.any(axis=1)
    first = np.argmax(nz, axis=1)
    last = grid.nv - 1 - np.argmax(nz[:, ::-1], axis=1)
    diam = np.where(has, grid.v[last] - grid.v[first], 0.0)
    return alpha, tv, diam, cond, rho


def measure_decomposition(f_col, grid: PhaseGrid, flux: FluxSpec, eps: float) -> MeasureDecomposition:
    """Coefficients of the projection of ``f - Pi_eq`` onto ``span{a_i}``, the
    total variation of that projection (mass of its derivative) and the
    diameter of its support."""
    f_col = np.asarray(f_col, dtype=float)
    if f_col.sum() * grid.dv <= 0:
        raise ValueError("measure decomposition needs a column with positive mass")
    alpha, tv, diam, cond, rho = _decompose(f_col[None, :], grid, flux, eps)
    if not np.isfinite(alpha).all():
        a = extend_flux_derivative(flux, float(rho[0]), eps, grid)
        gram = a @ a.T * grid.dv
        w, vecs = np.linalg.eigh(gram)
        raise DegeneracyError(
            f"Gram matrix of the cut-off fluxes is singular (cond {cond[0]:.3g}); "
            f"degenerate direction {np.array2string(vecs[:, 0], precision=4)}")
    return MeasureDecomposition(alpha[0], float(tv[0]), float(diam[0]))


@dataclass
class DiagnosticsRecord:
    t: float = 0.0
    step: int = 0
    total_mass: float = 0.0
    eta_entropy: float = 0.0
    gibbs: float = 0.0
    moment: float = 0.0
    f_min: float = 0.0
    f_max: float = 0.0
    e1_dissipation: float = 0.0
    e2_l1: float = 0.0
    e3_upper_tail: float = 0.0
    e4_lower_gap: float = 0.0
    eta_sup: float = 0.0
    max_deviation: float = 0.0
    max_deviation_p3: float = 0.0
    item4_lhs_max: float = 0.0
    item4_excess: float = -math.inf
    domination_failures: int = 0
    defect_min: float = 0.0
    defect_min_plus: float = 0.0
    defect_top_max: float = 0.0
    flux_ratio_max: float = 0.0
    alpha_max: float = 0.0
    mu_eps_mass_max: float = 0.0
    supp_diam_max: float = 0.0
    degenerate_columns: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsRecord":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


class RunMonitor:
    """Running accumulators of a BGK run and snapshot diagnostics."""

    def __init__(self, grid: PhaseGrid, flux: FluxSpec, h: float, quadrature: str = "exact"):
        self.grid, self.flux, self.h = grid, flux, h
        self.quadrature = quadrature
        self.acc = DiagnosticsRecord()
        self.acc.defect_min = math.inf
        self.acc.defect_min_plus = math.inf
        self.steps = 0

    @property
    def eps(self) -> float:
        return self.grid.eps

    def on_step(self, old: KineticState, new: KineticState, info) -> None:
        self.steps += 1
        for f_before, proj, tau in info.relaxations:
            entropy_estimates_update(self.acc, KineticState(self.grid, f_before, old.t), new, proj,
                                     tau, self.h, self.eps, self.quadrature)
            self.acc.domination_failures += int(np.count_nonzero(~proj.dominated))
        m_minus = defect_measure(old, new, self.flux, self.grid, info.dt, "minus")
        self.acc.defect_min = min(self.acc.defect_min, float(m_minus.min()))
        self.acc.defect_min_plus = min(self.acc.defect_min_plus, float(-m_minus.max()))
        self.acc.defect_top_max = max(self.acc.defect_top_max, float(np.abs(m_minus[:, -1]).max()))

    def snapshot(self, state: KineticState) -> DiagnosticsRecord:
        g, eps = self.grid, self.eps
        F = state.f
        rho, _, first = _moments(F, g)
        gibbs_col = F @ g.v * g.dv
        eta_total = float(np.sum(F @ g.ladder) * g.dv * g.dx)
        self.acc.eta_sup = max(self.acc.eta_sup, eta_total)
        live = rho > _EMPTY_CELLS * g.dv

        rec = DiagnosticsRecord(**self.acc.to_dict())
        rec.t, rec.step = state.t, self.steps
        rec.total_mass = float(rho.sum() * g.dx)
        rec.eta_entropy = eta_total
        rec.gibbs = float(gibbs_col.sum() * g.dx)
        rec.moment = rec.total_mass + rec.gibbs
        rec.f_min, rec.f_max = float(F.min()), float(F.max())
        if not np.isfinite(rec.defect_min):
            rec.defect_min = rec.defect_min_plus = 0.0
        rec.max_deviation = float(np.max(deviation(F, g))) if F.size else 0.0
        rec.max_deviation_p3 = float(np.max(deviation_p3(F, g)))
        rec.item4_lhs_max = float(first.max())
        rec.item4_excess = float(np.max(first - 4 * eps * np.maximum(rho, gibbs_col)))
        if live.any():
            ratios = np.abs(self.flux.derivative(g.v) @ (F[live] - equilibrium_columns(g, rho[live])).T) * g.dv / rho[live]
            rec.flux_ratio_max = float(ratios.max())
            alpha, tv, diam, _, _ = _decompose(F[live], g, self.flux, eps)
            good = np.isfinite(alpha).all(axis=1)
            rec.degenerate_columns = int(np.count_nonzero(~good))
            if good.any():
                rec.alpha_max = float(np.abs(alpha[good]).max())
                rec.mu_eps_mass_max = float(tv[good].max())
                rec.supp_diam_max = float(diam[good].max())
        return rec


def summarize(records: Sequence[DiagnosticsRecord], eps: float,
              entropy_violation: float | None = None) -> dict:
    """Empirical constants and final accumulators of a run."""
    last = records[-1]
    out = {
        "C_flux": max(r.flux_ratio_max for r in records) / eps,
        "C_alpha": max(r.alpha_max for r in records) / eps,
        "E1": last.e1_dissipation,
        "E2": last.e2_l1,
        "E3": last.e3_upper_tail,
        "E4": last.e4_lower_gap,
        "eta_sup": last.eta_sup,
        "max_deviation": max(r.max_deviation for r in records),
        "max_deviation_p3": max(r.max_deviation_p3 for r in records),
        "item4_excess": max(r.item4_excess for r in records),
        "worst_defect_negativity": min(r.defect_min for r in records),
        "worst_defect_negativity_plus": min(r.defect_min_plus for r in records),
        "defect_top_max": max(r.defect_top_max for r in records),
        "supp_diam_max": max(r.supp_diam_max for r in records),
        "domination_failure_count": last.domination_failures,
        "mass_initial": records[0].total_mass,
        "mass_final": last.total_mass,
    }
    if entropy_violation is not None:
        out["worst_entropy_violation"] = entropy_violation
    return out
