"""Flux functions for scalar conservation laws on the velocity interval [0, M].

A flux component is a piecewise polynomial: a sorted list of breakpoints and,
for every piece, a coefficient vector in ascending degree of the *absolute*
variable ``v``.  A single global polynomial is the one-piece case with
infinite breakpoints.  Polynomials keep ``A`` twice differentiable inside each
piece and give exact derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "DomainError",
    "FluxComponent",
    "FluxSpec",
    "NondegeneracyReport",
    "eval_flux",
    "eval_flux_derivative",
    "check_nondegeneracy",
    "sphere_directions",
]


class DomainError(ValueError):
    """An argument lies outside the domain on which an operation is defined."""


@dataclass(frozen=True)
class FluxComponent:
    breaks: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.breaks) != len(self.coeffs) + 1:
            raise ValueError("need exactly one coefficient vector per piece")
        if any(b >= c for b, c in zip(self.breaks[:-1], self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "FluxComponent":
        return cls((-np.inf, np.inf), (tuple(float(c) for c in coeffs),))

    @property
    def n_pieces(self) -> int:
        return len(self.coeffs)

    def _piece_index(self, v: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks), v, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def _eval(self, v, order: int) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        idx = self._piece_index(v)
        for k, c in enumerate(self.coeffs):
            sel = idx == k
            if np.any(sel):
                out[sel] = P.polyval(v[sel], P.polyder(c, order) if order else c)
        return out

    def value(self, v) -> np.ndarray:
        return self._eval(v, 0)

    def derivative(self, v) -> np.ndarray:
        return self._eval(v, 1)

    def second_derivative(self, v) -> np.ndarray:
        return self._eval(v, 2)

    def _monotone_table(self, lo: float, hi: float):
        """Subintervals of [lo, hi] on which A' has constant sign."""
        pts = {lo, hi}
        for k, c in enumerate(self.coeffs):
            a, b = max(self.breaks[k], lo), min(self.breaks[k + 1], hi)
            if a >= b:
                continue
            pts.update((a, b))
            d = P.polyder(c)
            if len(d) > 1:
                for r in P.polyroots(d):
                    if abs(r.imag) < 1e-12 and a < r.real < b:
                        pts.add(float(r.real))
        return np.array(sorted(pts))

    def monotone_parts(self, u, hi: float | None = None):
        """Return ``(A+(u), A-(u))`` with ``A+(u) = int_0^u max(A', 0)`` and
        ``A-(u) = int_0^u min(A', 0)``, for ``0 <= u <= hi``."""
        u = np.asarray(u, dtype=float)
        if hi is None:
            hi = float(np.max(u)) if u.size else 1.0
        hi = max(hi, 1e-300)
        pts = self._monotone_table(0.0, hi)
        vals = self.value(pts)
        mid = 0.5 * (pts[:-1] + pts[1:])
        rising = self.derivative(mid) >= 0.0
        inc = np.where(rising, np.diff(vals), 0.0)
        dec = np.where(rising, 0.0, np.diff(vals))
        cum_inc = np.concatenate(([0.0], np.cumsum(inc)))
        cum_dec = np.concatenate(([0.0], np.cumsum(dec)))
        k = np.clip(np.searchsorted(pts, u, side="right") - 1, 0, len(mid) - 1)
        tail = self.value(u) - vals[k]
        plus = cum_inc[k] + np.where(rising[k], tail, 0.0)
        minus = cum_dec[k] + np.where(rising[k], 0.0, tail)
        return plus, minus

    def to_dict(self):
        if self.n_pieces == 1 and np.isinf(self.breaks[0]) and np.isinf(self.breaks[-1]):
            return list(self.coeffs[0])
        return [
            {"lo": self.breaks[k], "hi": self.breaks[k + 1], "poly": list(c)}
            for k, c in enumerate(self.coeffs)
        ]


@dataclass(frozen=True)
class FluxSpec:
    """Flux ``A: [0, M] -> R^d`` given componentwise."""

    components: tuple[FluxComponent, ...]
    m_cap: float = 1.0
    lipschitz_bound: float = field(init=False)

    def __post_init__(self):
        if not self.components:
            raise ValueError("flux needs at least one component")
        if not self.m_cap > 0:
            raise DomainError(f"M must be positive, got {self.m_cap}")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "lipschitz_bound", self._sup_derivative())

    @property
    def dim(self) -> int:
        return len(self.components)

    def _sup_derivative(self) -> float:
        # per-component sup over samples, breakpoints and critical points of A';
        # the Euclidean combination bounds the sup of |A'(v)| from above
        sample = np.linspace(0.0, self.m_cap, 4097)
        sups = []
        for comp in self.components:
            pts = [sample]
            for k, c in enumerate(comp.coeffs):
                a = max(comp.breaks[k], 0.0)
                b = min(comp.breaks[k + 1], self.m_cap)
                if a >= b:
                    continue
                pts.append(np.array([a, b]))
                d2 = P.polyder(c, 2)
                if len(d2) > 1:
                    r = P.polyroots(d2)
                    r = r[np.abs(r.imag) < 1e-12].real
                    pts.append(r[(r > a) & (r < b)])
            v = np.concatenate(pts)
            sups.append(float(np.max(np.abs(comp.derivative(v)))))
        return float(np.sqrt(np.sum(np.square(sups))))

    # unchecked, vectorised evaluation; rows are components
    def flux(self, v) -> np.ndarray:
        return np.stack([c.value(v) for c in self.components])

    def derivative(self, v) -> np.ndarray:
        return np.stack([c.derivative(v) for c in self.components])

    def second_derivative(self, v) -> np.ndarray:
        return np.stack([c.second_derivative(v) for c in self.components])

    def with_m_cap(self, m_cap: float) -> "FluxSpec":
        return FluxSpec(self.components, m_cap)

    @classmethod
    def from_coefficients(cls, polys: Sequence[Sequence[float]], m_cap: float = 1.0) -> "FluxSpec":
        return cls(tuple(FluxComponent.polynomial(p) for p in polys), m_cap)

    @classmethod
    def burgers(cls, m_cap: float = 1.0) -> "FluxSpec":
        return cls.from_coefficients([[0.0, 0.0, 0.5]], m_cap)

    @classmethod
    def linear(cls, speed: float, m_cap: float = 1.0) -> "FluxSpec":
        return cls.from_coefficients([[0.0, speed]], m_cap)

    @classmethod
    def from_dict(cls, data: dict, m_cap: float = 1.0) -> "FluxSpec":
        """Parse ``{"flux": {"dim": d, "poly": [[...], ...]}}`` (or the inner dict).

        Piecewise components use ``"pieces"``: one list per component of
        ``{"lo", "hi", "poly"}`` records.
        """
        spec = data.get("flux", data)
        if "poly" in spec:
            comps = [FluxComponent.polynomial(p) for p in spec["poly"]]
        elif "pieces" in spec:
            comps = []
            for pieces in spec["pieces"]:
                pieces = sorted(pieces, key=lambda p: p["lo"])
                breaks = [float(pieces[0]["lo"])] + [float(p["hi"]) for p in pieces]
                comps.append(FluxComponent(tuple(breaks), tuple(tuple(map(float, p["poly"])) for p in pieces)))
        else:
            raise ValueError("flux: expected 'poly' or 'pieces'")
        dim = int(spec.get("dim", len(comps)))
        if dim != len(comps):
            raise ValueError(f"flux.dim = {dim} but {len(comps)} components given")
        return cls(tuple(comps), m_cap)

    def to_dict(self) -> dict:
        comps = [c.to_dict() for c in self.components]
        if all(isinstance(c, list) and (not c or not isinstance(c[0], dict)) for c in comps):
            return {"flux": {"dim": self.dim, "poly": comps}}
        pieces = [c if (c and isinstance(c[0], dict)) else [{"lo": -np.inf, "hi": np.inf, "poly": c}] for c in comps]
        return {"flux": {"dim": self.dim, "pieces": pieces}}


def _check_velocity(spec: FluxSpec, v: float):
    if not (0.0 <= v <= spec.m_cap):
        raise DomainError(f"v = {v} outside [0, {spec.m_cap}]")


def eval_flux(spec: FluxSpec, v: float) -> np.ndarray:
    _check_velocity(spec, v)
    return spec.flux(np.array([v]))[:, 0]


def eval_flux_derivative(spec: FluxSpec, v: float) -> np.ndarray:
    _check_velocity(spec, v)
    return spec.derivative(np.array([v]))[:, 0]


@dataclass
class NondegeneracyReport:
    passed: bool
    direction: np.ndarray | None = None
    interval: tuple[float, float] | None = None
    flat_runs: list = field(default_factory=list)

    def __str__(self):
        if self.passed:
            return "non-degenerate: no flat run of A'.sigma found"
        lo, hi = self.interval
        return (f"DEGENERATE: A'.sigma constant on [{lo:.6g}, {hi:.6g}] "
                f"for sigma = {np.array2string(self.direction, precision=4)}")


def sphere_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic unit directions: ``+-1`` for d = 1, Halton points pushed
    through the normal quantile function and normalised otherwise."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    from scipy.stats import norm, qmc

    pts = qmc.Halton(dim, scramble=False).random(n + 1)[1:]
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def check_nondegeneracy(spec: FluxSpec, m_bound: float, n_directions: int = 64,
                        n_samples: int = 1001, tol: float = 1e-12) -> NondegeneracyReport:
    """Scan ``v -> A'(v).sigma`` for runs of (near) constant values.

    The scan is over ``n_samples`` points of ``(-m_bound, m_bound)`` intersected
    with ``[0, M]``.  A run of two or more consecutive samples whose successive
    differences are all within ``tol`` marks a level set of positive measure.
    """
    if not m_bound > 0:
        raise DomainError("m_bound must be positive")
    if n_samples < 3:
        raise DomainError("n_samples must be at least 3")
    hi = min(m_bound, spec.m_cap)
    # open interval: drop the endpoints
    v = np.linspace(0.0, hi, n_samples + 2)[1:-1]
    grads = spec.derivative(v)
    runs = []
    for sigma in sphere_directions(spec.dim, n_directions):
        g = sigma @ grads
        flat = np.abs(np.diff(g)) <= tol
        if not flat.any():
            continue
        # maximal runs of consecutive flat differences
        edges = np.diff(np.concatenate(([0], flat.astype(np.int8), [0])))
        starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
        for s, e in zip(starts, stops):
            runs.append((sigma.copy(), (float(v[s]), float(v[e]))))
    if not runs:
        return NondegeneracyReport(True)
    sigma, interval = max(runs, key=lambda r: r[1][1] - r[1][0])
    return NondegeneracyReport(False, sigma, interval, runs)
