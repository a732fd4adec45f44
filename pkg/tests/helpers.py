"""Shared builders for the test-suite."""

import math

import numpy as np

from varbgk.phase_grid import PhaseGrid


def column_with_mass(rng, nv, cells, sparsity=None):
    """Random column in [0, 1]^nv whose sum is ``cells``.

    A uniform random profile (optionally thinned) is shifted by a constant and
    clipped; the shift is found by bisection, the mass is then exact to
    round-off after a final proportional touch-up on the interior cells.
    """
    g = rng.random(nv)
    if sparsity is not None:
        g = g * (rng.random(nv) < sparsity)
    lo, hi = -1.0, 1.0
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        if np.clip(g + mid, 0, 1).sum() < cells:
            lo = mid
        else:
            hi = mid
    f = np.clip(g + hi, 0.0, 1.0)
    inner = (f > 0) & (f < 1)
    excess = f.sum() - cells
    if inner.any() and excess != 0:
        f[inner] = np.clip(f[inner] - excess / inner.sum(), 0.0, 1.0)
    return f


def random_instance(rng, max_nv=500, eps_range=(0.02, 0.5), m_cap=1.0):
    """Random (grid, column) pair with M = m_cap, eps in eps_range, nv <= max_nv."""
    eps = rng.uniform(*eps_range)
    max_sub = max(1, int(max_nv * eps / m_cap))
    n_sub = int(rng.integers(1, max_sub + 1))
    dv = eps / n_sub
    nv = min(max_nv, math.ceil(m_cap / dv - 1e-9))
    grid = PhaseGrid(0.0, 1.0, 1, nv * dv, nv, eps)
    rho = rng.uniform(0.0, grid.m_cap)
    sparsity = rng.choice([None, 0.3, 0.7])
    f = column_with_mass(rng, nv, rho / dv, sparsity)
    return grid, f


def random_corpus(n, seed=20240601, **kw):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, **kw) for _ in range(n)]


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def report(number: int, passed: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed
