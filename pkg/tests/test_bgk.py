import math

import numpy as np
import pytest

from varbgk.bgk import (CFLError, NonFiniteStateError, SolverConfig, relaxation_step, run, step,
                        time_step, transport_step)
from varbgk.model import FluxSpec
from varbgk.phase_grid import KineticState, PhaseGrid, from_macro, macro_density
from varbgk.projection import variational_projection


def sine_state(nx=50, nv=40, eps=0.1, boundary="periodic"):
    g = PhaseGrid(0.0, 1.0, nx, 2.0, nv, eps, boundary)
    rho = 0.5 + 0.4 * np.sin(2 * np.pi * g.x)
    return from_macro(g, rho)


def test_zero_speed_band_unchanged():
    g = PhaseGrid(0.0, 1.0, 10, 1.0, 10, 0.1)
    rng = np.random.default_rng(0)
    s = KineticState(g, rng.random((10, 10)))
    new = transport_step(s, FluxSpec.linear(0.0), 0.01)
    np.testing.assert_array_equal(new.f, s.f)


def test_constant_in_x_unchanged():
    g = PhaseGrid(0.0, 1.0, 10, 1.0, 10, 0.1, "outflow")
    f = np.tile(np.linspace(0, 1, 10), (10, 1))
    new = transport_step(KineticState(g, f), FluxSpec.burgers(), 0.05)
    np.testing.assert_allclose(new.f, f, atol=1e-15)


@pytest.mark.parametrize("c", [0.8, -0.8])
def test_pulse_shifts_one_cell_at_unit_courant(c):
    g = PhaseGrid(0.0, 1.0, 10, 1.0, 5, 0.2)
    f = np.zeros((10, 5))
    f[4] = 1.0
    new = transport_step(KineticState(g, f), FluxSpec.linear(c), g.dx / abs(c))
    expect = np.zeros_like(f)
    expect[5 if c > 0 else 3] = 1.0
    np.testing.assert_allclose(new.f, expect, atol=1e-14)


def test_cfl_violation():
    g = PhaseGrid(0.0, 1.0, 10, 1.0, 5, 0.2)
    with pytest.raises(CFLError):
        transport_step(KineticState(g, np.zeros((10, 5))), FluxSpec.linear(1.0), 1.5 * g.dx)
    with pytest.raises(ValueError):
        SolverConfig(eps=0.1, h=1e-3, cfl=1.5)


def test_relaxation_equilibrium_fixed():
    s = sine_state()
    new, proj = relaxation_step(s, s.grid, 0.01, 1e-3)
    np.testing.assert_array_equal(new.f, s.f)
    assert proj.dominated.all()


def test_relaxation_half_life():
    g = PhaseGrid(0.0, 1.0, 1, 1.0, 20, 0.2)
    f = np.full((1, 20), 0.5)
    h = 1e-3
    new, _ = relaxation_step(KineticState(g, f), g, h * math.log(2), h)
    pi = variational_projection(f[0], g).pi
    np.testing.assert_allclose(new.f[0], (pi + f[0]) / 2, atol=1e-15)
    full, _ = relaxation_step(KineticState(g, f), g, 1.0, h)
    np.testing.assert_array_equal(full.f[0], pi)


@pytest.mark.parametrize("splitting", ["lie", "strang"])
def test_one_step_conserves_mass(splitting):
    s = sine_state()
    flux = FluxSpec.burgers(s.grid.m_cap)
    cfg = SolverConfig(eps=0.1, h=1e-3, splitting=splitting)
    new, info = step(s, flux, cfg)
    assert new.total_mass == pytest.approx(s.total_mass, rel=1e-12)
    assert new.t == pytest.approx(info.dt)
    assert len(info.relaxations) == (1 if splitting == "lie" else 2)


def test_time_step_respects_cfl():
    s = sine_state()
    dt = time_step(FluxSpec.burgers(2.0), s.grid, 0.9)
    assert dt == pytest.approx(0.9 * s.grid.dx / 2.0)


def test_zero_data_stays_zero():
    g = PhaseGrid(0.0, 1.0, 20, 1.0, 10, 0.1)
    cfg = SolverConfig(eps=0.1, h=1e-3, t_end=0.2)
    out = run(KineticState(g, np.zeros((20, 10))), FluxSpec.burgers(), cfg)
    assert not out.f.any()
    assert out.t == pytest.approx(0.2)


def test_t_end_zero_single_snapshot():
    s = sine_state()
    seen = []
    cfg = SolverConfig(eps=0.1, h=1e-3, t_end=0.0)
    out = run(s, FluxSpec.burgers(2.0), cfg, [lambda st, rec: seen.append(rec)])
    np.testing.assert_array_equal(out.f, s.f)
    assert len(seen) == 1


def test_run_snapshots_and_final_time():
    s = sine_state()
    times = []
    cfg = SolverConfig(eps=0.1, h=1e-3, t_end=0.1, snapshot_stride=3)
    out = run(s, FluxSpec.burgers(2.0), cfg, [lambda st, rec: times.append(st.t)])
    assert out.t == pytest.approx(0.1, abs=1e-14)
    assert times[0] == 0.0 and times[-1] == pytest.approx(0.1, abs=1e-14)
    assert np.all(np.diff(times) > 0)
    assert out.in_box()
    assert out.total_mass == pytest.approx(s.total_mass, rel=1e-12)


def test_outflow_boundary_tracks_influx():
    g = PhaseGrid(0.0, 1.0, 40, 2.0, 40, 0.1, "outflow")
    rho = np.where(g.x < 0.5, 1.0, 0.0)
    s = from_macro(g, rho)
    cfg = SolverConfig(eps=0.1, h=1e-3, t_end=0.3, boundary="outflow")
    out = run(s, FluxSpec.burgers(2.0), cfg)
    # inflow at x_min: rho_l^2 / 2 per unit time
    net = out.influx.sum() * g.dv
    assert out.total_mass == pytest.approx(s.total_mass + net, rel=1e-12)
    assert macro_density(out)[0] == pytest.approx(1.0, abs=1e-12)


def test_mismatched_boundary_rejected():
    s = sine_state()
    with pytest.raises(ValueError):
        run(s, FluxSpec.burgers(2.0), SolverConfig(eps=0.1, h=1e-3, boundary="outflow"))
    with pytest.raises(ValueError):
        run(s, FluxSpec.burgers(2.0), SolverConfig(eps=0.2, h=1e-3))


def test_non_finite_aborts():
    s = sine_state()
    s.f[3, 3] = np.nan
    with pytest.raises(NonFiniteStateError) as exc:
        run(s, FluxSpec.burgers(2.0), SolverConfig(eps=0.1, h=1e-3, t_end=0.05))
    assert exc.value.step_index == 1
