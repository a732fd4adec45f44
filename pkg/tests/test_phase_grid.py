import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varbgk.model import DomainError
from varbgk.phase_grid import (KineticState, PhaseGrid, from_macro, gibbs_entropy, macro_density,
                               read_macro_csv, write_kinetic_csv, write_macro_csv)


@pytest.fixture
def grid():
    return PhaseGrid(0.0, 1.0, 4, 1.0, 20, 0.1)


def test_n_sub_derived(grid):
    assert grid.n_sub == 2
    np.testing.assert_array_equal(grid.ladder[:6], [1, 1, 2, 2, 3, 3])


def test_eps_not_multiple_of_dv_rejected():
    with pytest.raises(ValueError, match="n_sub"):
        PhaseGrid(0.0, 1.0, 4, 1.0, 20, 0.07)


def test_build_rounds_m_up():
    g = PhaseGrid.build(0.0, 1.0, 3, 1.03, 0.1, 4)
    assert g.dv == pytest.approx(0.025)
    assert g.nv == 42 and g.m_cap == pytest.approx(1.05)


def test_macro_density_examples(grid):
    zero = KineticState(grid, np.zeros((grid.nx, grid.nv)))
    np.testing.assert_array_equal(macro_density(zero), 0.0)
    full = KineticState(grid, np.ones((grid.nx, grid.nv)))
    np.testing.assert_allclose(macro_density(full), grid.m_cap)
    half = np.zeros((grid.nx, grid.nv))
    half[:, : grid.nv // 2] = 1.0
    np.testing.assert_allclose(macro_density(KineticState(grid, half)), 0.5, rtol=1e-14)


def test_gibbs_entropy_midpoint_error():
    g = PhaseGrid(0.0, 1.0, 5, 1.0, 50, 0.1)
    rho = np.array([0.0, 0.13, 0.5, 0.777, 1.0])
    S = gibbs_entropy(from_macro(g, rho))
    # midpoint rule is exact on whole cells; the straddling cell contributes
    # at most dv^2 / 8 of error
    assert np.all(np.abs(S - rho**2 / 2) <= g.dv**2 / 8 + 1e-15)
    assert S[-1] == pytest.approx(0.5, abs=1e-14)


def test_from_macro_examples(grid):
    dv = grid.dv
    st_ = from_macro(grid, np.array([0.0, grid.m_cap, 2.5 * dv, 0.3]))
    np.testing.assert_array_equal(st_.f[0], 0.0)
    np.testing.assert_array_equal(st_.f[1], 1.0)
    np.testing.assert_allclose(st_.f[2, :4], [1, 1, 0.5, 0], atol=1e-14)
    assert st_.f[2, 4:].max() == 0.0


@pytest.mark.parametrize("bad", [-0.1, 1.2])
def test_from_macro_domain(grid, bad):
    with pytest.raises(DomainError):
        from_macro(grid, np.array([0.1, bad, 0.2, 0.3]))


@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
@settings(max_examples=60, deadline=None)
def test_from_macro_round_trip(rho):
    g = PhaseGrid(0.0, 1.0, 4, 1.0, 20, 0.1)
    s = from_macro(g, np.array(rho))
    np.testing.assert_allclose(macro_density(s), rho, atol=1e-14)
    assert s.in_box()


def test_state_shape_checked(grid):
    with pytest.raises(ValueError):
        KineticState(grid, np.zeros((3, 3)))


def test_csv_round_trip(tmp_path, grid):
    s = from_macro(grid, np.array([0.1, 0.2, 0.3, 0.4]))
    write_macro_csv(grid.x, macro_density(s), tmp_path / "m.csv")
    x, rho = read_macro_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(x, grid.x)
    np.testing.assert_array_equal(rho, macro_density(s))
    write_kinetic_csv(s, tmp_path / "k.csv")
    data = np.loadtxt(tmp_path / "k.csv", delimiter=",", skiprows=1)
    assert data.shape == (grid.nx * grid.nv, 3)
    np.testing.assert_array_equal(data[:, 2], s.f.ravel())
