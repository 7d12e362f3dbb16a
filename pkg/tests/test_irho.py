import numpy as np
import pytest

from gwrdt.distortion import mark_hamming, type_hamming
from gwrdt.empirical import expect
from gwrdt.model import mtdna_model, toy_cap1_model, uniform_binary_model
from gwrdt.ratefn import INF, d_average, i_rho, rate_I1
from gwrdt.spectral import stationary_pair
from oracles import toy_i_rho_grid

TOY = toy_cap1_model()
TOY_RHO = type_hamming(TOY, TOY)
UB = uniform_binary_model()
UB_RHO = type_hamming(UB, UB)
Z9 = [round(0.05 + 0.1 * i, 2) for i in range(9)]


@pytest.fixture(scope="module")
def toy_values():
    return {z: i_rho(z, TOY, TOY, TOY_RHO) for z in Z9}


@pytest.mark.parametrize("z", Z9)
def test_toy_matches_grid_oracle(toy_values, z):
    assert toy_values[z].value == pytest.approx(toy_i_rho_grid(z), abs=2e-3)


def test_toy_argmin_feasible(toy_values):
    for z, rv in toy_values.items():
        assert rv.defect.max_defect <= 1e-9
        assert abs(expect(TOY_RHO, rv.argmin) - z) <= 1e-9
        assert rv.argmin.total() == pytest.approx(1.0, abs=1e-12)
        # the reported value is I1 of the reported argmin
        assert rate_I1(rv.argmin, TOY, TOY).value == pytest.approx(rv.value, abs=1e-9)


def test_toy_convex(toy_values):
    v = [toy_values[z].value for z in Z9]
    for a, b, c in zip(v, v[1:], v[2:]):
        assert b <= 0.5 * (a + c) + 1e-4


def test_uniform_binary_zero_at_mean():
    pi = stationary_pair(UB, UB)
    dav = d_average(pi, UB, UB, UB_RHO)
    assert dav == pytest.approx(0.5)
    assert i_rho(dav, UB, UB, UB_RHO).value == pytest.approx(0.0, abs=1e-6)


def test_uniform_binary_convex_mark_hamming():
    rho = mark_hamming(UB, UB)
    zs = np.linspace(0.2, 1.4, 9)
    v = [i_rho(z, UB, UB, rho).value for z in zs]
    assert min(v) >= 0
    for a, b, c in zip(v, v[1:], v[2:]):
        assert b <= 0.5 * (a + c) + 1e-4


@pytest.mark.parametrize("z", [-0.1, 1.01, 5.0])
def test_out_of_range_is_infinite(z):
    assert i_rho(z, UB, UB, UB_RHO).value == INF


def test_residuals_reported():
    rv = i_rho(0.3, UB, UB, UB_RHO)
    for key in ("shift", "distortion", "mass", "outer_iterations"):
        assert key in rv.residuals
    assert rv.residuals["shift"] <= 1e-9 and rv.residuals["distortion"] <= 1e-9


def test_mtdna_zero_at_mutant_fixed_point():
    # the all-mutant product measure is shift-invariant with I1 = 0 and rho = 0
    m = mtdna_model(0.5)
    assert i_rho(0.0, m, m, type_hamming(m, m)).value == pytest.approx(0.0, abs=1e-9)
