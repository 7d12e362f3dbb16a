import math

import numpy as np
import pytest

from gwrdt.distortion import mark_hamming, type_hamming
from gwrdt.errors import InvalidParameter
from gwrdt.experiments import (
    ball_exponent,
    ldp_decay,
    stationarity_check,
    verify_aep,
    wilson_interval,
)
from gwrdt.model import mtdna_model, uniform_binary_model
from gwrdt.trees import Tree, sample_conditioned_many

MT = mtdna_model(0.5)
RHO = type_hamming(MT, MT)
CHERRY = Tree((1, 1, 1), (2, 0, 0))


def test_ball_exact_cherry():
    be = ball_exponent(CHERRY, 0.0, MT, RHO, "exact")
    assert be.prob == pytest.approx(0.25)
    assert be.exponent == pytest.approx(math.log(4) / 3)
    assert be.stderr is None and be.method == "exact"
    assert be.x_digest == "3 1:2 1:0 1:0"


@pytest.mark.parametrize("n", [1, 3, 5, 7, 9])
def test_ball_everything_at_bound(n):
    rho = mark_hamming(MT, MT)
    for x in sample_conditioned_many(MT, n, 3, n).trees:
        assert ball_exponent(x, rho.bound, MT, rho, "exact").exponent == 0.0
        mc = ball_exponent(x, rho.bound, MT, rho, "mc", samples=500, seed=1)
        assert mc.exponent == 0.0


def test_ball_mc_within_three_stderr():
    for n in (3, 5, 7):
        x = sample_conditioned_many(MT, n, 1, 100 + n).trees[0]
        ex = ball_exponent(x, 0.25, MT, RHO, "exact")
        mc = ball_exponent(x, 0.25, MT, RHO, "mc", samples=20_000, seed=n)
        assert abs(mc.exponent - ex.exponent) <= 3 * mc.stderr


def test_ball_mc_censoring():
    x = Tree((0, 0, 0, 0, 0), (2, 0, 2, 0, 0))  # all mutants: far from every normal-rooted y
    be = ball_exponent(x, 0.0, MT, RHO, "mc", samples=1000, seed=0)
    assert be.censored and be.exponent is None
    assert be.hits == 0 and be.lower_bound > 0


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi > 0


def test_verify_aep_report_deterministic():
    a = verify_aep(MT, MT, RHO, 0.25, [3, 5], 4, seed=3)
    b = verify_aep(MT, MT, RHO, 0.25, [3, 5], 4, seed=3)
    assert a.rows == b.rows and a.summary == b.summary
    assert len(a.rows) == 8
    assert a.summary["regime"] == "interior"
    assert a.summary["R_d"] == pytest.approx(0.130812035941137, abs=1e-9)
    for row in a.rows:
        assert row[3] == "exact" and row[5] >= 0 and row[6] is None


def test_verify_aep_above_mean_has_zero_rate():
    rep = verify_aep(MT, MT, RHO, 0.9, [3, 5, 7], 5, seed=0)
    assert rep.summary["regime"] == "at-or-above-d_av"
    assert rep.summary["R_d"] == 0.0
    assert all(r[8] == 0.0 for r in rep.rows)
    assert all(r[5] <= 0.35 for r in rep.rows)


def test_ldp_decay_interval_rejected():
    with pytest.raises(InvalidParameter):
        ldp_decay(MT, MT, RHO, (0.2, 0.2), [3])


def test_ldp_decay_around_mean():
    u = uniform_binary_model()
    rep = ldp_decay(u, u, type_hamming(u, u), (0.3, 0.7), [3, 5, 7], seed=1)
    assert rep.summary["i_rho_inf"] == pytest.approx(0.0, abs=1e-6)
    rates = [r[4] for r in rep.rows]
    assert all(0 <= r < 0.5 for r in rates)


def test_ldp_decay_lower_tail_mtdna():
    rep = ldp_decay(MT, MT, RHO, (0.0, 0.05), [3, 5, 7, 9], seed=2)
    assert len(rep.rows) == 4
    for r in rep.rows:
        assert r[2] == "exact"
        assert r[4] is None or r[4] > 0
    assert rep.summary["i_rho_inf"] >= 0


def test_stationarity_uniform_binary_candidates_coincide():
    u = uniform_binary_model()
    rep = stationarity_check(u, u, [5, 9], 200, seed=0)
    np.testing.assert_allclose(rep.summary["right_candidate"], rep.summary["left_candidate"], atol=1e-9)
    for r in rep.rows:
        assert r[2] == pytest.approx(r[3], abs=1e-9)
        assert 0 <= r[2] <= 1


def test_stationarity_mtdna_reports_both():
    rep = stationarity_check(MT, MT, [11, 25], 100, seed=0)
    assert rep.summary["favoured_at_largest_n"] in ("left", "right", "tie")
    for r in rep.rows:
        assert 0 <= r[2] <= 1 and 0 <= r[3] <= 1
