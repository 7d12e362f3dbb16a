import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwrdt.distortion import mark_hamming, type_hamming
from gwrdt.empirical import (
    MARKED_PAIR,
    PAIRED_MARKS,
    PairMeasure,
    expect,
    joint_measure,
    kernel_mark_law,
    measure_csv,
    offspring_measure,
    product_measure,
    reindex,
    shift_defect,
)
from gwrdt.errors import SizeMismatch
from gwrdt.model import VertexMark as M
from gwrdt.model import mtdna_model, uniform_binary_model
from gwrdt.trees import Tree, sample_conditioned_many

MT = mtdna_model(0.5)
CHERRY = Tree((1, 1, 1), (2, 0, 0))
MIXED = Tree((1, 1, 0), (2, 0, 0))


def test_offspring_measure_examples():
    assert offspring_measure(Tree((0,), (0,))).weights == {M(0, ()): 1.0}
    w = offspring_measure(MIXED).weights
    assert w == pytest.approx({M(1, (1, 0)): 1 / 3, M(1, ()): 1 / 3, M(0, ()): 1 / 3})


def test_offspring_measure_normalized():
    for n in (3, 5, 7, 9):
        for t in sample_conditioned_many(MT, n, 25, n).trees:
            assert offspring_measure(t).total() == pytest.approx(1.0, abs=1e-12)


def test_joint_measure_example():
    mu = joint_measure(CHERRY, MIXED)
    assert mu.view == MARKED_PAIR
    assert mu.weights == pytest.approx(
        {
            (M(1, (1, 1)), M(1, (1, 0))): 1 / 3,
            (M(1, ()), M(1, ())): 1 / 3,
            (M(1, ()), M(0, ())): 1 / 3,
        }
    )
    sd = shift_defect(mu, 2)
    assert sd.per_type_first[1] == pytest.approx(1 / 3) and sd.per_type_first[0] == 0.0
    assert sd.per_type_second[1] == pytest.approx(1 / 3) and sd.per_type_second[0] == 0.0


def test_joint_measure_diagonal_and_projection():
    for t in sample_conditioned_many(MT, 7, 20, 1).trees:
        mu = joint_measure(t, t)
        assert all(a == b for a, b in mu.weights)
        assert mu.marginal(0).weights == pytest.approx(offspring_measure(t).weights)


def test_joint_measure_size_mismatch():
    with pytest.raises(SizeMismatch):
        joint_measure(CHERRY, Tree((1,), (0,)))


def test_reindex_point_mass():
    mu = PairMeasure({(M(1, (1, 0)), M(0, ())): 1.0})
    out = reindex(mu)
    assert out.view == PAIRED_MARKS
    assert out.weights == {((1, 0), ((1, 0), ())): 1.0}
    back = reindex(out)
    assert back.view == MARKED_PAIR and back.weights == mu.weights


def _random_measure(rng, model_x, model_y, k=6):
    mx = [model_x.marks[i] for i in rng.integers(0, len(model_x.marks), k)]
    my = [model_y.marks[i] for i in rng.integers(0, len(model_y.marks), k)]
    w = rng.dirichlet(np.ones(k))
    out = {}
    for a, b, p in zip(mx, my, w):
        out[(a, b)] = out.get((a, b), 0.0) + float(p)
    return PairMeasure(out)


def test_reindex_involution_mass_and_view_invariance():
    rng = np.random.default_rng(0)
    rhos = [type_hamming(MT, MT), mark_hamming(MT, MT)]
    for _ in range(100):
        mu = _random_measure(rng, MT, MT)
        nu = reindex(mu)
        assert reindex(nu).weights == mu.weights
        assert math.isclose(nu.total(), mu.total(), abs_tol=1e-15)
        for rho in rhos:
            assert abs(expect(rho, mu) - expect(rho, nu)) <= 1e-14


def test_shift_defect_stationary_product():
    ub = uniform_binary_model()
    law = kernel_mark_law(ub, [0.5, 0.5])
    nu = product_measure(law, law)
    assert shift_defect(nu, 2).max_defect <= 1e-10


@given(st.integers(0, 10_000), st.sampled_from([3, 5, 7, 9]))
@settings(max_examples=40, deadline=None)
def test_shift_defect_bounded_by_inverse_n(seed, n):
    tx, ty = sample_conditioned_many(MT, n, 2, seed).trees
    assert shift_defect(joint_measure(tx, ty), 2).max_defect <= 1 / n + 1e-15


def test_measure_csv_format():
    text = measure_csv(joint_measure(CHERRY, MIXED), MT.alphabet)
    lines = text.strip().splitlines()
    assert lines[0] == "mark1,mark2,weight"
    assert "1|11,1|10,0.3333333333333333" in lines


def test_type_pair_marginal():
    mu = joint_measure(CHERRY, MIXED)
    assert mu.type_pair_marginal() == pytest.approx({(1, 1): 2 / 3, (1, 0): 1 / 3})
