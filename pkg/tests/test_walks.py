import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horodrift.boundary import RealEnd, tree_end
from horodrift.errors import InsufficientEscape
from horodrift.groups import FiniteSupportMeasure
from horodrift.spaces import parse_word
from horodrift.walks import (
    displacement_samples,
    drift_estimate,
    exact_mean_displacements,
    forward_limit,
    hmet_check,
    increment_indices,
    sample_walk,
)


def birth_death_means(m_max):
    """E|ω^m| for the simple walk on F2: from 0 step up; elsewhere up w.p. 3/4, down w.p. 1/4."""
    p = np.zeros(m_max + 2)
    p[0] = 1.0
    means = []
    for _ in range(m_max):
        q = np.zeros_like(p)
        q[1] += p[0]
        q[2:] += 0.75 * p[1:-1]
        q[:-2] += 0.25 * p[1:-1]
        means.append(float(np.arange(len(q)) @ q))
        p = q
    return means


def test_exact_means_match_birth_death(f2):
    exact = [v for _, v in exact_mean_displacements(f2, 6)]
    assert exact == pytest.approx(birth_death_means(6), abs=1e-12)


def test_trivial_walks(tree, ab):
    w = sample_walk(ab, 0, seed=1)
    assert w.product == () and w.displacement == 0
    w = sample_walk(ab, 5, seed=1)
    assert w.product == parse_word("ababababab") and w.displacement == 10


def test_walk_is_reproducible(f2, parabolic):
    assert sample_walk(f2, 50, seed=3, trial=4) == sample_walk(f2, 50, seed=3, trial=4)
    a, b = sample_walk(parabolic, 50, seed=3), sample_walk(parabolic, 50, seed=3)
    assert a.product.entries == b.product.entries and a.log_scale == b.log_scale


def test_increments_are_prefix_stable(f2):
    short = increment_indices(f2.weights, 100, 9, range(5))
    long = increment_indices(f2.weights, 300, 9, range(5))
    assert np.array_equal(short, long[:, :100])


def test_drift_oracles(tree, ab):
    e = FiniteSupportMeasure.dirac(tree, ())
    assert drift_estimate(e, 50, 4, seed=0).mean == 0
    assert drift_estimate(ab, 50, 4, seed=0).mean == 2.0


def test_drift_f2(f2):
    est = drift_estimate(f2, 2000, 1000, seed=7)
    assert abs(est.mean - 0.5) < 0.02 and est.half_width < 0.02
    assert est.fekete_bound >= 0.5


def test_drift_independent_of_workers(f2, parabolic):
    for mu in (f2, parabolic):
        one = displacement_samples(mu, 200, 4500, seed=2, workers=1)
        three = displacement_samples(mu, 200, 4500, seed=2, workers=3)
        assert np.array_equal(one, three)


def test_forward_limits(tree, ab, f2):
    w = sample_walk(ab, 20, seed=0)
    assert forward_limit(tree, w, depth=4) == tree_end("", "ab")
    with pytest.raises(InsufficientEscape):
        forward_limit(tree, sample_walk(ab, 0, seed=0), depth=1)
    # longer walks with the same increments agree on the first letters
    agree = 0
    for t in range(200):
        a = forward_limit(tree, sample_walk(f2, 200, seed=5, trial=t), depth=3)
        b = forward_limit(tree, sample_walk(f2, 400, seed=5, trial=t), depth=3)
        agree += a.letters(3) == b.letters(3)
    assert agree >= 190


def test_hmet_deterministic(tree, ab):
    n = 100
    r = hmet_check(tree, ab, tree_end("", "a"), n, 3, seed=0)
    # ⟨(ab)^n, a^∞⟩ = 1, so h = 2n - 2
    assert r.plus_mean == pytest.approx((2 * n - 2) / n)
    assert r.minus_mean == pytest.approx(-2.0)


def test_hmet_f2(tree, f2):
    r = hmet_check(tree, f2, tree_end("", "b"), 2000, 1000, seed=7)
    plus_ok, minus_ok = r.within(0.5, 0.05)
    assert plus_ok and minus_ok and r.lipschitz_ok


def test_hmet_halfplane_signs(plane, parabolic):
    r = hmet_check(plane, parabolic, RealEnd(0.3), 300, 300, seed=1)
    assert r.plus_mean == pytest.approx(r.drift.mean, abs=0.05)
    assert r.minus_mean == pytest.approx(-r.drift.mean, abs=0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31))
def test_displacement_is_subadditive_along_walk(n, seed):
    from horodrift.spaces import FreeGroupTree

    tree = FreeGroupTree(2)
    mu = FiniteSupportMeasure.uniform(tree, tree.generators)
    w = sample_walk(mu, n, seed, checkpoint_every=1)
    assert w.displacement <= n
    assert w.displacement % 2 == n % 2
