import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from horodrift.errors import InvalidPoint
from horodrift.spaces import (
    SL2,
    FreeGroupTree,
    StarPoint,
    UpperHalfPlane,
    build_space,
    check_hyperbolicity,
    free_reduce,
    parse_word,
    word_inverse,
    word_multiply,
)

letters = st.sampled_from([1, -1, 2, -2])
words = st.lists(letters, max_size=12).map(lambda w: free_reduce(w))


def test_tree_distance(tree):
    assert tree.distance(parse_word("ab"), parse_word("abb")) == 1


def test_star_distance_across_rays(star):
    # different rays: ‖x‖ + ‖y‖
    assert star.distance(StarPoint(0, 2.0), StarPoint(3, 5.0)) == 7


def test_star_distance_same_ray(star):
    assert star.distance(StarPoint(1, 2.0), StarPoint(1, 5.5)) == 3.5


def test_halfplane_distance(plane):
    assert plane.distance(1j, 1j) == 0
    # length of the vertical segment from i to 2i, integrated numerically
    length, _ = quad(lambda y: 1.0 / y, 1.0, 2.0)
    assert plane.distance(1j, 2j) == pytest.approx(length, abs=1e-12)
    assert plane.distance(1j, 2j) == pytest.approx(math.log(2), abs=1e-15)


def test_gromov_products(tree, star):
    assert tree.gromov_product(parse_word("ab"), parse_word("abb")) == 2
    x = parse_word("aba")
    assert tree.gromov_product(x, x) == tree.distance(x, tree.basepoint)
    assert star.gromov_product(StarPoint(0, 2.0), StarPoint(1, 3.0)) == 0


def test_actions(tree, plane):
    assert tree.apply(parse_word("ab"), parse_word("A")) == parse_word("abA")
    assert tree.apply(tree.identity(), parse_word("ba")) == parse_word("ba")
    assert plane.apply(plane.parse_isometry([1, 1, 0, 1]), 1j) == pytest.approx(1 + 1j)
    assert tree.compose(parse_word("ab"), parse_word("B")) == parse_word("a")
    assert tree.inverse(tree.identity()) == tree.identity()
    inv = plane.inverse(plane.parse_isometry([2, 0, 0, 0.5]))
    assert inv.entries == pytest.approx((0.5, 0, 0, 2))


def test_parse_word_variants():
    assert parse_word("aA") == ()
    assert parse_word("a^-1b") == parse_word("Ab")
    assert parse_word("a'") == parse_word("A")


def test_invalid_inputs(plane):
    with pytest.raises(InvalidPoint):
        plane.check_point(complex(0.0, -1.0))
    with pytest.raises(InvalidPoint):
        plane.parse_isometry([1, 1, 1, 1])
    with pytest.raises(InvalidPoint):
        build_space("sphere")
    with pytest.raises(InvalidPoint):
        FreeGroupTree(2).parse_isometry("c")


@pytest.mark.parametrize("space_name", ["tree", "star"])
def test_zero_hyperbolic(space_name, request):
    report = check_hyperbolicity(request.getfixturevalue(space_name), 0.0, 20_000, seed=1)
    assert report.holds and report.max_violation <= 0


def test_halfplane_needs_positive_delta(plane):
    assert not check_hyperbolicity(plane, 0.0, 20_000, seed=2).holds
    assert check_hyperbolicity(plane, plane.delta, 20_000, seed=2).holds


@given(words, words)
def test_word_group_laws(u, v):
    assert word_multiply(u, word_inverse(u)) == ()
    assert word_inverse(word_multiply(u, v)) == word_multiply(word_inverse(v), word_inverse(u))


@given(words, words, words)
def test_tree_isometry_invariance(g, x, y):
    t = FreeGroupTree(2)
    assert t.distance(t.apply(g, x), t.apply(g, y)) == t.distance(x, y)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_halfplane_isometry_invariance(seed):
    h = UpperHalfPlane(0.7)
    rng = np.random.default_rng(seed)
    g = h.sample_isometries(rng, 1)[0]
    x, y = h.sample_points(rng, 2)
    assert abs(g.det - 1) < 1e-9
    assert h.distance(h.apply(g, x), h.apply(g, y)) == pytest.approx(h.distance(x, y), rel=1e-7, abs=1e-7)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_halfplane_compose_matches_action(seed):
    h = UpperHalfPlane(0.7)
    rng = np.random.default_rng(seed)
    g, k = h.sample_isometries(rng, 2)
    z = h.sample_points(rng, 1)[0]
    lhs = h.apply(h.compose(g, k), z)
    rhs = h.apply(g, h.apply(k, z))
    assert h.distance(lhs, rhs) < 1e-6


def test_sl2_algebra():
    g = SL2(2.0, 1.0, 1.0, 1.0)
    assert (g @ g.inverse()).entries == pytest.approx((1, 0, 0, 1))
    assert g.trace == 3.0


@settings(max_examples=30)
@given(st.integers(2, 4), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_sampled_words_are_reduced(rank, max_length, seed):
    t = FreeGroupTree(rank)
    words = t.sample_points(np.random.default_rng(seed), 200, max_length)
    assert all(len(w) <= max_length and t.check_point(w) == w for w in words)
    xs, ys = words[:100], words[100:]
    assert t.pairwise_distances(xs, ys).tolist() == [t.distance(x, y) for x, y in zip(xs, ys)]
