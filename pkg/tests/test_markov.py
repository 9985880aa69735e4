import math

import numpy as np
import pytest

from horodrift.boundary import ChainNet, RealEnd, boundary_action, tree_depth_ends, tree_end, tree_words_up_to
from horodrift.groups import FiniteSupportMeasure, power
from horodrift.markov import (
    all_pairs,
    boundary_discrepancy,
    constant_observable,
    contraction_step_check,
    contraction_search,
    contraction_upper_bound,
    irreducibility_check,
    k_alpha_estimate,
    markov_apply,
    markov_iterate,
    stationary_estimate,
    submultiplicativity_check,
    visual_observable,
)
from horodrift.spaces import parse_word


@pytest.fixture(scope="module")
def pairs2(tree):
    return all_pairs(tree_depth_ends(tree, 2))


@pytest.fixture(scope="module")
def pairs3(tree):
    return all_pairs(tree_depth_ends(tree, 3))


def test_operator_oracles(tree, vis, f2):
    one = constant_observable()
    assert markov_apply(tree, f2, one, tree_end("", "b")) == 1.0
    f = visual_observable(tree, vis, tree_end("", "a"))
    g = parse_word("ab")
    xi = tree_end("", "b")
    dirac = FiniteSupportMeasure.dirac(tree, g)
    assert markov_apply(tree, dirac, f, xi) == f(boundary_action(tree, tree.inverse(g), xi))
    # g⁻¹ b^∞ over a, A, b, B is A b^∞, a b^∞, b^∞, b^∞: products with a^∞ are 0, 1, 0, 0
    assert markov_apply(tree, f2, f, xi) == pytest.approx(0.25 * (1 + 0.5 + 1 + 1))


def test_markov_iterate_is_power(tree, vis, f2):
    f = visual_observable(tree, vis, tree_end("", "a"))
    xi = tree_end("b", "a")
    assert markov_iterate(tree, f2, f, 3)(xi) == pytest.approx(markov_apply(tree, power(f2, 3), f, xi))


def test_stationary_deterministic(tree, ab):
    nu = stationary_estimate(ab, 20, 3, tree_end("", "a"), seed=1)
    assert nu.atoms[0].letters(30) == tree_end("", "BA").letters(30)
    single = stationary_estimate(ab, 5, 1, tree_end("", "a"), seed=1)
    assert len(single) == 1 and single.weights[0] == 1.0


def test_stationary_two_starts(tree, vis, f2):
    nu1 = stationary_estimate(f2, 50, 5000, tree_end("", "a"), seed=7, stream=1)
    nu2 = stationary_estimate(f2, 50, 5000, tree_end("", "b"), seed=7, stream=2)
    assert boundary_discrepancy(tree, vis, nu1, nu2) < 0.05


def test_tree_discrepancy_matches_lp(tree, vis):
    from horodrift.boundary import rho_matrix
    from horodrift.groups import transport_cost
    from horodrift.markov import EmpiricalBoundaryMeasure

    rng = np.random.default_rng(0)
    ends = tree_depth_ends(tree, 3)
    pts1 = [ends[i] for i in rng.integers(0, len(ends), 6)]
    pts2 = [ends[i] for i in rng.integers(0, len(ends), 7)]
    w1, w2 = rng.random(6), rng.random(7)
    nu1 = EmpiricalBoundaryMeasure(tuple(pts1), w1 / w1.sum(), 0, 1, 0, None)
    nu2 = EmpiricalBoundaryMeasure(tuple(pts2), w2 / w2.sum(), 0, 1, 0, None)
    cost, _ = rho_matrix(tree, vis, pts1, pts2)
    lp = transport_cost(np.minimum(cost, 1.0), nu1.weights, nu2.weights)
    assert boundary_discrepancy(tree, vis, nu1, nu2) == pytest.approx(lp, abs=1e-9)


def test_k_alpha_oracles(tree, vis, f2, pairs2, pairs3):
    e = FiniteSupportMeasure.dirac(tree, ())
    for n in (1, 3):
        assert k_alpha_estimate(tree, vis, e, n, 0.5, pairs2).value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        k_alpha_estimate(tree, vis, f2, 0, 0.5, pairs2)
    k = k_alpha_estimate(tree, vis, f2, 4, 0.5, pairs3)
    assert k.exact and k.value < 1


def test_k_alpha_fast_path_matches_chain(tree, vis, f2, pairs2):
    fast = k_alpha_estimate(tree, vis, f2, 2, 0.5, pairs2[:40]).value
    slow = k_alpha_estimate(tree, vis, f2, 2, 0.5, pairs2[:40], chain=ChainNet(tree, vis, tree_depth_ends(tree, 2))).value
    assert fast == pytest.approx(slow, rel=1e-12)


def test_submultiplicativity(tree, vis, f2, ab, pairs2):
    e = FiniteSupportMeasure.dirac(tree, ())
    assert submultiplicativity_check(tree, vis, e, 0.5, 1, 2, pairs2).holds
    r = submultiplicativity_check(tree, vis, f2, 0.5, 2, 2, pairs2)
    assert r.holds and r.slack >= 0
    r = submultiplicativity_check(tree, vis, ab, 0.5, 2, 3, pairs2)
    assert r.k_sum == pytest.approx(r.k_m * r.k_n_images, rel=1e-12)


def test_contraction_step(tree, vis, f2, pairs2):
    f = visual_observable(tree, vis, tree_end("", "a"), 0.5)
    assert contraction_step_check(tree, vis, f2, f, 2, 0.5, pairs2).holds


def test_contraction_bound_oracles(tree, vis, ab):
    net = tree_depth_ends(tree, 2) + tree_words_up_to(tree, 2)
    e = FiniteSupportMeasure.dirac(tree, ())
    assert contraction_upper_bound(tree, vis, e, 3, 0.5, net) == pytest.approx(vis.C**0.5)
    # the anchor B^∞ sees h((ab)^n) = 2n
    anchor = [tree_end("", "B")]
    for n in (1, 4):
        val = contraction_upper_bound(tree, vis, ab, n, 0.5, anchor)
        assert val == pytest.approx(vis.C**0.5 * 2 ** (-0.5 * 2 * n))


def test_contraction_search_f2(tree, vis, f2):
    net = tree_depth_ends(tree, 3) + tree_words_up_to(tree, 3)
    found = contraction_search(tree, vis, f2, net, n_max=64, alphas=[0.125])
    assert found.found and found.n <= 64 and found.value < 1


def test_irreducibility(tree, plane, f2, parabolic):
    a = FiniteSupportMeasure.dirac(tree, parse_word("a"))
    rep = irreducibility_check(tree, a)
    assert not rep.irreducible and tree_end("", "a") in rep.fixed
    assert irreducibility_check(tree, f2).irreducible
    assert irreducibility_check(plane, parabolic).irreducible
    upper = FiniteSupportMeasure.dirac(plane, plane.parse_isometry([1, 1, 0, 1]))
    rep = irreducibility_check(plane, upper)
    assert not rep.irreducible and any(isinstance(p, RealEnd) and math.isinf(p.x) for p in rep.fixed)
