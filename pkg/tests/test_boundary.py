import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horodrift.boundary import (
    ChainNet,
    Horofunction,
    RealEnd,
    VisualConfig,
    D_b,
    bar_D_b,
    boundary_action,
    boundary_gromov_product,
    comparison_bound_check,
    format_boundary_point,
    horofunction_at_isometry,
    horofunction_eval,
    parse_boundary_point,
    rho_b,
    sample_boundary_points,
    tree_depth_ends,
    tree_end,
    visual_ratio_check,
)
from horodrift.errors import InvalidNet, InvalidPair, InvalidPoint
from horodrift.spaces import FreeGroupTree, UpperHalfPlane, parse_word


def end(spec, rank=2):
    return parse_boundary_point(FreeGroupTree(rank), spec)


def test_visual_constant(vis, plane):
    assert vis.C == 4.0
    cfg = VisualConfig.default_for(plane)
    assert cfg.C == pytest.approx(4 * 2 ** (6 * 0.7))
    with pytest.raises(ValueError):
        VisualConfig(3.0, 0.7)  # b above 2^(1/delta)


def test_tree_end_canonical_form():
    assert tree_end("", "abab") == tree_end("", "ab")
    assert tree_end("ab", "ab") == tree_end("", "ab")
    # (Bab)^n = B a^n b, so a·(Bab)^∞ = aB·a^∞
    assert tree_end("a", "Bab") == tree_end("aB", "a")
    with pytest.raises(InvalidPoint):
        tree_end("a", "")


def test_boundary_products(tree):
    assert boundary_gromov_product(tree, end("(ab)"), end("(ab)")) == math.inf
    assert boundary_gromov_product(tree, end("(a)"), end("(b)")) == 0
    assert boundary_gromov_product(tree, end("(ab)"), end("(abb)")) == 2


def test_products_match_finite_truncations(tree):
    xi, eta = end("(ab)"), end("(abb)")
    vals = [tree.gromov_product(xi.letters(n), eta.letters(n)) for n in (10, 20, 40)]
    assert vals == [2, 2, 2]


def test_rho(tree, vis):
    assert rho_b(tree, vis, end("(ab)"), end("(ab)")) == 0
    assert rho_b(tree, vis, end("(ab)"), end("(abb)")) == 0.25
    assert rho_b(tree, vis, end("(a)"), end("(b)")) == 1


def test_chain_brackets(tree, vis):
    xi, eta, zeta = end("(a)"), end("(b)"), end("(ab)")
    same = bar_D_b(tree, vis, xi, xi, [xi])
    assert (same.lower, same.upper) == (0.0, 0.0)
    two = bar_D_b(tree, vis, xi, zeta, [xi, zeta])
    assert two.upper == rho_b(tree, vis, xi, zeta)
    net = [xi, eta, zeta]
    for p in net:
        for q in net:
            if p != q:
                br = bar_D_b(tree, vis, p, q, net)
                assert br.lower <= br.upper <= rho_b(tree, vis, p, q)
    with pytest.raises(InvalidNet):
        bar_D_b(tree, vis, xi, end("(B)"), net)


def test_D_b_branches(tree, vis):
    a, b = parse_word("a"), parse_word("b")
    assert D_b(tree, vis, a, a, [a]).upper == 0
    # log(2)·2 ≈ 1.386 loses to the chain value ρ₂(a, b) = 1
    assert D_b(tree, vis, a, b, [a, b]).upper == 1.0
    xi, eta = end("(a)"), end("(b)")
    assert D_b(tree, vis, xi, eta, [xi, eta]).upper == 1.0


def test_horofunction_values(tree):
    h = Horofunction(end("(a)"))
    assert horofunction_eval(tree, h, tree.basepoint) == 0
    assert horofunction_eval(tree, h, parse_word("aa")) == -2
    assert horofunction_eval(tree, h, parse_word("b")) == 1


def test_boundary_action(tree, plane):
    xi = end("(a)")
    assert boundary_action(tree, tree.identity(), xi) == xi
    assert boundary_action(tree, parse_word("b"), xi) == end("b(a)")
    g = plane.parse_isometry([1, 1, 0, 1])
    assert boundary_action(plane, g, RealEnd(0.0)) == RealEnd(1.0)
    assert boundary_action(plane, g, RealEnd(math.inf)).is_infinite


def test_comparison_oracles(tree, vis):
    r = comparison_bound_check(tree, vis, end("(a)"), end("(b)"), tree.identity())
    assert (r.displacement, r.max_horofunction) == (0, 0)
    r = comparison_bound_check(tree, vis, end("(a)"), end("(b)"), parse_word("aa"))
    assert (r.displacement, r.max_horofunction, r.K) == (2, 2, 0)
    assert r.lower_slack == 0 and r.upper_slack == 0
    with pytest.raises(InvalidPair):
        comparison_bound_check(tree, vis, end("(a)"), end("(a)"), parse_word("a"))


def test_visual_ratio_identity(tree, vis):
    net = tree_depth_ends(tree, 2)
    r = visual_ratio_check(tree, vis, tree.identity(), net[0], net[1], net)
    assert r.ratio_lower <= 1 <= r.ratio_upper
    assert r.consistent


def test_visual_ratio_list_net_requires_images(tree, vis):
    xi, eta = end("(a)"), end("(b)")
    with pytest.raises(InvalidNet):
        visual_ratio_check(tree, vis, parse_word("b"), xi, eta, [xi, eta])


def test_format_round_trip(tree, plane, star):
    for spec in ["(b)", "a(bab)", "(BA)"]:
        p = parse_boundary_point(tree, spec)
        assert parse_boundary_point(tree, format_boundary_point(p)) == p
    assert parse_boundary_point(plane, format_boundary_point(RealEnd(math.inf))).is_infinite
    assert format_boundary_point(parse_boundary_point(star, 3)) == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tree_visual_ratio_and_comparison(seed):
    tree = FreeGroupTree(2)
    vis = VisualConfig(2.0)
    rng = np.random.default_rng(seed)
    xi, eta = sample_boundary_points(tree, rng, 2)
    if xi == eta:
        return
    g = tree.sample_isometries(rng, 1)[0]
    chain = ChainNet(tree, vis, tree_depth_ends(tree, 2))
    assert visual_ratio_check(tree, vis, g, xi, eta, chain).consistent
    c = comparison_bound_check(tree, vis, xi, eta, g)
    assert c.holds()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_halfplane_horofunction_cocycle(seed):
    # h_ξ(g k x0) = h_ξ(g x0) + h_{g⁻¹ξ}(k x0)
    plane = UpperHalfPlane(0.7)
    rng = np.random.default_rng(seed)
    g, k = plane.sample_isometries(rng, 2)
    xi = sample_boundary_points(plane, rng, 1)[0]
    lhs = horofunction_at_isometry(plane, Horofunction(xi), plane.compose(g, k))
    rhs = horofunction_at_isometry(plane, Horofunction(xi), g) + horofunction_at_isometry(
        plane, Horofunction(boundary_action(plane, plane.inverse(g), xi)), k
    )
    assert lhs == pytest.approx(rhs, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_horofunctions_are_1_lipschitz(seed):
    plane = UpperHalfPlane(0.7)
    rng = np.random.default_rng(seed)
    xi = sample_boundary_points(plane, rng, 1)[0]
    z, w = plane.sample_points(rng, 2)
    h = Horofunction(xi)
    assert abs(horofunction_eval(plane, h, z) - horofunction_eval(plane, h, w)) <= plane.distance(z, w) + 1e-9
