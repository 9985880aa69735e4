"""Gromov boundary, visual quasi-metric, chain metrics and horofunctions.

Boundary points have exact finite representations per space:

* tree: eventually periodic infinite reduced words (:class:`TreeEnd`);
* half-plane: points of the extended real line (:class:`RealEnd`);
* star space: ray indices (:class:`RayEnd`).

A *Bord-point* is either an interior point of the space or a boundary point.
Suprema and chain infima are never computed exactly; the visual metric comes
out as a certified :class:`Bracket` built on a finite net of Bord-points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidNet, InvalidPair, InvalidPoint
from .spaces import (
    SL2,
    FreeGroupTree,
    RayPermutation,
    SpaceModel,
    StarPoint,
    StarSpace,
    UpperHalfPlane,
    Word,
    common_prefix_length,
    format_word,
    free_reduce,
    is_reduced,
    parse_word,
    word_inverse,
    word_multiply,
)

INF = math.inf


# --------------------------------------------------------------------------
# Visual parameter
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VisualConfig:
    """Visual base ``b`` together with the hyperbolicity constant it is tied to."""

    b: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.b > 1:
            raise ValueError(f"visual base must exceed 1, got {self.b}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.delta > 0 and self.b > 2 ** (1 / self.delta) * (1 + 1e-12):
            raise ValueError(f"b = {self.b} exceeds 2^(1/delta) = {2 ** (1 / self.delta)}")

    @classmethod
    def default_for(cls, space: SpaceModel) -> "VisualConfig":
        if space.delta == 0:
            return cls(2.0, 0.0)
        return cls(min(2 ** (1 / space.delta), 2.0), space.delta)

    @property
    def C(self) -> float:
        """Distortion constant 4 b^(6 delta)."""
        return 4.0 * self.b ** (6 * self.delta)

    @property
    def log_b(self) -> float:
        return math.log(self.b)


# --------------------------------------------------------------------------
# Boundary point types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeEnd:
    """Infinite reduced word ``prefix · period^∞`` in canonical form.

    Canonical means: the period is primitive and cyclically reduced, the seam
    ``prefix | period`` does not cancel, and the prefix is as short as possible.
    Two ends are equal iff their canonical forms are equal.
    """

    prefix: Word
    period: Word

    def letters(self, n: int) -> Word:
        if n <= len(self.prefix):
            return self.prefix[:n]
        reps = (n - len(self.prefix)) // len(self.period) + 1
        return (self.prefix + self.period * reps)[:n]

    def __str__(self) -> str:
        pre = format_word(self.prefix) if self.prefix else ""
        return f"{pre}({format_word(self.period)})^∞"


@dataclass(frozen=True)
class RealEnd:
    """Point of ℝ ∪ {∞} on the half-plane boundary; ``math.inf`` is the point at infinity."""

    x: float

    def __post_init__(self) -> None:
        if math.isinf(self.x) and self.x < 0:
            object.__setattr__(self, "x", INF)
        if math.isnan(self.x):
            raise InvalidPoint("boundary coordinate is NaN")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.x)


@dataclass(frozen=True)
class RayEnd:
    ray: int


BoundaryPoint = TreeEnd | RealEnd | RayEnd


def is_boundary_point(p: Any) -> bool:
    return isinstance(p, (TreeEnd, RealEnd, RayEnd))


def _primitive_root(w: Word) -> Word:
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return w[:d]
    return w


def tree_end(prefix: Sequence[int] | str, period: Sequence[int] | str, rank: int | None = None) -> TreeEnd:
    """Build the canonical end ``prefix · period^∞``; words may be given as strings."""
    if isinstance(prefix, str):
        prefix = parse_word(prefix, rank)
    if isinstance(period, str):
        period = parse_word(period, rank)
    prefix = free_reduce(tuple(int(s) for s in prefix))
    period = free_reduce(tuple(int(s) for s in period))
    if not period:
        raise InvalidPoint("period of a tree end must be nontrivial")
    # period = x q x⁻¹ with q cyclically reduced gives period^∞ = x q^∞
    k = 0
    while k < len(period) // 2 and period[k] == -period[len(period) - 1 - k]:
        k += 1
    if k:
        prefix = word_multiply(prefix, period[:k])
        period = period[k : len(period) - k]
    p = len(period)
    reps = len(prefix) // p + 2
    reduced = free_reduce(prefix + period * reps)
    cancelled = (len(prefix) + p * reps - len(reduced)) // 2
    new_prefix = prefix[: len(prefix) - cancelled]
    shift = cancelled % p
    rot = period[shift:] + period[:shift]
    rot = _primitive_root(rot)
    while new_prefix and new_prefix[-1] == rot[-1]:
        new_prefix = new_prefix[:-1]
        rot = (rot[-1],) + rot[:-1]
    return TreeEnd(new_prefix, rot)


def check_boundary_point(space: SpaceModel, p: Any) -> BoundaryPoint:
    if isinstance(space, FreeGroupTree) and isinstance(p, TreeEnd):
        for s in p.prefix + p.period:
            if s == 0 or abs(s) > space.rank:
                raise InvalidPoint(f"end {p} uses letters outside rank {space.rank}")
        if not is_reduced(p.prefix + p.period + p.period[:1]):
            raise InvalidPoint(f"end {p} is not reduced")
        return p
    if isinstance(space, UpperHalfPlane) and isinstance(p, RealEnd):
        return p
    if isinstance(space, StarSpace) and isinstance(p, RayEnd):
        if not 0 <= p.ray < space.ray_count:
            raise InvalidPoint(f"ray index {p.ray} out of range")
        return p
    raise InvalidPoint(f"{p!r} is not a boundary point of {space!r}")


def parse_boundary_point(space: SpaceModel, spec: Any) -> BoundaryPoint:
    """Config form: tree ``"ab(abb)"`` style ``{prefix, period}`` dict or ``"(ab)"``;
    half-plane a number or ``"inf"``; star an integer ray index."""
    if is_boundary_point(spec):
        return check_boundary_point(space, spec)
    if isinstance(space, FreeGroupTree):
        if isinstance(spec, dict):
            return tree_end(spec.get("prefix", ""), spec["period"], space.rank)
        text = str(spec).replace("^∞", "").replace("^inf", "")
        if "(" in text:
            pre, rest = text.split("(", 1)
            return tree_end(pre, rest.rstrip(")"), space.rank)
        return tree_end("", text, space.rank)
    if isinstance(space, UpperHalfPlane):
        return RealEnd(float(spec))
    if isinstance(space, StarSpace):
        return check_boundary_point(space, RayEnd(int(spec)))
    raise InvalidPoint(f"cannot parse boundary point {spec!r}")


def format_boundary_point(p: Any) -> Any:
    """Config form of a boundary point, the inverse of ``parse_boundary_point``."""
    if isinstance(p, TreeEnd):
        pre = format_word(p.prefix) if p.prefix else ""
        return f"{pre}({format_word(p.period)})"
    if isinstance(p, RealEnd):
        return "inf" if p.is_infinite else p.x
    if isinstance(p, RayEnd):
        return p.ray
    raise InvalidPoint(f"{p!r} is not a boundary point")


def parse_bord_point(space: SpaceModel, spec: Any) -> Any:
    """Parse either an interior point or a boundary point from config."""
    if isinstance(spec, dict) and "boundary" in spec:
        return parse_boundary_point(space, spec["boundary"])
    if isinstance(spec, dict) and "point" in spec:
        return space.parse_point(spec["point"])
    raise InvalidPoint(f"net entries need a 'point' or 'boundary' key, got {spec!r}")


def check_bord_point(space: SpaceModel, p: Any) -> Any:
    if is_boundary_point(p):
        return check_boundary_point(space, p)
    return space.check_point(p)


def same_bord_point(space: SpaceModel, p: Any, q: Any) -> bool:
    if isinstance(space, UpperHalfPlane):
        if isinstance(p, RealEnd) and isinstance(q, RealEnd):
            if p.is_infinite or q.is_infinite:
                return p.x == q.x
            return abs(p.x - q.x) <= 1e-12 * max(1.0, abs(p.x))
        if isinstance(p, complex) and isinstance(q, complex):
            return abs(p - q) <= 1e-12 * max(1.0, abs(p))
        return False
    return p == q


# --------------------------------------------------------------------------
# Half-plane closed forms
# --------------------------------------------------------------------------

def busemann_halfplane(xi: RealEnd, z: complex) -> float:
    """Busemann function of ``xi`` normalized to vanish at i."""
    if xi.is_infinite:
        return -math.log(z.imag)
    t = xi.x
    return math.log(((z.real - t) ** 2 + z.imag ** 2) / z.imag) - math.log1p(t * t)


def _halfplane_translation(y: complex) -> SL2:
    """Isometry taking i to y."""
    s = math.sqrt(y.imag)
    return SL2(s, y.real / s, 0.0, 1 / s)


def mobius_boundary(g: SL2, xi: RealEnd) -> RealEnd:
    if xi.is_infinite:
        return RealEnd(INF) if g.c == 0 else RealEnd(g.a / g.c)
    den = g.c * xi.x + g.d
    if den == 0:
        return RealEnd(INF)
    return RealEnd((g.a * xi.x + g.b) / den)


def _hdist(z: complex, w: complex) -> float:
    return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))


def _halfplane_product_at_i(p: Any, q: Any) -> float:
    d = _hdist
    if isinstance(p, RealEnd) and isinstance(q, RealEnd):
        if p == q:
            return INF
        if p.is_infinite:
            return 0.5 * math.log1p(q.x * q.x)
        if q.is_infinite:
            return 0.5 * math.log1p(p.x * p.x)
        diff = abs(p.x - q.x)
        if diff == 0:
            return INF
        return 0.5 * (math.log1p(p.x * p.x) + math.log1p(q.x * q.x)) - math.log(diff)
    if isinstance(p, RealEnd):
        p, q = q, p
    if isinstance(q, RealEnd):
        return 0.5 * (d(p, 1j) - busemann_halfplane(q, p))
    return 0.5 * (d(p, 1j) + d(q, 1j) - d(p, q))


# --------------------------------------------------------------------------
# Extended Gromov product
# --------------------------------------------------------------------------

def _tree_product_at_e(p: Any, q: Any) -> float:
    if isinstance(p, TreeEnd) and isinstance(q, TreeEnd):
        if p == q:
            return INF
        bound = len(p.prefix) + len(q.prefix) + len(p.period) * len(q.period) + 1
        return common_prefix_length(p.letters(bound), q.letters(bound))
    if isinstance(p, TreeEnd):
        p, q = q, p
    if isinstance(q, TreeEnd):
        return common_prefix_length(p, q.letters(len(p)))
    return common_prefix_length(p, q)


def _star_far_point(xi: RayEnd, reach: float) -> StarPoint:
    return StarPoint(xi.ray, reach)


def boundary_gromov_product(space: SpaceModel, xi: Any, eta: Any, base: Any = None) -> float:
    """Gromov product of two Bord-points; ``inf`` iff both are the same boundary point."""
    xi = check_bord_point(space, xi)
    eta = check_bord_point(space, eta)
    if base is None:
        base = space.basepoint
    base = space.check_point(base)
    if isinstance(space, FreeGroupTree):
        if base:
            shift = word_inverse(base)
            xi = boundary_action(space, shift, xi)
            eta = boundary_action(space, shift, eta)
        return _tree_product_at_e(xi, eta)
    if isinstance(space, UpperHalfPlane):
        if base != 1j:
            shift = _halfplane_translation(base).inverse()
            xi = boundary_action(space, shift, xi)
            eta = boundary_action(space, shift, eta)
        return _halfplane_product_at_i(xi, eta)
    if isinstance(space, StarSpace):
        if isinstance(xi, RayEnd) and isinstance(eta, RayEnd) and xi == eta:
            return INF
        # Far enough along a ray every product is constant: replace ends by far points.
        reach = 1.0 + 2.0 * sum(
            p.radius for p in (xi, eta, base) if isinstance(p, StarPoint)
        )
        x = _star_far_point(xi, reach) if isinstance(xi, RayEnd) else xi
        y = _star_far_point(eta, reach + 1.0) if isinstance(eta, RayEnd) else eta
        return space.gromov_product(x, y, base)
    raise InvalidPoint(f"unsupported space {space!r}")


def rho_b(space: SpaceModel, config: VisualConfig, xi: Any, eta: Any, base: Any = None) -> float:
    """Visual quasi-metric b^(-⟨xi, eta⟩_base)."""
    p = boundary_gromov_product(space, xi, eta, base)
    if p == INF:
        return 0.0
    return config.b ** (-p)


# --------------------------------------------------------------------------
# Chain metric brackets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _tree_encode(points: Sequence[Any], width: int) -> tuple[np.ndarray, np.ndarray]:
    letters = np.zeros((len(points), width), dtype=np.int16)
    lengths = np.empty(len(points))
    for i, p in enumerate(points):
        if isinstance(p, TreeEnd):
            w = p.letters(width)
            lengths[i] = INF
        else:
            w = p[:width]
            lengths[i] = len(p)
        letters[i, : len(w)] = w
    return letters, lengths


def _tree_width(points: Sequence[Any]) -> int:
    # Two distinct eventually periodic words differ within max prefix + p1 + p2 letters.
    width = 1
    prefix = period = 0
    for p in points:
        if isinstance(p, TreeEnd):
            prefix = max(prefix, len(p.prefix))
            period = max(period, len(p.period))
        else:
            width = max(width, len(p) + 1)
    return max(width, prefix + 2 * period + 1)


def _tree_product_matrix(ps: Sequence[Any], qs: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    width = _tree_width(list(ps) + list(qs))
    P, lp = _tree_encode(ps, width)
    Q, lq = _tree_encode(qs, width)
    eq = P[:, None, :] == Q[None, :, :]
    full = eq.all(axis=2)
    cpl = np.where(full, width, np.argmin(eq, axis=2)).astype(float)
    prod = np.minimum(cpl, np.minimum(lp[:, None], lq[None, :]))
    both_ends = np.isinf(lp)[:, None] & np.isinf(lq)[None, :]
    prod[both_ends & full] = INF
    same = full & (lp[:, None] == lq[None, :])
    return prod, same


def product_matrix(space: SpaceModel, ps: Sequence[Any], qs: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    """Gromov products at the basepoint for all pairs, plus a mask of coinciding pairs."""
    if not len(ps) or not len(qs):
        return np.zeros((len(ps), len(qs))), np.zeros((len(ps), len(qs)), dtype=bool)
    if isinstance(space, FreeGroupTree):
        return _tree_product_matrix(ps, qs)
    prod = np.empty((len(ps), len(qs)))
    same = np.zeros((len(ps), len(qs)), dtype=bool)
    for i, p in enumerate(ps):
        for j, q in enumerate(qs):
            if same_bord_point(space, p, q):
                same[i, j] = True
                prod[i, j] = INF if is_boundary_point(p) else space.distance(p, space.basepoint)
            else:
                prod[i, j] = boundary_gromov_product(space, p, q)
    return prod, same


def rho_matrix(space: SpaceModel, config: VisualConfig, ps: Sequence[Any], qs: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    """rho_b for all pairs, set to 0 on coinciding pairs, plus the coincidence mask."""
    prod, same = product_matrix(space, ps, qs)
    with np.errstate(over="ignore"):
        rho = np.power(config.b, -prod)
    rho[same] = 0.0
    return rho, same


def product_pairs(space: SpaceModel, ps: Sequence[Any], qs: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise Gromov products ⟨ps[i], qs[i]⟩ at the basepoint, plus coincidence flags."""
    if len(ps) != len(qs):
        raise InvalidNet("pair lists differ in length")
    if not len(ps):
        return np.zeros(0), np.zeros(0, dtype=bool)
    if isinstance(space, FreeGroupTree):
        width = _tree_width(list(ps) + list(qs))
        P, lp = _tree_encode(ps, width)
        Q, lq = _tree_encode(qs, width)
        eq = P == Q
        full = eq.all(axis=1)
        cpl = np.where(full, width, np.argmin(eq, axis=1)).astype(float)
        prod = np.minimum(cpl, np.minimum(lp, lq))
        prod[full & np.isinf(lp) & np.isinf(lq)] = INF
        return prod, full & (lp == lq)
    prod = np.empty(len(ps))
    same = np.zeros(len(ps), dtype=bool)
    for i, (p, q) in enumerate(zip(ps, qs)):
        if same_bord_point(space, p, q):
            same[i] = True
            prod[i] = INF if is_boundary_point(p) else space.distance(p, space.basepoint)
        else:
            prod[i] = boundary_gromov_product(space, p, q)
    return prod, same


def horofunction_matrix(space: SpaceModel, anchors: Sequence[Any], gs: Sequence[Any]) -> np.ndarray:
    """h_anchor(g x0) for every anchor (rows) and isometry (columns).

    Both anchor kinds obey h(z) = d(z, x0) - 2⟨z, anchor⟩_x0, which on trees
    reduces the whole table to one vectorized product matrix.
    """
    if isinstance(space, FreeGroupTree):
        prod, _ = product_matrix(space, anchors, list(gs))
        lengths = np.array([len(g) for g in gs], dtype=float)
        return lengths[None, :] - 2 * prod
    out = np.empty((len(anchors), len(gs)))
    for j, g in enumerate(gs):
        for i, a in enumerate(anchors):
            out[i, j] = horofunction_at_isometry(space, Horofunction(a), g)
    return out


class ChainNet:
    """Weighted complete graph on a finite net with edge weights rho_b.

    ``upper(p, q)`` is the cheapest chain p → (net points)* → q, an
    over-estimate of the Frink infimum that only improves as the net grows.
    Arbitrary endpoints are allowed; they are attached to the net on the fly.
    """

    def __init__(self, space: SpaceModel, config: VisualConfig, net: Sequence[Any]):
        self.space = space
        self.config = config
        self.points = [check_bord_point(space, p) for p in net]
        n = len(self.points)
        w, _ = rho_matrix(space, config, self.points, self.points)
        self.weights = w
        if n:
            # zero-weight edges (coincident ends) must survive the sparse conversion
            self.paths = shortest_path(np.where(w == 0, 1e-300, w), method="D", directed=False)
            np.fill_diagonal(self.paths, 0.0)
            self.paths[self.paths <= 1e-299] = 0.0
        else:
            self.paths = w

    def __len__(self) -> int:
        return len(self.points)

    def index(self, p: Any) -> int:
        for i, q in enumerate(self.points):
            if same_bord_point(self.space, p, q):
                return i
        raise InvalidNet(f"{p!r} is not in the net")

    def upper(self, p: Any, q: Any) -> float:
        return float(self.upper_matrix([p], [q])[0, 0])

    def upper_matrix(self, ps: Sequence[Any], qs: Sequence[Any]) -> np.ndarray:
        """Upper bounds for every pair (ps[i], qs[j])."""
        out, _ = rho_matrix(self.space, self.config, ps, qs)
        if self.points and len(ps) and len(qs):
            a, _ = rho_matrix(self.space, self.config, ps, self.points)
            c, _ = rho_matrix(self.space, self.config, qs, self.points)
            e = np.min(self.paths[None, :, :] + c[:, None, :], axis=2)  # (len(qs), n)
            via = np.min(a[:, None, :] + e[None, :, :], axis=2)
            out = np.minimum(out, via)
        return out

    def upper_pairs(self, ps: Sequence[Any], qs: Sequence[Any]) -> np.ndarray:
        """Elementwise upper bounds for the pairs (ps[i], qs[i])."""
        prod, same = product_pairs(self.space, ps, qs)
        with np.errstate(over="ignore"):
            out = np.power(self.config.b, -prod)
        out[same] = 0.0
        if self.points and len(ps):
            a, _ = rho_matrix(self.space, self.config, ps, self.points)
            c, _ = rho_matrix(self.space, self.config, qs, self.points)
            via = np.min(a[:, :, None] + self.paths[None, :, :] + c[:, None, :], axis=(1, 2))
            out = np.minimum(out, via)
        return out

    def bracket(self, p: Any, q: Any) -> Bracket:
        if same_bord_point(self.space, p, q):
            return Bracket(0.0, 0.0)
        return Bracket(rho_b(self.space, self.config, p, q) / 4.0, self.upper(p, q))


def bar_D_b(space: SpaceModel, config: VisualConfig, xi: Any, eta: Any, net: Sequence[Any]) -> Bracket:
    """Bracket on the Frink chain metric: lower rho_b/4, upper shortest path through ``net``."""
    chain = ChainNet(space, config, net)
    if same_bord_point(space, xi, eta):
        chain.index(xi)
        return Bracket(0.0, 0.0)
    i, j = chain.index(xi), chain.index(eta)
    rho = chain.weights[i, j]
    return Bracket(rho / 4.0, float(chain.paths[i, j]))


def _interior_distance(space: SpaceModel, xi: Any, eta: Any) -> float:
    if is_boundary_point(xi) or is_boundary_point(eta):
        return INF
    return float(space.distance(xi, eta))


def D_b(space: SpaceModel, config: VisualConfig, xi: Any, eta: Any, net: Sequence[Any]) -> Bracket:
    """Bracket on min{log(b) d, D̄_b}; boundary pairs never take the distance branch."""
    chain_bracket = bar_D_b(space, config, xi, eta, net)
    return _clip(config, _interior_distance(space, xi, eta), chain_bracket)


def _clip(config: VisualConfig, d: float, br: Bracket) -> Bracket:
    if d == INF:
        return br
    ld = config.log_b * d
    return Bracket(min(ld, br.lower), min(ld, br.upper))


def D_b_upper(chain: ChainNet, p: Any, q: Any) -> float:
    """Upper end of the D_b bracket for arbitrary endpoints attached to ``chain``."""
    up = chain.upper(p, q)
    d = _interior_distance(chain.space, p, q)
    return up if d == INF else min(up, chain.config.log_b * d)


def D_b_bracket(chain: ChainNet, p: Any, q: Any) -> Bracket:
    return _clip(chain.config, _interior_distance(chain.space, p, q), chain.bracket(p, q))


# --------------------------------------------------------------------------
# Actions
# --------------------------------------------------------------------------

def boundary_action(space: SpaceModel, g: Any, xi: Any) -> Any:
    """g·xi for a Bord-point; interior points use the ordinary action."""
    if not is_boundary_point(xi):
        return space.apply(g, xi)
    xi = check_boundary_point(space, xi)
    g = space.check_isometry(g)
    if isinstance(space, FreeGroupTree):
        return tree_end(word_multiply(g, xi.prefix), xi.period)
    if isinstance(space, UpperHalfPlane):
        return mobius_boundary(g, xi)
    if isinstance(space, StarSpace):
        return RayEnd(g.perm[xi.ray])
    raise InvalidPoint(f"unsupported space {space!r}")


@dataclass(frozen=True)
class Horofunction:
    """Horofunction anchored at an interior point (h_x) or a boundary point (h_xi)."""

    anchor: Any

    @property
    def is_boundary(self) -> bool:
        return is_boundary_point(self.anchor)


def horofunction_eval(space: SpaceModel, h: Horofunction, z: Any) -> float:
    """h_x(z) = d(z, x) - d(x, x0);  h_xi(z) = d(z, x0) - 2⟨z, xi⟩_x0."""
    z = space.check_point(z)
    x0 = space.basepoint
    if not h.is_boundary:
        return space.distance(z, h.anchor) - space.distance(h.anchor, x0)
    xi = check_boundary_point(space, h.anchor)
    if isinstance(space, FreeGroupTree):
        return len(z) - 2 * common_prefix_length(z, xi.letters(len(z)))
    if isinstance(space, UpperHalfPlane):
        return busemann_halfplane(xi, z)
    return space.distance(z, x0) - 2 * boundary_gromov_product(space, z, xi)


def horo_action(space: SpaceModel, g: Any, h: Horofunction) -> Horofunction:
    """g·h, realized by moving the anchor; agrees with h(g⁻¹z) - h(g⁻¹x0)."""
    return Horofunction(boundary_action(space, g, h.anchor))


def horofunction_at_isometry(space: SpaceModel, h: Horofunction, g: Any) -> float:
    """h(g x0), computed from the isometry without forming g x0 when possible."""
    if isinstance(space, UpperHalfPlane) and h.is_boundary:
        return busemann_at_matrix(h.anchor, g)
    return horofunction_eval(space, h, space.apply(g, space.basepoint))


def busemann_at_matrix(xi: RealEnd, g: SL2) -> float:
    """Busemann function of ``xi`` at g·i for det(g) = 1, cancellation-free."""
    if xi.is_infinite:
        return math.log(g.c * g.c + g.d * g.d)
    t = xi.x
    return math.log((g.a - t * g.c) ** 2 + (g.b - t * g.d) ** 2) - math.log1p(t * t)


# --------------------------------------------------------------------------
# Inequality checks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    displacement: float
    max_horofunction: float
    K: float
    lower_slack: float
    upper_slack: float

    def holds(self, tol: float = 0.0) -> bool:
        return self.lower_slack >= -tol and self.upper_slack >= -tol


def comparison_bound_check(
    space: SpaceModel, config: VisualConfig, xi: Any, eta: Any, g: Any
) -> ComparisonReport:
    """max h_i(g x0) ≤ d(g x0, x0) ≤ max h_i(g x0) + K with K = 2⟨xi, eta⟩ + 4 delta."""
    xi = check_boundary_point(space, xi)
    eta = check_boundary_point(space, eta)
    if same_bord_point(space, xi, eta):
        raise InvalidPair("comparison bound needs two distinct boundary points")
    d = space.displacement(g)
    m = max(
        horofunction_at_isometry(space, Horofunction(xi), g),
        horofunction_at_isometry(space, Horofunction(eta), g),
    )
    K = 2 * boundary_gromov_product(space, xi, eta) + 4 * space.delta
    return ComparisonReport(d, m, K, d - m, m + K - d)


@dataclass(frozen=True)
class VisualRatioReport:
    ratio_lower: float
    ratio_upper: float
    bound_lower: float
    bound_upper: float

    @property
    def certified_violation(self) -> bool:
        return self.ratio_upper < self.bound_lower or self.ratio_lower > self.bound_upper

    @property
    def consistent(self) -> bool:
        return not self.certified_violation


def visual_ratio_check(
    space: SpaceModel, config: VisualConfig, g: Any, xi: Any, eta: Any, net: Sequence[Any] | ChainNet
) -> VisualRatioReport:
    """Compare the bracketed D̄_b(g xi, g eta)/D̄_b(xi, eta) with C^{∓1} b^{-(h_xi + h_eta)(g⁻¹x0)/2}.

    A plain list net must be closed under ``g`` on the four points involved.
    """
    if same_bord_point(space, xi, eta):
        raise InvalidPair("visual ratio needs distinct points")
    gxi = boundary_action(space, g, xi)
    geta = boundary_action(space, g, eta)
    if isinstance(net, ChainNet):
        # a prebuilt chain net attaches the four endpoints on the fly
        chain = net
    else:
        chain = ChainNet(space, config, net)
        for p in (xi, eta, gxi, geta):
            chain.index(p)
    before = chain.bracket(xi, eta)
    after = chain.bracket(gxi, geta)
    ginv = space.inverse(g)
    expo = 0.5 * (
        horofunction_at_isometry(space, Horofunction(xi), ginv)
        + horofunction_at_isometry(space, Horofunction(eta), ginv)
    )
    base = config.b ** (-expo)
    lo = after.lower / before.upper if before.upper > 0 else INF
    hi = after.upper / before.lower if before.lower > 0 else INF
    return VisualRatioReport(lo, hi, base / config.C, base * config.C)


# --------------------------------------------------------------------------
# Nets
# --------------------------------------------------------------------------

def tree_depth_ends(space: FreeGroupTree, depth: int) -> list[TreeEnd]:
    """Ends w·(last letter of w)^∞ for every reduced word w of length ``depth`` ≥ 1."""
    if depth < 1:
        raise InvalidNet("depth must be at least 1")
    words: list[Word] = [()]
    for _ in range(depth):
        words = [w + (s,) for w in words for s in _letters(space.rank) if not w or w[-1] != -s]
    return [tree_end(w[:-1], (w[-1],)) for w in words]


def tree_words_up_to(space: FreeGroupTree, length: int) -> list[Word]:
    out: list[Word] = [()]
    frontier: list[Word] = [()]
    for _ in range(length):
        frontier = [w + (s,) for w in frontier for s in _letters(space.rank) if not w or w[-1] != -s]
        out.extend(frontier)
    return out


def _letters(rank: int) -> list[int]:
    return [s for i in range(1, rank + 1) for s in (i, -i)]


def halfplane_boundary_grid(count: int) -> list[RealEnd]:
    """Boundary points equally spaced in visual angle seen from i (∞ included)."""
    theta = np.pi * (2 * np.arange(count) / count - 1)
    pts = []
    for t in theta:
        if abs(t) >= np.pi - 1e-15 or t == -np.pi:
            pts.append(RealEnd(INF))
        else:
            pts.append(RealEnd(float(np.tan(t / 2))))
    return pts


def star_ends(space: StarSpace) -> list[RayEnd]:
    return [RayEnd(k) for k in range(space.ray_count)]


def sample_boundary_points(space: SpaceModel, rng: np.random.Generator, count: int) -> list:
    """Random boundary points: tree ends with prefixes up to 6 and periods up to 3
    letters, half-plane points uniform in visual angle, uniform star rays."""
    if isinstance(space, FreeGroupTree):
        out = []
        for _ in range(count):
            pre = space.random_word(rng, int(rng.integers(0, 7)))
            per = space.random_word(rng, int(rng.integers(1, 4)))
            out.append(tree_end(pre, per))
        return out
    if isinstance(space, UpperHalfPlane):
        theta = rng.uniform(-np.pi / 2, np.pi / 2, count)
        return [RealEnd(float(np.tan(t))) for t in theta]
    if isinstance(space, StarSpace):
        return [RayEnd(int(k)) for k in rng.integers(0, space.ray_count, count)]
    raise InvalidPoint(f"unsupported space {space!r}")


def default_boundary_net(space: SpaceModel, size: int = 2) -> list:
    """Depth-``size`` ends on trees, a 16·size point angular grid on the half-plane, all rays on stars."""
    if isinstance(space, FreeGroupTree):
        return tree_depth_ends(space, size)
    if isinstance(space, UpperHalfPlane):
        return halfplane_boundary_grid(16 * size)
    if isinstance(space, StarSpace):
        return star_ends(space)
    raise InvalidPoint(f"unsupported space {space!r}")


__all__ = [
    "VisualConfig",
    "TreeEnd",
    "RealEnd",
    "RayEnd",
    "Bracket",
    "ChainNet",
    "Horofunction",
    "tree_end",
    "boundary_gromov_product",
    "rho_b",
    "bar_D_b",
    "D_b",
    "horofunction_eval",
    "boundary_action",
    "horo_action",
    "comparison_bound_check",
    "visual_ratio_check",
    "RayPermutation",
]
