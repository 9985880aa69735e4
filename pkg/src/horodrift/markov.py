"""The boundary Markov operator Q_μ and its Hölder contraction diagnostics.

Conventions: Q_μ f(ξ) = Σ_g μ(g) f(g⁻¹ξ), and the boundary chain moves by
ξ_{k+1} = g_k⁻¹ ξ_k.  Suprema over ∂X and over horofunctions become maxima
over declared finite nets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Sequence

import numpy as np

from .boundary import (
    ChainNet,
    Horofunction,
    RealEnd,
    TreeEnd,
    VisualConfig,
    boundary_action,
    boundary_gromov_product,
    horofunction_matrix,
    is_boundary_point,
    product_pairs,
    same_bord_point,
    tree_end,
)
from .errors import InvalidAlpha, InvalidNet, SupportExplosion
from .groups import DEFAULT_CAP, FiniteSupportMeasure, check_alpha, power, powers, transport_cost
from .spaces import (
    SL2,
    FreeGroupTree,
    SpaceModel,
    StarSpace,
    UpperHalfPlane,
    word_inverse,
    word_multiply,
)
from .walks import increment_indices, map_chunks, run_matrix_walks, run_tree_walks

ALPHA_GRID = tuple(2.0 ** -j for j in range(1, 9))


# --------------------------------------------------------------------------
# Observables and the operator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryObservable:
    """A function on ∂X, evaluated pointwise."""

    name: str
    rule: Callable[[Any], float]

    def __call__(self, xi: Any) -> float:
        return float(self.rule(xi))

    def values(self, points: Sequence[Any]) -> np.ndarray:
        return np.array([self(p) for p in points])


def constant_observable(c: float = 1.0) -> BoundaryObservable:
    return BoundaryObservable(f"const({c})", lambda xi: c)


def visual_observable(space: SpaceModel, config: VisualConfig, anchor: Any, alpha: float = 1.0) -> BoundaryObservable:
    """ξ ↦ b^{-α⟨ξ, anchor⟩}, α-Hölder for the visual metric."""
    def rule(xi: Any) -> float:
        p = boundary_gromov_product(space, xi, anchor)
        return 0.0 if p == math.inf else config.b ** (-alpha * p)

    return BoundaryObservable(f"visual({anchor}, {alpha})", rule)


def markov_apply(space: SpaceModel, mu: FiniteSupportMeasure, f: BoundaryObservable, xi: Any) -> float:
    """(Q_μ f)(ξ) = Σ μ(g) f(g⁻¹ξ)."""
    return float(sum(p * f(boundary_action(space, space.inverse(g), xi)) for g, p in zip(mu.atoms, mu.weights)))


def markov_iterate(space: SpaceModel, mu: FiniteSupportMeasure, f: BoundaryObservable, n: int) -> BoundaryObservable:
    """Q_μ^n f as a new observable (evaluated by recursion, cost |supp μ|^n)."""
    out = f
    for _ in range(n):
        out = BoundaryObservable(f"Q({out.name})", _Q(space, mu, out))
    return out


@dataclass(frozen=True)
class _Q:
    space: SpaceModel
    mu: FiniteSupportMeasure
    f: BoundaryObservable

    def __call__(self, xi: Any) -> float:
        return markov_apply(self.space, self.mu, self.f, xi)


# --------------------------------------------------------------------------
# Empirical stationary measures
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalBoundaryMeasure:
    atoms: tuple
    weights: np.ndarray
    n: int
    trials: int
    seed: int
    start: Any

    def integrate(self, f: Callable[[Any], float]) -> float:
        return float(sum(w * f(x) for x, w in zip(self.atoms, self.weights)))

    def __len__(self) -> int:
        return len(self.atoms)


def _dedupe(points: Sequence[Any]) -> tuple[tuple, np.ndarray]:
    counts: dict[Any, int] = {}
    order: list[Any] = []
    for p in points:
        if p in counts:
            counts[p] += 1
        else:
            counts[p] = 1
            order.append(p)
    w = np.array([counts[p] for p in order], dtype=float)
    return tuple(order), w / w.sum()


@dataclass(frozen=True)
class _ChainJob:
    inv: FiniteSupportMeasure
    n: int
    seed: int
    start: Any
    stream: int

    def __call__(self, chunk: range) -> list:
        idx = increment_indices(self.inv.weights, self.n, self.seed, chunk, self.stream)
        space = self.inv.space
        if isinstance(space, FreeGroupTree):
            batch = run_tree_walks(self.inv, self.n, idx)
            return [
                tree_end(word_multiply(batch.word(i), self.start.prefix), self.start.period) for i in range(len(chunk))
            ]
        batch = run_matrix_walks(self.inv, self.n, idx)
        return [boundary_action(space, SL2(*row), self.start) for row in batch.N]


def inverse_measure(mu: FiniteSupportMeasure) -> FiniteSupportMeasure:
    return FiniteSupportMeasure.create(mu.space, mu.inverse_atoms(), mu.weights, tol=1e-9)


def stationary_estimate(
    mu: FiniteSupportMeasure, n: int, trials: int, start: Any, seed: int, workers: int = 1, stream: int = 1
) -> EmpiricalBoundaryMeasure:
    """Empirical law of ξ_n for the chain ξ_{k+1} = g_k⁻¹ ξ_k started at ``start``.

    ξ_n = (g_0 ⋯ g_{n-1})⁻¹ ξ_0 has the law of a right walk with inverted
    increments applied to ξ_0, which is what is simulated.
    """
    space = mu.space
    if not isinstance(space, (FreeGroupTree, UpperHalfPlane)):
        raise InvalidNet(f"stationary chains are simulated on trees and the half-plane, not {space!r}")
    if trials < 1:
        raise ValueError("need at least one trial")
    inv = inverse_measure(mu)
    pts = [p for part in map_chunks(_ChainJob(inv, n, seed, start, stream), trials, workers) for p in part]
    atoms, w = _dedupe(pts)
    return EmpiricalBoundaryMeasure(atoms, w, n, trials, seed, start)


def _tree_ultrametric_w(nu1: EmpiricalBoundaryMeasure, nu2: EmpiricalBoundaryMeasure, f: Callable[[int], float]) -> float:
    """Exact transport cost for a cost f(⟨ξ,η⟩) with f decreasing and f(∞) = 0.

    On a tree such a cost is an ultrametric and the optimal plan matches mass
    cylinder by cylinder: W = Σ_k (f(k) - f(k+1)) · ½ Σ_{|v|=k+1} |ν1(C_v) - ν2(C_v)|.
    """
    width = 1 + max(len(p.prefix) + 2 * len(p.period) for p in nu1.atoms + nu2.atoms)
    total = 0.0
    for k in range(width):
        mass: dict[tuple, float] = {}
        for atoms, w, sgn in ((nu1.atoms, nu1.weights, 1.0), (nu2.atoms, nu2.weights, -1.0)):
            for p, x in zip(atoms, w):
                key = p.letters(k + 1)
                mass[key] = mass.get(key, 0.0) + sgn * x
        diff = 0.5 * sum(abs(v) for v in mass.values())
        total += (f(k) - f(k + 1)) * diff
        if diff == 0.0:
            break
    # cylinders of depth `width` separate all distinct atoms; what is left is at cost f(width)
    return total + f(width) * diff if diff else total


def boundary_discrepancy(
    space: SpaceModel,
    config: VisualConfig,
    nu1: EmpiricalBoundaryMeasure,
    nu2: EmpiricalBoundaryMeasure,
    alpha: float = 1.0,
    bins: int = 256,
) -> float:
    """Transport distance between two empirical boundary measures, cost min(1, ρ_b)^α.

    Exact on trees.  Half-plane measures are binned in visual angle first,
    which moves the value by at most 2 min(1, ρ_b)^α of one bin.
    """
    alpha = check_alpha(alpha)
    if isinstance(space, FreeGroupTree):
        return _tree_ultrametric_w(nu1, nu2, lambda k: min(1.0, config.b ** (-k)) ** alpha)
    if isinstance(space, UpperHalfPlane):
        def angles(nu: EmpiricalBoundaryMeasure) -> np.ndarray:
            x = np.array([p.x for p in nu.atoms])
            return np.where(np.isinf(x), np.pi / 2, np.arctan(x))

        edges = np.linspace(-np.pi / 2, np.pi / 2, bins + 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
        h1 = np.bincount(np.clip(np.digitize(angles(nu1), edges) - 1, 0, bins - 1), nu1.weights, bins)
        h2 = np.bincount(np.clip(np.digitize(angles(nu2), edges) - 1, 0, bins - 1), nu2.weights, bins)
        keep1, keep2 = h1 > 0, h2 > 0
        diff = np.abs(np.sin(centers[keep1][:, None] - centers[keep2][None, :]))
        cost = np.minimum(1.0, diff ** config.log_b) ** alpha
        return transport_cost(cost, h1[keep1], h2[keep2])
    raise InvalidNet(f"no discrepancy for {space!r}")


def stationarity_residual(
    space: SpaceModel, mu: FiniteSupportMeasure, nu: EmpiricalBoundaryMeasure, f: BoundaryObservable
) -> float:
    """|∫ Q_μ f dν̂ − ∫ f dν̂|."""
    return abs(nu.integrate(lambda x: markov_apply(space, mu, f, x)) - nu.integrate(f))


# --------------------------------------------------------------------------
# Average Hölder constants
# --------------------------------------------------------------------------

def all_pairs(points: Sequence[Any]) -> list[tuple[Any, Any]]:
    return [(p, q) for p, q in combinations(points, 2)]


@dataclass(frozen=True)
class KAlphaEstimate:
    value: float
    n: int
    alpha: float
    pairs: int
    exact: bool
    bracket_width: float
    per_pair: np.ndarray = field(repr=False, default=None)


def _power_or_sample(
    mu: FiniteSupportMeasure, n: int, cap: int, samples: int, seed: int, stream: int = 2
) -> tuple[list, np.ndarray, bool]:
    """Atoms and weights of μ^n, exactly when feasible, else an equal-weight sample."""
    if len(mu) ** n <= cap:
        pm = power(mu, n, cap)
        return list(pm.atoms), pm.weights, True
    idx = increment_indices(mu.weights, n, seed, range(samples), stream)
    if isinstance(mu.space, FreeGroupTree):
        batch = run_tree_walks(mu, n, idx)
        gs = [batch.word(i) for i in range(samples)]
    else:
        batch = run_matrix_walks(mu, n, idx)
        gs = [(SL2(*row), l) for row, l in zip(batch.N, batch.L)]
    return gs, np.full(samples, 1.0 / samples), False


def _pair_points(pairs: Sequence[tuple[Any, Any]]) -> tuple[list, np.ndarray, np.ndarray]:
    index: dict[Any, int] = {}
    pts: list[Any] = []
    ii, jj = [], []
    for p, q in pairs:
        for x, bucket in ((p, ii), (q, jj)):
            if x not in index:
                index[x] = len(pts)
                pts.append(x)
            bucket.append(index[x])
    return pts, np.array(ii, dtype=int), np.array(jj, dtype=int)


def _validate_pairs(space: SpaceModel, pairs: Sequence[tuple[Any, Any]]) -> None:
    if not pairs:
        raise InvalidNet("pair net is empty")
    for p, q in pairs:
        if not (is_boundary_point(p) and is_boundary_point(q)) or same_bord_point(space, p, q):
            raise InvalidNet("pair nets hold pairs of distinct boundary points")


def ratio_table(
    space: SpaceModel,
    config: VisualConfig,
    gs: Sequence[Any],
    pairs: Sequence[tuple[Any, Any]],
    chain: ChainNet | None = None,
) -> tuple[np.ndarray, float]:
    """D(g⁻¹ξ, g⁻¹η) / D(ξ, η) for all g (rows) and pairs (columns), with upper brackets.

    On trees the upper bracket is ρ_b itself and the ratio is exactly
    b^{-(h_ξ(g x0) + h_η(g x0))/2}; that identity is used directly.  Returns the
    table and the largest relative bracket width seen.
    """
    pts, ii, jj = _pair_points(pairs)
    if isinstance(space, FreeGroupTree) and (chain is None or not len(chain)):
        H = horofunction_matrix(space, pts, gs)  # (points, gs)
        return config.b ** (-0.5 * (H[ii] + H[jj]).T), 0.0
    chain = chain or ChainNet(space, config, [])
    ps = [p for p, _ in pairs]
    qs = [q for _, q in pairs]
    base = chain.upper_pairs(ps, qs)
    out = np.empty((len(gs), len(pairs)))
    for r, g in enumerate(gs):
        if isinstance(g, tuple) and len(g) == 2 and isinstance(g[0], SL2):
            g = g[0]
        ginv = space.inverse(g)
        ips = [boundary_action(space, ginv, p) for p in ps]
        iqs = [boundary_action(space, ginv, q) for q in qs]
        out[r] = chain.upper_pairs(ips, iqs) / base
    return out, 3.0


def k_alpha_estimate(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    n: int,
    alpha: float,
    pair_net: Sequence[tuple[Any, Any]],
    samples: int = 20000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
    chain: ChainNet | None = None,
) -> KAlphaEstimate:
    """max over the pair net of E_{μ^n} (D(g⁻¹ξ, g⁻¹η)/D(ξ, η))^α."""
    alpha = check_alpha(alpha)
    if n < 1:
        raise ValueError("k_alpha needs n >= 1")
    _validate_pairs(space, pair_net)
    gs, w, exact = _power_or_sample(mu, n, cap, samples, seed)
    table, width = ratio_table(space, config, gs, pair_net, chain)
    per_pair = w @ table ** alpha
    return KAlphaEstimate(float(per_pair.max()), n, alpha, len(pair_net), exact, width, per_pair)


def image_pairs(space: SpaceModel, gs: Sequence[Any], pairs: Sequence[tuple[Any, Any]]) -> list[tuple[Any, Any]]:
    """{(g⁻¹ξ, g⁻¹η)} over g in ``gs`` and pairs, deduplicated."""
    seen: set = set()
    out = []
    for g in gs:
        ginv = space.inverse(g)
        for p, q in pairs:
            pair = (boundary_action(space, ginv, p), boundary_action(space, ginv, q))
            if pair not in seen:
                seen.add(pair)
                out.append(pair)
    return out


@dataclass(frozen=True)
class SubmultiplicativityReport:
    m: int
    n: int
    k_sum: float
    k_m: float
    k_n_images: float
    k_n_net: float

    @property
    def slack(self) -> float:
        return self.k_m * self.k_n_images - self.k_sum

    @property
    def holds(self) -> bool:
        return self.k_sum <= self.k_m * self.k_n_images * (1 + 1e-12) + 1e-15


def submultiplicativity_check(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    alpha: float,
    m: int,
    n: int,
    pair_net: Sequence[tuple[Any, Any]],
    cap: int = DEFAULT_CAP,
) -> SubmultiplicativityReport:
    """k^{m+n} ≤ k^m · k^n with all three computed exactly on nets.

    The inner factor k^n is taken over the images of the pair net under
    supp μ^m, since that is where the splitting g = g_1 g_2 evaluates it; over
    that net the inequality is a true statement about finite sums.  The value
    of k^n on the original net is reported alongside.
    """
    if len(mu) ** (m + n) > cap:
        raise SupportExplosion(f"|supp μ|^{m + n} exceeds the enumeration cap {cap}")
    k_sum = k_alpha_estimate(space, config, mu, m + n, alpha, pair_net, cap=cap).value
    k_m = k_alpha_estimate(space, config, mu, m, alpha, pair_net, cap=cap).value
    pm = power(mu, m, cap)
    images = image_pairs(space, pm.atoms, pair_net)
    k_img = k_alpha_estimate(space, config, mu, n, alpha, images, cap=cap).value
    k_net = k_alpha_estimate(space, config, mu, n, alpha, pair_net, cap=cap).value
    return SubmultiplicativityReport(m, n, k_sum, k_m, k_img, k_net)


def holder_constant(
    f: BoundaryObservable, pairs: Sequence[tuple[Any, Any]], D: np.ndarray, alpha: float
) -> float:
    """max over pairs of |f(ξ) − f(η)| / D(ξ, η)^α."""
    diffs = np.array([abs(f(p) - f(q)) for p, q in pairs])
    return float(np.max(diffs / D ** alpha))


@dataclass(frozen=True)
class ContractionStepReport:
    lhs: float
    k: float
    holder_images: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.k * self.holder_images * (1 + 1e-9) + 1e-12


def contraction_step_check(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    f: BoundaryObservable,
    n: int,
    alpha: float,
    pair_net: Sequence[tuple[Any, Any]],
    cap: int = DEFAULT_CAP,
) -> ContractionStepReport:
    """υ_α(Q_μ^n f) ≤ k_α^n · υ_α(f), with υ_α(f) taken over the image pairs."""
    pm = power(mu, n, cap)
    chain = ChainNet(space, config, [])
    Qf = BoundaryObservable("Qn f", lambda xi: markov_apply(space, pm, f, xi))
    base = chain.upper_pairs([p for p, _ in pair_net], [q for _, q in pair_net])
    lhs = holder_constant(Qf, pair_net, base, alpha)
    k = k_alpha_estimate(space, config, mu, n, alpha, pair_net, cap=cap).value
    images = image_pairs(space, pm.atoms, pair_net)
    img_D = chain.upper_pairs([p for p, _ in images], [q for _, q in images])
    return ContractionStepReport(lhs, k, holder_constant(f, images, img_D, alpha))


# --------------------------------------------------------------------------
# Contraction through horofunctions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionSearch:
    alpha: float | None
    n: int | None
    value: float | None
    table: tuple[tuple[float, int, float, bool], ...]  # (alpha, n, value, exact)

    @property
    def found(self) -> bool:
        return self.alpha is not None


def _horofunction_sums(
    space: SpaceModel,
    config: VisualConfig,
    gs: Sequence[Any],
    w: np.ndarray,
    anchors: Sequence[Any],
    alphas: Sequence[float],
) -> np.ndarray:
    """For each α: max over anchors of Σ_g w_g b^{-α h(g x0)}."""
    if gs and isinstance(gs[0], tuple) and len(gs[0]) == 2 and isinstance(gs[0][0], SL2):
        H = _scaled_horofunctions(anchors, gs)
    else:
        H = horofunction_matrix(space, anchors, gs)
    return np.array([float(np.max((config.b ** (-a * H)) @ w)) for a in alphas])


def _scaled_horofunctions(anchors: Sequence[Any], gs: Sequence[tuple[SL2, float]]) -> np.ndarray:
    from .walks import matrix_busemann

    N = np.array([g.entries for g, _ in gs])
    L = np.array([l for _, l in gs])
    rows = []
    for a in anchors:
        if isinstance(a, RealEnd):
            rows.append(matrix_busemann(a, N, L))
        else:
            raise InvalidNet("sampled half-plane products only support boundary anchors")
    return np.array(rows)


def contraction_upper_bound(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    n: int,
    alpha: float,
    horofunction_net: Sequence[Any],
    samples: int = 20000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> float:
    """C(δ)^α · max over the net of Σ_g μ^n(g) b^{-α h(g x0)}."""
    alpha = check_alpha(alpha)
    anchors = [h.anchor if isinstance(h, Horofunction) else h for h in horofunction_net]
    if not anchors:
        raise InvalidNet("horofunction net is empty")
    gs, w, _ = _power_or_sample(mu, n, cap, samples, seed)
    return float(config.C ** alpha * _horofunction_sums(space, config, gs, w, anchors, [alpha])[0])


def contraction_search(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    horofunction_net: Sequence[Any],
    n_max: int = 64,
    alphas: Sequence[float] = ALPHA_GRID,
    samples: int = 20000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> ContractionSearch:
    """Smallest n ≤ n_max (then largest α on the grid) with a contraction bound below 1.

    Powers are enumerated exactly while they fit under ``cap``; beyond that,
    μ^n is replaced by ``samples`` walks of length n.
    """
    for a in alphas:
        check_alpha(a)
    anchors = [h.anchor if isinstance(h, Horofunction) else h for h in horofunction_net]
    if not anchors:
        raise InvalidNet("horofunction net is empty")
    table = []
    exact_pows: list[FiniteSupportMeasure] = []
    for n in range(1, n_max + 1):
        exact = len(mu) ** n <= cap
        if exact:
            pm = mu if n == 1 else _next_power(exact_pows, mu, cap)
            exact_pows.append(pm)
            gs, w = list(pm.atoms), pm.weights
        else:
            gs, w, _ = _power_or_sample(mu, n, cap, samples, seed)
        sums = _horofunction_sums(space, config, gs, w, anchors, alphas)
        best = None
        for a, s in zip(alphas, sums):
            v = float(config.C ** a * s)
            table.append((float(a), n, v, exact))
            if v < 1 and best is None:
                best = (float(a), n, v)
        if best is not None:
            return ContractionSearch(best[0], best[1], best[2], tuple(table))
    return ContractionSearch(None, None, None, tuple(table))


def _next_power(prev: list[FiniteSupportMeasure], mu: FiniteSupportMeasure, cap: int) -> FiniteSupportMeasure:
    from .groups import convolve

    return convolve(prev[-1], mu, cap)


# --------------------------------------------------------------------------
# Irreducibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IrreducibilityReport:
    irreducible: bool
    fixed: tuple
    candidates_checked: int

    @property
    def verdict(self) -> str:
        if not self.irreducible:
            return "not irreducible"
        return "no fixed point among candidates"


def _tree_fixed_ends(g: tuple) -> list[TreeEnd]:
    """The two ends fixed by a nontrivial tree isometry w c w⁻¹: w c^{±∞}."""
    k = 0
    while k < len(g) // 2 and g[k] == -g[len(g) - 1 - k]:
        k += 1
    w, c = g[:k], g[k : len(g) - k]
    return [tree_end(w, c), tree_end(w, word_inverse(c))]


def _halfplane_fixed_points(g: SL2) -> list[Any]:
    a, b, c, d = g.entries
    tr = a + d
    if abs(c) < 1e-15:
        pts: list[Any] = [RealEnd(math.inf)]
        if abs(a - d) > 1e-12:
            pts.append(RealEnd(b / (d - a)))
        return pts
    disc = tr * tr - 4.0
    if disc > 1e-12:
        r = math.sqrt(disc)
        return [RealEnd(((a - d) + r) / (2 * c)), RealEnd(((a - d) - r) / (2 * c))]
    if disc >= -1e-12:
        return [RealEnd((a - d) / (2 * c))]
    r = math.sqrt(-disc)
    z = complex((a - d) / (2 * c), abs(r / (2 * c)))
    return [z]


def _fixes(space: SpaceModel, g: Any, anchor: Any) -> bool:
    image = boundary_action(space, g, anchor)
    if isinstance(space, UpperHalfPlane):
        if isinstance(anchor, RealEnd) and isinstance(image, RealEnd):
            if anchor.is_infinite or image.is_infinite:
                return anchor.is_infinite and image.is_infinite
            return abs(anchor.x - image.x) <= 1e-9 * max(1.0, abs(anchor.x))
        if isinstance(anchor, complex):
            return abs(image - anchor) <= 1e-9 * max(1.0, abs(anchor))
    return same_bord_point(space, image, anchor)


def irreducibility_check(
    space: SpaceModel, mu: FiniteSupportMeasure, candidates: Sequence[Any] = ()
) -> IrreducibilityReport:
    """Look for a horofunction fixed by every atom.

    g·h_a = h_{g a}, so a horofunction is fixed exactly when its anchor is.
    Candidates are the declared ones plus the fixed points of the first
    nontrivial atom (a common fixed point must be among them).
    """
    anchors = [h.anchor if isinstance(h, Horofunction) else h for h in candidates]
    nontrivial = [g for g in mu.atoms if not space.is_identity(g)]
    if isinstance(space, StarSpace) or not nontrivial:
        anchors.append(space.basepoint)
    elif isinstance(space, FreeGroupTree):
        anchors.extend(_tree_fixed_ends(nontrivial[0]))
    elif isinstance(space, UpperHalfPlane):
        anchors.extend(_halfplane_fixed_points(nontrivial[0]))
    fixed = tuple(a for a in anchors if all(_fixes(space, g, a) for g in mu.atoms))
    return IrreducibilityReport(not fixed, fixed, len(anchors))
