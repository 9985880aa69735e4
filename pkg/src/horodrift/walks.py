"""Seeded Monte-Carlo simulation of right random walks ω^n = g_0 g_1 ⋯ g_{n-1}.

Every trial draws its increments from its own counter-based stream keyed by
``(seed, stream, trial)``, so results do not depend on batching, on chunk
order or on the number of worker processes.

Two vectorized engines run many trials at once:

* trees keep each reduced word as a row of a letter stack;
* the half-plane keeps ``exp(L) · N`` with ``N`` entrywise bounded, which
  survives products far beyond the range of double precision.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .boundary import (
    Horofunction,
    RealEnd,
    TreeEnd,
    busemann_at_matrix,
    horofunction_eval,
    tree_end,
)
from .errors import InsufficientEscape, InvalidMeasure
from .groups import DEFAULT_CAP, FiniteSupportMeasure, powers
from .spaces import SL2, FreeGroupTree, SpaceModel, UpperHalfPlane, Word, is_reduced

TRIAL_CHUNK = 2000
Z95 = 1.959963984540054


# --------------------------------------------------------------------------
# Randomness
# --------------------------------------------------------------------------

def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one trial; ``stream`` separates experiments."""
    if trial >= 1 << 40 or stream >= 1 << 24:
        raise ValueError("trial or stream index too large")
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (stream << 40) | trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def increment_indices(
    weights: np.ndarray, n: int, seed: int, trials: Sequence[int], stream: int = 0
) -> np.ndarray:
    """Atom indices of shape (len(trials), n) by inverse-CDF sampling."""
    cum = np.cumsum(weights)
    cum /= cum[-1]
    out = np.empty((len(trials), n), dtype=np.int32)
    for row, t in enumerate(trials):
        u = trial_rng(seed, t, stream).random(n)
        out[row] = np.searchsorted(cum, u, side="right")
    np.minimum(out, len(weights) - 1, out=out)
    return out


# --------------------------------------------------------------------------
# Engines
# --------------------------------------------------------------------------

@dataclass
class TreeBatch:
    """Final reduced words of a batch of tree walks, plus recorded checkpoints."""

    stack: np.ndarray  # (trials, capacity) int8 letters
    length: np.ndarray  # (trials,) int
    checkpoint_lengths: dict[int, np.ndarray] = field(default_factory=dict)
    checkpoint_stacks: dict[int, np.ndarray] = field(default_factory=dict)

    def word(self, i: int) -> Word:
        return tuple(int(s) for s in self.stack[i, : self.length[i]])

    def checkpoint_word(self, step: int, i: int) -> Word:
        return tuple(int(s) for s in self.checkpoint_stacks[step][i, : self.checkpoint_lengths[step][i]])


def _atom_letters(mu: FiniteSupportMeasure) -> np.ndarray:
    width = max(1, max(len(g) for g in mu.atoms))
    A = np.zeros((len(mu.atoms), width), dtype=np.int8)
    for i, g in enumerate(mu.atoms):
        A[i, : len(g)] = g
    return A


def run_tree_walks(
    mu: FiniteSupportMeasure,
    n: int,
    idx: np.ndarray,
    lengths_at: Sequence[int] = (),
    stacks_at: Sequence[int] = (),
) -> TreeBatch:
    """Right-multiply increments letter by letter on a stack per trial."""
    A = _atom_letters(mu)
    trials = idx.shape[0]
    cap = n * A.shape[1] + 1
    stack = np.zeros((trials, cap), dtype=np.int8)
    length = np.zeros(trials, dtype=np.int64)
    rows = np.arange(trials)
    lengths_at = set(lengths_at) | set(stacks_at)
    out_len: dict[int, np.ndarray] = {}
    out_stack: dict[int, np.ndarray] = {}
    if 0 in lengths_at:
        out_len[0] = length.copy()
    if 0 in stacks_at:
        out_stack[0] = stack[:, :1].copy()
    for step in range(n):
        letters = A[idx[:, step]]
        for j in range(A.shape[1]):
            s = letters[:, j]
            top = stack[rows, np.maximum(length - 1, 0)]
            cancel = (length > 0) & (top == -s) & (s != 0)
            push = (s != 0) & ~cancel
            length -= cancel
            stack[rows[push], length[push]] = s[push]
            length += push
        k = step + 1
        if k in lengths_at:
            out_len[k] = length.copy()
        if k in stacks_at:
            out_stack[k] = stack[:, : max(1, int(length.max()))].copy()
    return TreeBatch(stack[:, : max(1, int(length.max()))], length, out_len, out_stack)


@dataclass
class MatrixBatch:
    """Walk products exp(L)·N for a batch of half-plane walks."""

    N: np.ndarray  # (trials, 4) as a, b, c, d
    L: np.ndarray  # (trials,)
    checkpoints: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def displacement(self) -> np.ndarray:
        return matrix_displacement(self.N, self.L)


def matrix_displacement(N: np.ndarray, L: np.ndarray) -> np.ndarray:
    """d(g i, i) = acosh(|g|_F^2 / 2) for g = exp(L) N, stable for huge L."""
    logy = 2 * L + np.log(0.5 * np.sum(N * N, axis=-1))
    small = np.arccosh(np.maximum(np.exp(np.minimum(logy, 30.0)), 1.0))
    # acosh(y) = log(2y) + O(y^-2)
    return np.where(logy > 30, logy + math.log(2.0), small)


def run_matrix_walks(mu: FiniteSupportMeasure, n: int, idx: np.ndarray, checkpoints_at: Sequence[int] = ()) -> MatrixBatch:
    E = np.array([g.entries for g in mu.atoms])
    trials = idx.shape[0]
    a = np.ones(trials)
    b = np.zeros(trials)
    c = np.zeros(trials)
    d = np.ones(trials)
    L = np.zeros(trials)
    cps: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    want = set(checkpoints_at)
    if 0 in want:
        cps[0] = (np.stack([a, b, c, d], axis=1), L.copy())
    for step in range(n):
        e = E[idx[:, step]]
        a, b, c, d = (
            a * e[:, 0] + b * e[:, 2],
            a * e[:, 1] + b * e[:, 3],
            c * e[:, 0] + d * e[:, 2],
            c * e[:, 1] + d * e[:, 3],
        )
        s = np.maximum.reduce([np.abs(a), np.abs(b), np.abs(c), np.abs(d)])
        a, b, c, d = a / s, b / s, c / s, d / s
        L += np.log(s)
        if step + 1 in want:
            cps[step + 1] = (np.stack([a, b, c, d], axis=1), L.copy())
    return MatrixBatch(np.stack([a, b, c, d], axis=1), L, cps)


def matrix_busemann(xi: RealEnd, N: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Busemann function of ``xi`` at g·i for g = exp(L)·N with det g = 1."""
    a, b, c, d = N.T
    if xi.is_infinite:
        return 2 * L + np.log(c * c + d * d)
    t = xi.x
    return 2 * L + np.log((a - t * c) ** 2 + (b - t * d) ** 2) - math.log1p(t * t)


def matrix_busemann_array(xs: np.ndarray, N: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Row-wise Busemann values for boundary reals ``xs`` (inf allowed)."""
    a, b, c, d = N.T
    inf = np.isinf(xs)
    t = np.where(inf, 0.0, xs)
    fin = 2 * L + np.log((a - t * c) ** 2 + (b - t * d) ** 2) - np.log1p(t * t)
    return np.where(inf, 2 * L + np.log(c * c + d * d), fin)


def _chunks(trials: int) -> list[range]:
    return [range(s, min(s + TRIAL_CHUNK, trials)) for s in range(0, trials, TRIAL_CHUNK)]


def map_chunks(fn: Callable[[range], Any], trials: int, workers: int = 1) -> list:
    """Run ``fn`` on fixed trial chunks; results come back in chunk order."""
    chunks = _chunks(trials)
    if workers <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
        return list(pool.map(fn, chunks))


def _check_walkable(mu: FiniteSupportMeasure) -> None:
    if not len(mu.atoms):
        raise InvalidMeasure("empty support")
    if not isinstance(mu.space, (FreeGroupTree, UpperHalfPlane)):
        raise InvalidMeasure(f"random walks are only simulated on trees and the half-plane, not {mu.space!r}")


# --------------------------------------------------------------------------
# Single walks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WalkSample:
    """One walk.  Half-plane products are stored normalized, with the log of the
    dropped scale in ``log_scale``; the true product is exp(log_scale)·product."""

    seed: int
    trial: int
    steps: int
    product: Any
    checkpoints: tuple[tuple[int, Any], ...]
    displacement: float
    increments: tuple[int, ...] = ()
    log_scale: float = 0.0
    checkpoint_scales: tuple[float, ...] = ()
    last_increment: Any = None


def sample_walk(
    mu: FiniteSupportMeasure,
    n: int,
    seed: int,
    trial: int = 0,
    checkpoint_every: int | None = None,
    stream: int = 0,
) -> WalkSample:
    """Draw one walk; checkpoints every ⌈n/32⌉ steps by default."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    space = mu.space
    if not len(mu.atoms):
        raise InvalidMeasure("empty support")
    idx = increment_indices(mu.weights, n, seed, [trial], stream)[0]
    every = checkpoint_every or max(1, math.ceil(n / 32))
    cps: list[tuple[int, Any]] = []
    scales: list[float] = []
    if isinstance(space, UpperHalfPlane):
        g = np.eye(2)
        L = 0.0
        for k, i in enumerate(idx, start=1):
            g = g @ np.array(mu.atoms[i].entries).reshape(2, 2)
            s = np.abs(g).max()
            g /= s
            L += math.log(s)
            if k % every == 0 or k == n:
                cps.append((k, SL2(*g.ravel())))
                scales.append(L)
        prod = SL2(*g.ravel())
        disp = float(matrix_displacement(np.array([prod.entries]), np.array([L]))[0])
        last = mu.atoms[idx[-1]] if n else None
        return WalkSample(seed, trial, n, prod, tuple(cps), disp, tuple(int(i) for i in idx), L, tuple(scales), last)
    g = space.identity()
    for k, i in enumerate(idx, start=1):
        g = space.compose(g, mu.atoms[i])
        if k % every == 0 or k == n:
            cps.append((k, g))
    last = mu.atoms[idx[-1]] if n else None
    return WalkSample(
        seed, trial, n, g, tuple(cps), float(space.displacement(g)), tuple(int(i) for i in idx), last_increment=last
    )


# --------------------------------------------------------------------------
# Drift
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftEstimate:
    mean: float
    trials: int
    n: int
    half_width: float
    seed: int
    fekete: tuple[tuple[int, float], ...] = ()

    @property
    def fekete_bound(self) -> float:
        """Smallest exact subadditive upper bound (1/m) E_{μ^m} d, or inf."""
        return min((v for _, v in self.fekete), default=math.inf)

    def excludes_zero(self) -> bool:
        return self.mean - self.half_width > 0


def walk_displacements(
    mu: FiniteSupportMeasure, n: int, seed: int, trial_ids: Sequence[int], stream: int = 0
) -> np.ndarray:
    """d(ω^n x0, x0) for the given trials."""
    idx = increment_indices(mu.weights, n, seed, trial_ids, stream)
    if isinstance(mu.space, FreeGroupTree):
        return run_tree_walks(mu, n, idx).length.astype(float)
    return run_matrix_walks(mu, n, idx).displacement()


@dataclass(frozen=True)
class _DisplacementJob:
    mu: FiniteSupportMeasure
    n: int
    seed: int
    stream: int

    def __call__(self, chunk: range) -> np.ndarray:
        return walk_displacements(self.mu, self.n, self.seed, chunk, self.stream)


def displacement_samples(
    mu: FiniteSupportMeasure, n: int, trials: int, seed: int, workers: int = 1, stream: int = 0
) -> np.ndarray:
    _check_walkable(mu)
    if n == 0:
        return np.zeros(trials)
    return np.concatenate(map_chunks(_DisplacementJob(mu, n, seed, stream), trials, workers))


def exact_mean_displacements(mu: FiniteSupportMeasure, m_max: int, cap: int = DEFAULT_CAP) -> list[tuple[int, float]]:
    """(m, E_{μ^m} d) for m = 1.. while exact enumeration stays under ``cap``."""
    out = []
    k = len(mu.atoms)
    m_top = 0
    while m_top < m_max and k ** (m_top + 1) <= cap:
        m_top += 1
    if m_top == 0:
        return out
    for m, pm in enumerate(powers(mu, m_top, cap), start=1):
        out.append((m, pm.mean_displacement()))
    return out


def drift_estimate(
    mu: FiniteSupportMeasure,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    fekete_max_m: int = 6,
    cap: int = DEFAULT_CAP,
    stream: int = 0,
) -> DriftEstimate:
    """Mean of d(ω^n x0, x0)/n with a 95% normal interval and exact Fekete bounds."""
    if n < 1 or trials < 2:
        raise ValueError("drift estimate needs n >= 1 and trials >= 2")
    x = displacement_samples(mu, n, trials, seed, workers, stream) / n
    mean = float(np.mean(x))
    hw = float(Z95 * np.std(x, ddof=1) / math.sqrt(trials))
    fek = tuple((m, v / m) for m, v in exact_mean_displacements(mu, fekete_max_m, cap))
    return DriftEstimate(mean, trials, n, hw, seed, fek)


# --------------------------------------------------------------------------
# Forward limits
# --------------------------------------------------------------------------

def tree_forward_limit(word: Word, last_increment: Word | None, depth: int) -> TreeEnd:
    """Boundary representative agreeing with ``word`` on all its letters.

    The last increment is used as period when it continues the word without
    cancellation and is cyclically reduced (this recovers (ab)^∞ from (ab)^n);
    otherwise the last letter is repeated.
    """
    if len(word) < max(depth, 1):
        raise InsufficientEscape(f"walk reached length {len(word)} < depth {max(depth, 1)}")
    u = last_increment or ()
    if u and is_reduced(word + u) and is_reduced(u + u[:1]) and word[-len(u):] == u:
        return tree_end(word, u)
    return tree_end(word, word[-1:])


def attracting_fixed_point(g: SL2, log_scale: float = 0.0) -> RealEnd:
    """Attracting boundary fixed point when hyperbolic, else the endpoint of the ray i → g·i."""
    a, b, c, d = g.entries
    tr = a + d
    scaled_tr = abs(tr) * math.exp(min(log_scale, 700.0))
    if scaled_tr > 2.0 and log_scale < 20:
        disc = math.sqrt(tr * tr - 4.0 * math.exp(-2 * log_scale))
        if c == 0:
            return RealEnd(math.inf) if abs(a) > abs(d) else RealEnd(b / (d - a))
        roots = [((a - d) + disc) / (2 * c), ((a - d) - disc) / (2 * c)]
        # attracting iff |c x + d| > |a d - b c|^{1/2}
        det_sqrt = math.exp(-log_scale)
        return RealEnd(max(roots, key=lambda x: abs(c * x + d) / det_sqrt))
    if log_scale >= 20:
        # huge norm: g maps almost every boundary point near a/c
        return RealEnd(math.inf) if c == 0 else RealEnd(a / c)
    return boundary_direction((a * 1j + b) / (c * 1j + d))


def boundary_direction(z: complex) -> RealEnd:
    """Boundary endpoint of the geodesic ray from i through z."""
    w = (z - 1j) / (z + 1j)
    if abs(w) == 0:
        return RealEnd(0.0)
    u = w / abs(w)
    if abs(1 - u) < 1e-300:
        return RealEnd(math.inf)
    x = 1j * (1 + u) / (1 - u)
    return RealEnd(float(x.real))


def forward_limit(space: SpaceModel, walk: WalkSample, depth: int = 1) -> Any:
    """Boundary point the walk product points to, read at the walk's end."""
    if walk.steps == 0 and depth >= 1:
        raise InsufficientEscape("empty walk has no forward limit")
    if isinstance(space, FreeGroupTree):
        return tree_forward_limit(walk.product, walk.last_increment, depth)
    if isinstance(space, UpperHalfPlane):
        return attracting_fixed_point(walk.product, walk.log_scale)
    raise InsufficientEscape(f"no forward limits on {space!r}")


# --------------------------------------------------------------------------
# Horofunction growth along the walk
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HMETReport:
    """Horofunction growth rates against the drift on the same walks.

    ``plus`` uses a probe fixed in advance and evaluates (1/n) h(ω^n x0).
    ``minus`` anchors at the walk's own forward limit, read from ω^n, and
    evaluates (1/m) h(ω^m x0) at the checkpoint m < n.
    """

    plus_mean: float
    plus_half_width: float
    minus_mean: float
    minus_half_width: float
    drift: DriftEstimate
    n: int
    checkpoint: int
    trials: int
    seed: int
    lipschitz_ok: bool

    def within(self, target: float, tol: float) -> tuple[bool, bool]:
        return abs(self.plus_mean - target) <= tol, abs(self.minus_mean + target) <= tol


def _tree_probe_values(batch: TreeBatch, probe: TreeEnd) -> np.ndarray:
    width = batch.stack.shape[1]
    letters = np.array(probe.letters(width), dtype=np.int8)
    eq = batch.stack == letters[None, :]
    cpl = np.where(eq.all(axis=1), width, np.argmin(eq, axis=1))
    cpl = np.minimum(cpl, batch.length)
    return (batch.length - 2 * cpl).astype(float)


@dataclass(frozen=True)
class _HMETJob:
    mu: FiniteSupportMeasure
    probe: Any
    n: int
    m: int
    depth: int
    seed: int
    stream: int

    def __call__(self, chunk: range) -> np.ndarray:
        """Rows of (displacement, h_probe(ω^n), h_own(ω^m), d(ω^m)) per trial."""
        mu, n, m = self.mu, self.n, self.m
        idx = increment_indices(mu.weights, n, self.seed, chunk, self.stream)
        out = np.empty((len(chunk), 4))
        if isinstance(mu.space, FreeGroupTree):
            batch = run_tree_walks(mu, n, idx, stacks_at=[m])
            out[:, 0] = batch.length
            out[:, 1] = _tree_probe_values(batch, self.probe)
            out[:, 3] = batch.checkpoint_lengths[m]
            for i in range(len(chunk)):
                xi = tree_forward_limit(batch.word(i), mu.atoms[idx[i, -1]], self.depth)
                out[i, 2] = horofunction_eval(mu.space, Horofunction(xi), batch.checkpoint_word(m, i))
            return out
        batch = run_matrix_walks(mu, n, idx, checkpoints_at=[m])
        Nm, Lm = batch.checkpoints[m]
        out[:, 0] = batch.displacement()
        out[:, 1] = matrix_busemann(self.probe, batch.N, batch.L)
        # The own limit is ω^m η with η the limit of the tail g_m ⋯ g_{n-1}.
        # The cocycle identity h_{gη}(g i) = -h_η(g⁻¹ i) avoids evaluating a
        # Busemann function at a point that is e^{-ℓm}-close to its anchor.
        tail = run_matrix_walks(mu, n - m, idx[:, m:])
        eta = np.array([attracting_fixed_point(SL2(*row), l).x for row, l in zip(tail.N, tail.L)])
        a, b, c, d = Nm.T
        inv = np.stack([d, -b, -c, a], axis=1)
        out[:, 2] = -matrix_busemann_array(eta, inv, Lm)
        out[:, 3] = matrix_displacement(Nm, Lm)
        return out


def hmet_check(
    space: SpaceModel,
    mu: FiniteSupportMeasure,
    probe: Any,
    n: int,
    trials: int,
    seed: int,
    checkpoint_fraction: float = 0.5,
    depth: int = 1,
    workers: int = 1,
    stream: int = 0,
) -> HMETReport:
    """Empirical horofunction growth rates (expected +ℓ for the probe, −ℓ for the own limit)."""
    _check_walkable(mu)
    m = max(1, min(n - 1, int(round(checkpoint_fraction * n))))
    if n < 2:
        raise InsufficientEscape("HMET needs at least two steps")
    rows = np.concatenate(map_chunks(_HMETJob(mu, probe, n, m, depth, seed, stream), trials, workers))
    disp, hp, hm, dm = rows.T
    plus = hp / n
    minus = hm / m
    drift = disp / n
    sd = lambda x: float(Z95 * np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    slack = 1e-9 if isinstance(space, FreeGroupTree) else 1e-6
    lip = bool(np.all(np.abs(hp) <= disp + slack) and np.all(np.abs(hm) <= dm + slack))
    de = DriftEstimate(float(drift.mean()), trials, n, sd(drift), seed)
    return HMETReport(
        float(plus.mean()), sd(plus), float(minus.mean()), sd(minus), de, n, m, trials, seed, lip
    )
