"""Experiments over whole walks: Furstenberg formula, drift continuity, large deviations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.stats import linregress
from statsmodels.stats.proportion import proportion_confint

from .boundary import RealEnd, TreeEnd, VisualConfig, boundary_gromov_product, horofunction_matrix
from .errors import InsufficientTrials, InvalidPair, LambdaViolation
from .groups import FiniteSupportMeasure, GroupMetric, in_G_lambda, wasserstein_alpha
from .markov import EmpiricalBoundaryMeasure
from .spaces import FreeGroupTree, SpaceModel, UpperHalfPlane
from .walks import (
    Z95,
    _tree_probe_values,
    drift_estimate,
    increment_indices,
    map_chunks,
    matrix_busemann,
    run_matrix_walks,
    run_tree_walks,
    walk_displacements,
)


# --------------------------------------------------------------------------
# Furstenberg formula
# --------------------------------------------------------------------------

def furstenberg_drift(space: SpaceModel, mu: FiniteSupportMeasure, nu: EmpiricalBoundaryMeasure) -> float:
    """Σ_g Σ_ξ μ(g) ν(ξ) h_ξ(g x0)."""
    if not len(nu.atoms):
        raise ValueError("empty boundary measure")
    H = horofunction_matrix(space, list(nu.atoms), list(mu.atoms))  # (ν atoms, μ atoms)
    return float(nu.weights @ H @ mu.weights)


def point_measure(xi: Any) -> EmpiricalBoundaryMeasure:
    """A boundary Dirac mass, for measures known in closed form."""
    return EmpiricalBoundaryMeasure((xi,), np.array([1.0]), 0, 1, 0, xi)


# --------------------------------------------------------------------------
# Continuity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityRecord:
    label: str
    parameter: float
    wasserstein: float
    drift_base: float
    drift_perturbed: float
    delta_drift: float
    delta_half_width: float
    included: bool

    @property
    def ratio(self) -> float:
        return self.delta_drift / self.wasserstein if self.wasserstein > 0 else math.nan


@dataclass(frozen=True)
class ContinuitySummary:
    records: tuple[ContinuityRecord, ...]
    bound: float
    included: int


def tilt_family(mu: FiniteSupportMeasure, signs: Sequence[float], ts: Sequence[float]) -> list[tuple[str, float, FiniteSupportMeasure]]:
    """Weights w_i + s_i t, for sign patterns summing to zero."""
    s = np.asarray(signs, dtype=float)
    if len(s) != len(mu) or abs(s.sum()) > 1e-12:
        raise ValueError("tilt signs need one entry per atom and must sum to zero")
    out = []
    for t in ts:
        w = mu.weights + s * t
        out.append((f"tilt t={t:g}", float(t), FiniteSupportMeasure.create(mu.space, mu.atoms, w)))
    return out


def lazy_family(mu: FiniteSupportMeasure, ts: Sequence[float]) -> list[tuple[str, float, FiniteSupportMeasure]]:
    """(1 − t) μ + t δ_e."""
    space = mu.space
    out = []
    for t in ts:
        atoms = list(mu.atoms) + [space.identity()]
        w = list((1 - t) * mu.weights) + [t]
        out.append((f"lazy t={t:g}", float(t), FiniteSupportMeasure.create(space, atoms, w, tol=1e-9)))
    return out


def _paired_displacements(mu: FiniteSupportMeasure, n: int, trials: int, seed: int, workers: int) -> np.ndarray:
    from .walks import displacement_samples

    return displacement_samples(mu, n, trials, seed, workers) / n


def continuity_sweep(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    family: Sequence[tuple[str, float, FiniteSupportMeasure]],
    alpha: float,
    net: Sequence[Any] | GroupMetric,
    n: int,
    trials: int,
    seed: int,
    lam: float | None = None,
    workers: int = 1,
    exclusion_factor: float = 3.0,
) -> ContinuitySummary:
    """|ℓ(μ) − ℓ(μ')| / W_α(μ, μ') across a perturbation family.

    All drifts share the seed, so trial k of every measure reuses the same
    uniforms (common random numbers) and Δℓ is estimated from paired
    differences.  Pairs with W_α under ``exclusion_factor`` times the paired
    CI half-width, or with W_α = 0, are reported but left out of the bound.
    """
    if lam is not None:
        for label, _, m in [("base", 0.0, mu), *family]:
            if not in_G_lambda(space, config, m, lam):
                raise LambdaViolation(f"{label} leaves G_λ for λ = {lam}")
    metric = net if isinstance(net, GroupMetric) else GroupMetric(space, config, net)
    base = _paired_displacements(mu, n, trials, seed, workers)
    records = []
    for label, t, m in family:
        w = wasserstein_alpha(space, config, mu, m, alpha, metric)
        other = _paired_displacements(m, n, trials, seed, workers)
        diff = base - other
        hw = float(Z95 * np.std(diff, ddof=1) / math.sqrt(trials))
        dd = abs(float(diff.mean()))
        inc = w > 0 and w >= exclusion_factor * hw
        records.append(ContinuityRecord(label, t, w, float(base.mean()), float(other.mean()), dd, hw, inc))
    ratios = [r.ratio for r in records if r.included]
    bound = max(ratios) if ratios else math.nan
    return ContinuitySummary(tuple(records), bound, len(ratios))


# --------------------------------------------------------------------------
# Large deviations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    epsilon: float
    kind: str
    n_grid: tuple[int, ...]
    counts: tuple[int, ...]
    trials: int
    frequencies: tuple[float, ...]
    wilson_low: tuple[float, ...]
    wilson_high: tuple[float, ...]
    censored: tuple[bool, ...]
    slope: float
    intercept: float
    k_hat: float
    r2: float

    @property
    def log_frequencies(self) -> tuple[float, ...]:
        return tuple(math.log(f) if f > 0 else -math.inf for f in self.frequencies)

    @property
    def fitted_cells(self) -> int:
        return sum(not c for c in self.censored)


@dataclass(frozen=True)
class _LDTJob:
    mu: FiniteSupportMeasure
    n: int
    seed: int
    stream: int
    probe: Any

    def __call__(self, chunk: range) -> np.ndarray:
        mu = self.mu
        idx = increment_indices(mu.weights, self.n, self.seed, chunk, self.stream)
        out = np.full((len(chunk), 2), np.nan)
        if isinstance(mu.space, FreeGroupTree):
            batch = run_tree_walks(mu, self.n, idx)
            out[:, 0] = batch.length
            if self.probe is not None:
                out[:, 1] = _tree_probe_values(batch, self.probe)
        else:
            batch = run_matrix_walks(mu, self.n, idx)
            out[:, 0] = batch.displacement()
            if self.probe is not None:
                out[:, 1] = matrix_busemann(self.probe, batch.N, batch.L)
        return out


def _fit(eps: float, kind: str, n_grid: Sequence[int], counts: Sequence[int], trials: int, log_b: float, min_count: int) -> RateFit:
    freqs = [c / trials for c in counts]
    lo, hi = proportion_confint(np.array(counts), trials, alpha=0.05, method="wilson")
    censored = [c < min_count for c in counts]
    xs = [n for n, c in zip(n_grid, censored) if not c]
    ys = [math.log(f) for f, c in zip(freqs, censored) if not c]
    if len(xs) >= 2:
        res = linregress(xs, ys)
        slope, intercept, r2 = float(res.slope), float(res.intercept), float(res.rvalue ** 2)
    else:
        slope = intercept = r2 = math.nan
    k_hat = -slope / (eps * eps * log_b) if not math.isnan(slope) else math.nan
    return RateFit(
        eps, kind, tuple(n_grid), tuple(int(c) for c in counts), trials, tuple(freqs),
        tuple(float(v) for v in lo), tuple(float(v) for v in hi), tuple(censored),
        slope, intercept, k_hat, r2,
    )


def ldt_fit(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    epsilons: Sequence[float],
    n_grid: Sequence[int],
    trials: int,
    seed: int,
    drift: float | None = None,
    probe: Any = None,
    workers: int = 1,
    min_count: int = 5,
) -> list[RateFit]:
    """Exceedance frequencies P(|X_n/n − ℓ| > ε) and log-linear decay fits.

    X_n is the displacement, and also h_probe(ω^n x0) when a probe is given.
    Each n uses its own trials.  Cells with fewer than ``min_count``
    exceedances are censored and kept out of the fit.  When ``drift`` is not
    supplied the mean displacement rate at the largest n is used.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if any(a == b for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n grid must be strictly increasing")
    samples = {}
    for cell, n in enumerate(n_grid):
        job = _LDTJob(mu, n, seed, 100 + cell, probe)
        samples[n] = np.concatenate(map_chunks(job, trials, workers))
    ell = float(np.mean(samples[n_grid[-1]][:, 0]) / n_grid[-1]) if drift is None else float(drift)
    kinds = [("displacement", 0)] + ([("horofunction", 1)] if probe is not None else [])
    fits = []
    for eps in epsilons:
        for kind, col in kinds:
            counts = [int(np.sum(np.abs(samples[n][:, col] / n - ell) > eps)) for n in n_grid]
            fits.append(_fit(float(eps), kind, n_grid, counts, trials, config.log_b, min_count))
    if all(f.fitted_cells == 0 for f in fits) and any(eps > 0 for eps in epsilons) and any(
        c > 0 for f in fits for c in f.counts
    ):
        raise InsufficientTrials("every (ε, n) cell was censored")
    return fits


# --------------------------------------------------------------------------
# Comparison inequality along walks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgeReport:
    K: float
    max_lower_violation: float  # max of max_i h_i − d
    max_upper_violation: float  # max of d − max_i h_i − K
    samples: int
    tolerance: float

    @property
    def holds(self) -> bool:
        return max(self.max_lower_violation, self.max_upper_violation) <= self.tolerance


def comparison_bridge_check(
    space: SpaceModel,
    mu: FiniteSupportMeasure,
    xi: Any,
    eta: Any,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    stream: int = 50,
) -> BridgeReport:
    """max_i h_i(ω^n x0) ≤ d(ω^n x0, x0) ≤ max_i h_i(ω^n x0) + K along sampled walks."""
    if xi == eta:
        raise InvalidPair("comparison needs two distinct boundary points")
    K = 2 * boundary_gromov_product(space, xi, eta) + 4 * space.delta
    a = np.concatenate(map_chunks(_LDTJob(mu, n, seed, stream, xi), trials, workers))
    b = np.concatenate(map_chunks(_LDTJob(mu, n, seed, stream, eta), trials, workers))
    d = a[:, 0]
    m = np.maximum(a[:, 1], b[:, 1])
    tol = 0.0 if isinstance(space, FreeGroupTree) else 2 * space.delta + 1e-6
    return BridgeReport(K, float(np.max(m - d)), float(np.max(d - m - K)), trials, tol)


# --------------------------------------------------------------------------
# Sampled boundary inequalities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalitySweep:
    samples: int
    visual_violations: int
    comparison_violations: int
    worst_comparison_slack: float
    worst_visual_margin: float  # min over samples of log(ratio_upper/bound_lower) and log(bound_upper/ratio_lower)

    @property
    def violations(self) -> int:
        return self.visual_violations + self.comparison_violations


def boundary_inequality_sweep(
    space: SpaceModel, config: VisualConfig, samples: int, seed: int, chain_net: Sequence[Any] = ()
) -> InequalitySweep:
    """Visual-ratio and comparison bounds on random (g, ξ, η), counting certified violations."""
    from .boundary import (
        ChainNet,
        comparison_bound_check,
        same_bord_point,
        sample_boundary_points,
        visual_ratio_check,
    )

    rng = np.random.default_rng(seed)
    chain = ChainNet(space, config, list(chain_net))
    tol = 0.0 if space.delta == 0 else 1e-9
    vis = comp = 0
    worst_slack = math.inf
    worst_margin = math.inf
    done = 0
    while done < samples:
        xi, eta = sample_boundary_points(space, rng, 2)
        if same_bord_point(space, xi, eta):
            continue
        g = space.sample_isometries(rng, 1)[0]
        done += 1
        c = comparison_bound_check(space, config, xi, eta, g)
        s = min(c.lower_slack, c.upper_slack)
        worst_slack = min(worst_slack, s)
        comp += s < -tol
        v = visual_ratio_check(space, config, g, xi, eta, chain)
        vis += v.certified_violation
        with np.errstate(divide="ignore"):
            m = min(math.log(v.ratio_upper / v.bound_lower), math.log(v.bound_upper / v.ratio_lower))
        worst_margin = min(worst_margin, m)
    return InequalitySweep(samples, vis, comp, worst_slack, worst_margin)
