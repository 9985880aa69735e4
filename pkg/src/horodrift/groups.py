"""Finitely supported measures on isometry groups, the metric d_G and W_alpha.

The supremum over Bord X in the definition of d_G is replaced by a maximum
over a declared finite net; every quantity here is therefore a *net estimate*.
Transport problems are solved exactly as linear programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .boundary import ChainNet, VisualConfig, boundary_action, is_boundary_point
from .errors import InvalidAlpha, InvalidMeasure, InvalidNet, LambdaViolation, SupportExplosion
from .spaces import MATRIX_MERGE_TOL, SpaceModel, UpperHalfPlane

WEIGHT_TOL = 1e-12
DEFAULT_CAP = 1_000_000


# --------------------------------------------------------------------------
# Measures
# --------------------------------------------------------------------------

def _merge_key(space: SpaceModel, g: Any) -> Any:
    key = space.isometry_key(g)
    if isinstance(space, UpperHalfPlane):
        return tuple(round(v / MATRIX_MERGE_TOL) for v in key)
    return key


@dataclass(frozen=True, eq=False)
class FiniteSupportMeasure:
    """Probability measure with finitely many atoms; atoms are merged on construction."""

    space: SpaceModel
    atoms: tuple
    weights: np.ndarray
    name: str = ""

    @classmethod
    def create(
        cls,
        space: SpaceModel,
        atoms: Iterable[Any],
        weights: Iterable[float],
        name: str = "",
        tol: float = WEIGHT_TOL,
    ) -> "FiniteSupportMeasure":
        atoms = [space.check_isometry(g) for g in atoms]
        w = np.asarray(list(weights), dtype=float)
        if not atoms:
            raise InvalidMeasure("measure has empty support")
        if len(atoms) != len(w):
            raise InvalidMeasure("atoms and weights differ in length")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidMeasure("weights must be positive and finite")
        if abs(w.sum() - 1.0) > tol:
            raise InvalidMeasure(f"weights sum to {w.sum():.15g}, not 1")
        merged: dict[Any, int] = {}
        out_atoms: list[Any] = []
        out_w: list[float] = []
        for g, p in zip(atoms, w):
            k = _merge_key(space, g)
            if k in merged:
                out_w[merged[k]] += p
            else:
                merged[k] = len(out_atoms)
                out_atoms.append(g)
                out_w.append(p)
        return cls(space, tuple(out_atoms), np.array(out_w), name)

    @classmethod
    def dirac(cls, space: SpaceModel, g: Any) -> "FiniteSupportMeasure":
        return cls.create(space, [g], [1.0])

    @classmethod
    def uniform(cls, space: SpaceModel, atoms: Sequence[Any]) -> "FiniteSupportMeasure":
        return cls.create(space, atoms, [1.0 / len(atoms)] * len(atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{self.space.format_isometry(g)}: {p:.6g}" for g, p in zip(self.atoms[:6], self.weights[:6])
        )
        more = ", ..." if len(self.atoms) > 6 else ""
        return f"FiniteSupportMeasure({parts}{more})"

    def expectation(self, f: Callable[[Any], float]) -> float:
        return float(sum(p * f(g) for g, p in zip(self.atoms, self.weights)))

    def mass_of(self, g: Any) -> float:
        k = _merge_key(self.space, g)
        for a, p in zip(self.atoms, self.weights):
            if _merge_key(self.space, a) == k:
                return float(p)
        return 0.0

    def displacements(self) -> np.ndarray:
        return np.array([float(self.space.displacement(g)) for g in self.atoms])

    def mean_displacement(self) -> float:
        return float(self.weights @ self.displacements())

    def max_displacement(self) -> float:
        return float(self.displacements().max())

    def inverse_atoms(self) -> list:
        return [self.space.inverse(g) for g in self.atoms]

    def to_config(self) -> dict:
        return {
            "atoms": [self.space.format_isometry(g) for g in self.atoms],
            "weights": [float(p) for p in self.weights],
        }


@dataclass(frozen=True)
class LambdaBound:
    lam: float

    def __post_init__(self) -> None:
        if not self.lam > 1:
            raise ValueError(f"lambda must exceed 1, got {self.lam}")

    def require(self, space: SpaceModel, config: VisualConfig, mu: FiniteSupportMeasure, label: str = "measure") -> None:
        if not in_G_lambda(space, config, mu, self.lam):
            worst = config.b ** mu.max_displacement()
            raise LambdaViolation(f"{label} has an atom with b^d = {worst:.6g} ≥ λ = {self.lam}")


def in_G_lambda(space: SpaceModel, config: VisualConfig, mu: FiniteSupportMeasure, lam: float) -> bool:
    """True iff every atom g has b^{d(g x0, x0)} < lam."""
    return all(config.b ** space.displacement(g) < lam for g in mu.atoms)


def smallest_lambda(space: SpaceModel, config: VisualConfig, measures: Iterable[FiniteSupportMeasure]) -> float:
    """Smallest admissible λ, nudged up so the strict inequality holds."""
    top = max(config.b ** m.max_displacement() for m in measures)
    return math.nextafter(top, math.inf)


def convolve(mu: FiniteSupportMeasure, nu: FiniteSupportMeasure, cap: int = DEFAULT_CAP) -> FiniteSupportMeasure:
    """mu ⋆ nu: law of g g' with g ~ mu, g' ~ nu independent."""
    if mu.space is not nu.space and repr(mu.space) != repr(nu.space):
        raise InvalidMeasure("measures live on different spaces")
    if len(mu) * len(nu) > cap:
        raise SupportExplosion(f"convolution would enumerate {len(mu) * len(nu)} atoms (cap {cap})")
    space = mu.space
    atoms = [space.compose(g, h) for g in mu.atoms for h in nu.atoms]
    weights = np.outer(mu.weights, nu.weights).ravel()
    return FiniteSupportMeasure.create(space, atoms, weights / weights.sum(), tol=1e-9)


def power(mu: FiniteSupportMeasure, n: int, cap: int = DEFAULT_CAP) -> FiniteSupportMeasure:
    """n-fold convolution power by repeated right multiplication."""
    if n < 1:
        raise ValueError("power needs n >= 1")
    out = mu
    for _ in range(n - 1):
        out = convolve(out, mu, cap)
    return out


def powers(mu: FiniteSupportMeasure, n: int, cap: int = DEFAULT_CAP) -> list[FiniteSupportMeasure]:
    """[mu^1, ..., mu^n]."""
    out = [mu]
    for _ in range(n - 1):
        out.append(convolve(out[-1], mu, cap))
    return out


# --------------------------------------------------------------------------
# The group metric
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupMetricEstimate:
    value: float
    net_size: int
    history: tuple[float, ...] = field(default_factory=tuple)


def _image_bracket_uppers(chain: ChainNet, gs: Sequence[Any], xi: Any) -> np.ndarray:
    """Matrix of D_b upper bounds between g xi and h xi over g, h in ``gs``."""
    space = chain.space
    imgs = [boundary_action(space, g, xi) for g in gs]
    up = chain.upper_matrix(imgs, imgs)
    if not is_boundary_point(xi):
        d = np.array([[space.distance(p, q) for q in imgs] for p in imgs], dtype=float)
        up = np.minimum(up, chain.config.log_b * d)
    np.fill_diagonal(up, 0.0)
    return up


class GroupMetric:
    """Net estimate of d_G with a fixed chain net, reusable across many pairs."""

    def __init__(self, space: SpaceModel, config: VisualConfig, net: Sequence[Any], chain_net: Sequence[Any] | None = None):
        if not len(net):
            raise InvalidNet("d_G needs a nonempty net")
        self.space = space
        self.config = config
        self.net = list(net)
        self.chain = ChainNet(space, config, self.net if chain_net is None else chain_net)

    def per_point(self, g1: Any, g2: Any) -> np.ndarray:
        """Contribution of each net point: max of the forward and inverse image gaps."""
        space = self.space
        gs = [g1, g2]
        inv = [space.inverse(g1), space.inverse(g2)]
        out = np.empty(len(self.net))
        for j, xi in enumerate(self.net):
            out[j] = max(
                _image_bracket_uppers(self.chain, gs, xi)[0, 1],
                _image_bracket_uppers(self.chain, inv, xi)[0, 1],
            )
        return out

    def estimate(self, g1: Any, g2: Any) -> GroupMetricEstimate:
        if self.space.same_isometry(g1, g2):
            return GroupMetricEstimate(0.0, len(self.net), tuple([0.0] * len(self.net)))
        contrib = self.per_point(g1, g2)
        hist = np.maximum.accumulate(contrib)
        return GroupMetricEstimate(float(hist[-1]), len(self.net), tuple(float(v) for v in hist))

    def matrix(self, atoms: Sequence[Any]) -> np.ndarray:
        """Symmetric matrix of d_G estimates between all atoms."""
        space = self.space
        inv = [space.inverse(g) for g in atoms]
        out = np.zeros((len(atoms), len(atoms)))
        for xi in self.net:
            out = np.maximum(out, _image_bracket_uppers(self.chain, atoms, xi))
            out = np.maximum(out, _image_bracket_uppers(self.chain, inv, xi))
        out = np.maximum(out, out.T)
        np.fill_diagonal(out, 0.0)
        return out


def d_G_estimate(
    space: SpaceModel, config: VisualConfig, g1: Any, g2: Any, net: Sequence[Any]
) -> GroupMetricEstimate:
    """max over the net of the D_b upper brackets of (g1 ξ, g2 ξ) and (g1⁻¹ξ, g2⁻¹ξ).

    The history is the running maximum over nested prefixes of the net, so it is
    nondecreasing as points are added.
    """
    return GroupMetric(space, config, net).estimate(g1, g2)


# --------------------------------------------------------------------------
# Wasserstein distance
# --------------------------------------------------------------------------

def check_alpha(alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1], got {alpha}")
    return float(alpha)


def transport_cost(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Exact optimal transport value between weight vectors ``a`` and ``b``."""
    m, n = cost.shape
    if m == 1 or n == 1:
        return float(np.sum(cost * (a[:, None] * b[None, :])))
    rows = sparse.kron(sparse.eye(m), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, m)), sparse.eye(n))
    A = sparse.vstack([rows, cols]).tocsr()
    rhs = np.concatenate([a, b * (a.sum() / b.sum())])
    res = linprog(cost.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def joint_support(mu: FiniteSupportMeasure, nu: FiniteSupportMeasure) -> tuple[list, np.ndarray, np.ndarray]:
    """Union of supports with both weight vectors laid out on it."""
    space = mu.space
    index: dict[Any, int] = {}
    atoms: list[Any] = []
    for g in list(mu.atoms) + list(nu.atoms):
        k = _merge_key(space, g)
        if k not in index:
            index[k] = len(atoms)
            atoms.append(g)
    a = np.zeros(len(atoms))
    b = np.zeros(len(atoms))
    for g, p in zip(mu.atoms, mu.weights):
        a[index[_merge_key(space, g)]] += p
    for g, p in zip(nu.atoms, nu.weights):
        b[index[_merge_key(space, g)]] += p
    return atoms, a, b


def wasserstein_alpha(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    nu: FiniteSupportMeasure,
    alpha: float,
    net: Sequence[Any] | GroupMetric,
) -> float:
    """W_alpha via optimal transport with cost d_G^alpha on the joint support."""
    alpha = check_alpha(alpha)
    metric = net if isinstance(net, GroupMetric) else GroupMetric(space, config, net)
    atoms, a, b = joint_support(mu, nu)
    if np.allclose(a, b, atol=1e-15, rtol=0):
        return 0.0
    D = metric.matrix(atoms) ** alpha
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    return transport_cost(D[np.ix_(ia, ib)], a[ia], b[ib])


@dataclass(frozen=True)
class ConvolutionReport:
    lhs: float
    rhs: float
    label: str = ""
    tol: float = 1e-7

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def violated(self) -> bool:
        return self.lhs > self.rhs + self.tol * max(1.0, abs(self.rhs))


def convolution_wasserstein_check(
    space: SpaceModel,
    config: VisualConfig,
    mu1: FiniteSupportMeasure,
    mu2: FiniteSupportMeasure,
    nu1: FiniteSupportMeasure,
    nu2: FiniteSupportMeasure,
    alpha: float,
    lam: float,
    net: Sequence[Any] | GroupMetric,
    cap: int = DEFAULT_CAP,
) -> ConvolutionReport:
    """W(mu1⋆mu2, nu1⋆nu2) ≤ W(mu1, nu1) + C^α λ^α W(mu2, nu2).

    Only the left factors enter the Hölder step of the argument, so only they
    are required to be G_λ-supported.
    """
    alpha = check_alpha(alpha)
    bound = LambdaBound(lam)
    bound.require(space, config, mu1, "mu1")
    bound.require(space, config, nu1, "nu1")
    metric = net if isinstance(net, GroupMetric) else GroupMetric(space, config, net)
    lhs = wasserstein_alpha(space, config, convolve(mu1, mu2, cap), convolve(nu1, nu2, cap), alpha, metric)
    w1 = wasserstein_alpha(space, config, mu1, nu1, alpha, metric)
    w2 = wasserstein_alpha(space, config, mu2, nu2, alpha, metric)
    rhs = w1 + (config.C * lam) ** alpha * w2
    return ConvolutionReport(lhs, rhs, "one-step bound")


def power_wasserstein_check(
    space: SpaceModel,
    config: VisualConfig,
    mu: FiniteSupportMeasure,
    nu: FiniteSupportMeasure,
    alpha: float,
    lam: float,
    net: Sequence[Any] | GroupMetric,
    n_max: int,
    cap: int = DEFAULT_CAP,
) -> list[ConvolutionReport]:
    """Power bound W(mu^n, nu^n) ≤ W(mu, nu) Σ_{i<n} (C λ)^{iα} and the one-step bound at each n."""
    alpha = check_alpha(alpha)
    bound = LambdaBound(lam)
    bound.require(space, config, mu, "mu")
    bound.require(space, config, nu, "nu")
    metric = net if isinstance(net, GroupMetric) else GroupMetric(space, config, net)
    mus = powers(mu, n_max, cap)
    nus = powers(nu, n_max, cap)
    w = [wasserstein_alpha(space, config, m, v, alpha, metric) for m, v in zip(mus, nus)]
    q = (config.C * lam) ** alpha
    out = []
    for n in range(1, n_max + 1):
        out.append(ConvolutionReport(w[n - 1], w[0] * sum(q ** i for i in range(n)), f"power bound n={n}"))
        if n >= 2:
            out.append(ConvolutionReport(w[n - 1], w[0] + q * w[n - 2], f"one-step bound n={n}"))
    return out
