"""Model hyperbolic spaces: the free-group tree, the upper half-plane, the star space.

Every space exposes the same small surface (``distance``, ``gromov_product``,
``apply``, ``compose``, ``inverse``) so that the boundary, group and walk layers
never branch on the space kind except where a closed form is space-specific.
"""

from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import InvalidPoint

Word = tuple[int, ...]

# Determinant tolerance for half-plane isometries.
DET_TOL = 1e-12
# Half-plane isometries closer than this (entrywise max, up to sign) are equal.
MATRIX_MERGE_TOL = 1e-9


# --------------------------------------------------------------------------
# Free group words
# --------------------------------------------------------------------------

def free_reduce(letters: Sequence[int]) -> Word:
    """Freely reduce a sequence of signed generator indices."""
    out: list[int] = []
    for s in letters:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


def word_multiply(u: Word, v: Word) -> Word:
    """Product of two reduced words; cancellation only happens at the junction."""
    i = 0
    n = min(len(u), len(v))
    while i < n and u[len(u) - 1 - i] == -v[i]:
        i += 1
    return u[: len(u) - i] + v[i:]


def word_inverse(w: Word) -> Word:
    return tuple(-s for s in reversed(w))


def common_prefix_length(u: Sequence[int], v: Sequence[int]) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


_TOKEN = re.compile(r"([a-zA-Z])(\^-1|\^\{-1\}|⁻¹|')?")


def parse_word(text: str, rank: int | None = None) -> Word:
    """Parse ``"ab"``, ``"a b^-1"``, ``"aB"`` or ``"a⁻¹"`` into a reduced word.

    Lowercase letters are generators a, b, c, ...; an uppercase letter or a
    ``^-1`` / ``⁻¹`` / ``'`` suffix denotes the inverse.  ``"e"`` and ``""``
    denote the identity.
    """
    text = text.strip()
    if text in ("", "e", "1"):
        return ()
    letters: list[int] = []
    pos = 0
    compact = re.sub(r"[\s·*]", "", text)
    while pos < len(compact):
        m = _TOKEN.match(compact, pos)
        if m is None:
            raise InvalidPoint(f"cannot parse word {text!r} at position {pos}")
        ch, inv = m.group(1), m.group(2)
        index = ord(ch.lower()) - ord("a") + 1
        sign = -1 if ch.isupper() else 1
        if inv:
            sign = -sign
        if rank is not None and index > rank:
            raise InvalidPoint(f"generator {ch!r} exceeds rank {rank}")
        letters.append(sign * index)
        pos = m.end()
    return free_reduce(letters)


def format_word(w: Sequence[int]) -> str:
    """Inverse of :func:`parse_word`, inverses written in uppercase."""
    if not w:
        return "e"
    return "".join(
        chr(ord("a") + abs(s) - 1) if s > 0 else chr(ord("A") + abs(s) - 1)
        for s in w
    )


# --------------------------------------------------------------------------
# Half-plane and star-space value types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SL2:
    """Real 2x2 matrix of determinant one acting by Möbius transformations."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_entries(cls, a: float, b: float, c: float, d: float) -> "SL2":
        det = a * d - b * c
        if not det > 0:
            raise InvalidPoint(f"matrix determinant must be positive, got {det}")
        s = math.sqrt(det)
        return cls(a / s, b / s, c / s, d / s)

    @property
    def entries(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: "SL2") -> "SL2":
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        # The determinant is only measurable while ad and bc stay moderate;
        # beyond that renormalizing would inject rounding error, not remove it.
        scale = max(abs(a * d), abs(b * c))
        if scale < 1e6:
            det = a * d - b * c
            if det > 0:
                s = math.sqrt(det)
                a, b, c, d = a / s, b / s, c / s, d / s
        return SL2(a, b, c, d)

    def inverse(self) -> "SL2":
        return SL2(self.d, -self.b, -self.c, self.a)


@dataclass(frozen=True)
class StarPoint:
    ray: int
    radius: float

    def __post_init__(self) -> None:
        if self.radius == 0 and self.ray != 0:
            object.__setattr__(self, "ray", 0)


@dataclass(frozen=True)
class RayPermutation:
    perm: tuple[int, ...]


# --------------------------------------------------------------------------
# Spaces
# --------------------------------------------------------------------------

class SpaceModel(ABC):
    """Common interface of the model spaces."""

    kind: str
    delta: float

    @property
    @abstractmethod
    def basepoint(self) -> Any: ...

    @abstractmethod
    def check_point(self, x: Any) -> Any: ...

    @abstractmethod
    def check_isometry(self, g: Any) -> Any: ...

    @abstractmethod
    def distance(self, x: Any, y: Any) -> float: ...

    @abstractmethod
    def apply(self, g: Any, x: Any) -> Any: ...

    @abstractmethod
    def compose(self, g: Any, h: Any) -> Any: ...

    @abstractmethod
    def inverse(self, g: Any) -> Any: ...

    @abstractmethod
    def identity(self) -> Any: ...

    @abstractmethod
    def same_isometry(self, g: Any, h: Any) -> bool: ...

    @abstractmethod
    def isometry_key(self, g: Any) -> Any:
        """Hashable key; equal keys imply equal isometries."""

    @abstractmethod
    def parse_isometry(self, spec: Any) -> Any: ...

    @abstractmethod
    def format_isometry(self, g: Any) -> Any: ...

    @abstractmethod
    def sample_points(self, rng: np.random.Generator, count: int) -> list: ...

    @abstractmethod
    def sample_isometries(self, rng: np.random.Generator, count: int) -> list: ...

    def gromov_product(self, x: Any, z: Any, base: Any = None) -> float:
        """⟨x, z⟩_base = (d(x, base) + d(z, base) - d(x, z)) / 2."""
        if base is None:
            base = self.basepoint
        return 0.5 * (
            self.distance(x, base) + self.distance(z, base) - self.distance(x, z)
        )

    def displacement(self, g: Any) -> float:
        """d(g x0, x0)."""
        x0 = self.basepoint
        return self.distance(self.apply(g, x0), x0)

    def is_identity(self, g: Any) -> bool:
        return self.same_isometry(g, self.identity())

    def pairwise_distances(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        """Elementwise d(xs[i], ys[i])."""
        return np.array([self.distance(x, y) for x, y in zip(xs, ys)])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(delta={self.delta})"


class FreeGroupTree(SpaceModel):
    """Cayley tree of the free group of rank ``rank`` with the word metric."""

    kind = "tree"

    def __init__(self, rank: int = 2):
        if rank < 2:
            raise InvalidPoint("free group rank must be at least 2")
        self.rank = rank
        self.delta = 0.0

    @property
    def basepoint(self) -> Word:
        return ()

    @property
    def generators(self) -> list[Word]:
        return [(s,) for i in range(1, self.rank + 1) for s in (i, -i)]

    def check_point(self, x: Any) -> Word:
        if not isinstance(x, tuple):
            raise InvalidPoint(f"tree points are tuples of letters, got {x!r}")
        for s in x:
            if not isinstance(s, (int, np.integer)) or s == 0 or abs(s) > self.rank:
                raise InvalidPoint(f"invalid letter {s!r} for rank {self.rank}")
        if not is_reduced(x):
            raise InvalidPoint(f"word {format_word(x)} is not freely reduced")
        return x

    check_isometry = check_point

    def distance(self, x: Word, y: Word) -> int:
        self.check_point(x)
        self.check_point(y)
        return len(x) + len(y) - 2 * common_prefix_length(x, y)

    def gromov_product(self, x: Word, z: Word, base: Word | None = None) -> int:
        if base is None:
            base = ()
        twice = self.distance(x, base) + self.distance(z, base) - self.distance(x, z)
        return twice // 2

    def apply(self, g: Word, x: Word) -> Word:
        self.check_point(g)
        self.check_point(x)
        return word_multiply(g, x)

    def compose(self, g: Word, h: Word) -> Word:
        return self.apply(g, h)

    def inverse(self, g: Word) -> Word:
        return word_inverse(self.check_point(g))

    def identity(self) -> Word:
        return ()

    def same_isometry(self, g: Word, h: Word) -> bool:
        return g == h

    def isometry_key(self, g: Word) -> Word:
        return g

    def displacement(self, g: Word) -> int:
        return len(self.check_point(g))

    def parse_isometry(self, spec: Any) -> Word:
        if isinstance(spec, str):
            return parse_word(spec, self.rank)
        if isinstance(spec, (list, tuple)):
            return self.check_point(tuple(int(s) for s in spec))
        raise InvalidPoint(f"cannot interpret {spec!r} as a tree word")

    parse_point = parse_isometry

    def format_isometry(self, g: Word) -> str:
        return format_word(g)

    def random_word(self, rng: np.random.Generator, length: int) -> Word:
        letters: list[int] = []
        for _ in range(length):
            while True:
                s = int(rng.integers(1, self.rank + 1)) * (1 if rng.random() < 0.5 else -1)
                if not letters or letters[-1] != -s:
                    break
            letters.append(s)
        return tuple(letters)

    def sample_word_array(self, rng: np.random.Generator, count: int, max_length: int = 6) -> tuple[np.ndarray, np.ndarray]:
        """Uniform reduced words of uniform length in [0, max_length], as a zero-padded array and lengths."""
        lengths = rng.integers(0, max_length + 1, count)
        letters = np.array([s for i in range(1, self.rank + 1) for s in (i, -i)])
        out = np.zeros((count, max(max_length, 1)), dtype=np.int64)
        if max_length == 0:
            return out[:, :0], lengths
        out[:, 0] = letters[rng.integers(0, 2 * self.rank, count)]
        for k in range(1, max_length):
            # pick among the 2r - 1 letters that do not cancel the previous one
            j = rng.integers(0, 2 * self.rank - 1, count)
            inv = -out[:, k - 1]
            pos = 2 * (np.abs(inv) - 1) + (inv < 0)  # index of the inverse letter in ``letters``
            out[:, k] = letters[j + (j >= pos)]
        out[np.arange(max_length)[None, :] >= lengths[:, None]] = 0
        return out, lengths

    def sample_points(self, rng: np.random.Generator, count: int, max_length: int = 6) -> list:
        arr, lengths = self.sample_word_array(rng, count, max_length)
        return [tuple(int(v) for v in row[:n]) for row, n in zip(arr, lengths)]

    def sample_isometries(self, rng: np.random.Generator, count: int, max_length: int = 4) -> list:
        return self.sample_points(rng, count, max_length)

    def pairwise_distances(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        width = max((len(w) for w in list(xs) + list(ys)), default=0)
        if width == 0:
            return np.zeros(len(xs), dtype=np.int64)
        a = np.array([w + (0,) * (width - len(w)) for w in xs], dtype=np.int64).reshape(len(xs), width)
        b = np.array([w + (0,) * (width - len(w)) for w in ys], dtype=np.int64).reshape(len(ys), width)
        la = np.count_nonzero(a, axis=1)
        lb = np.count_nonzero(b, axis=1)
        same = np.cumprod((a == b) & (a != 0), axis=1)
        return la + lb - 2 * same.sum(axis=1)

    def __repr__(self) -> str:
        return f"FreeGroupTree(rank={self.rank})"


class UpperHalfPlane(SpaceModel):
    """The hyperbolic plane of curvature -1, upper half-plane model, basepoint i."""

    kind = "halfplane"

    def __init__(self, delta: float):
        if not delta > 0:
            raise InvalidPoint("half-plane delta must be a positive calibrated constant")
        self.delta = float(delta)

    @property
    def basepoint(self) -> complex:
        return 1j

    def check_point(self, z: Any) -> complex:
        if isinstance(z, (bool, StarPoint, tuple)) or not isinstance(z, (complex, float, int, np.number)):
            raise InvalidPoint(f"half-plane points are complex numbers, got {z!r}")
        z = complex(z)
        if not z.imag > 0 or not math.isfinite(z.real) or not math.isfinite(z.imag):
            raise InvalidPoint(f"half-plane point needs positive finite imaginary part, got {z}")
        return z

    def check_isometry(self, g: Any) -> SL2:
        if not isinstance(g, SL2):
            raise InvalidPoint(f"half-plane isometries are SL2 matrices, got {g!r}")
        return g

    def distance(self, z: complex, w: complex) -> float:
        z = self.check_point(z)
        w = self.check_point(w)
        return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))

    def apply(self, g: SL2, z: complex) -> complex:
        g = self.check_isometry(g)
        z = self.check_point(z)
        return mobius_point(g, z)

    def compose(self, g: SL2, h: SL2) -> SL2:
        return self.check_isometry(g) @ self.check_isometry(h)

    def inverse(self, g: SL2) -> SL2:
        return self.check_isometry(g).inverse()

    def identity(self) -> SL2:
        return SL2(1.0, 0.0, 0.0, 1.0)

    def same_isometry(self, g: SL2, h: SL2, tol: float = MATRIX_MERGE_TOL) -> bool:
        ge, he = np.array(g.entries), np.array(h.entries)
        return bool(min(np.max(np.abs(ge - he)), np.max(np.abs(ge + he))) <= tol)

    def isometry_key(self, g: SL2) -> tuple[float, ...]:
        e = g.entries
        lead = next((v for v in e if abs(v) > MATRIX_MERGE_TOL), 1.0)
        sign = 1.0 if lead > 0 else -1.0
        return tuple(sign * v for v in e)

    def displacement(self, g: SL2) -> float:
        # cosh d(g i, i) = (a² + b² + c² + d²) / 2 for det 1
        s = g.a ** 2 + g.b ** 2 + g.c ** 2 + g.d ** 2
        return math.acosh(max(1.0, 0.5 * s))

    def parse_isometry(self, spec: Any) -> SL2:
        if isinstance(spec, SL2):
            return spec
        arr = np.asarray(spec, dtype=float).reshape(-1)
        if arr.size != 4:
            raise InvalidPoint(f"half-plane isometry needs 4 entries, got {spec!r}")
        det = arr[0] * arr[3] - arr[1] * arr[2]
        if abs(det - 1.0) > 1e-9 * max(1.0, abs(det)):
            if det > 0:
                return SL2.from_entries(*arr)
            raise InvalidPoint(f"matrix {spec!r} is not orientation preserving")
        return SL2(*map(float, arr))

    def parse_point(self, spec: Any) -> complex:
        if isinstance(spec, (list, tuple)):
            return self.check_point(complex(spec[0], spec[1]))
        return self.check_point(complex(spec))

    def format_isometry(self, g: SL2) -> list[float]:
        return list(g.entries)

    def sample_points(self, rng: np.random.Generator, count: int, max_radius: float = 10.0) -> list:
        return list(self.sample_point_array(rng, count, max_radius))

    def sample_point_array(
        self, rng: np.random.Generator, count: int, max_radius: float = 10.0
    ) -> np.ndarray:
        """Points at hyperbolic radius uniform in [0, max_radius] around i, uniform angle."""
        r = rng.uniform(0.0, max_radius, count)
        theta = rng.uniform(0.0, 2 * np.pi, count)
        return disk_to_halfplane(np.tanh(r / 2) * np.exp(1j * theta))

    def sample_isometries(self, rng: np.random.Generator, count: int, max_radius: float = 3.0) -> list:
        out = []
        for _ in range(count):
            t = rng.uniform(0.0, max_radius)
            th1, th2 = rng.uniform(0.0, np.pi, 2)
            k1 = _rotation(th1)
            k2 = _rotation(th2)
            a = SL2(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))
            out.append(k1 @ a @ k2)
        return out

    def pairwise_distances(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        z = np.asarray(xs, dtype=complex)
        w = np.asarray(ys, dtype=complex)
        return halfplane_distance_array(z, w)

    def __repr__(self) -> str:
        return f"UpperHalfPlane(delta={self.delta})"


def _rotation(theta: float) -> SL2:
    c, s = math.cos(theta), math.sin(theta)
    return SL2(c, -s, s, c)


def halfplane_distance_array(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def disk_to_halfplane(w: np.ndarray | complex) -> np.ndarray | complex:
    """Cayley map from the unit disk (0 ↦ i) to the upper half-plane."""
    return 1j * (1 + w) / (1 - w)


def mobius_point(g: SL2, z: complex) -> complex:
    """g·z for det(g) = 1, with the imaginary part computed without cancellation."""
    den = g.c * z + g.d
    n2 = den.real ** 2 + den.imag ** 2
    num = (g.a * z + g.b) * den.conjugate()
    return complex(num.real / n2, z.imag / n2)


class StarSpace(SpaceModel):
    """``ray_count`` half-lines glued at the origin; a 0-hyperbolic, non-proper-at-infinity model."""

    kind = "star"

    def __init__(self, ray_count: int = 4):
        if ray_count < 2:
            raise InvalidPoint("star space needs at least two rays")
        self.ray_count = ray_count
        self.delta = 0.0

    @property
    def basepoint(self) -> StarPoint:
        return StarPoint(0, 0.0)

    def check_point(self, x: Any) -> StarPoint:
        if not isinstance(x, StarPoint):
            raise InvalidPoint(f"star points are StarPoint values, got {x!r}")
        if not 0 <= x.ray < self.ray_count or not x.radius >= 0:
            raise InvalidPoint(f"invalid star point {x!r}")
        return x

    def check_isometry(self, g: Any) -> RayPermutation:
        if not isinstance(g, RayPermutation) or sorted(g.perm) != list(range(self.ray_count)):
            raise InvalidPoint(f"star isometries are ray permutations, got {g!r}")
        return g

    def distance(self, x: StarPoint, y: StarPoint) -> float:
        x = self.check_point(x)
        y = self.check_point(y)
        if x.ray == y.ray:
            return abs(x.radius - y.radius)
        return x.radius + y.radius

    def apply(self, g: RayPermutation, x: StarPoint) -> StarPoint:
        g = self.check_isometry(g)
        x = self.check_point(x)
        return StarPoint(g.perm[x.ray], x.radius)

    def compose(self, g: RayPermutation, h: RayPermutation) -> RayPermutation:
        g = self.check_isometry(g)
        h = self.check_isometry(h)
        return RayPermutation(tuple(g.perm[k] for k in h.perm))

    def inverse(self, g: RayPermutation) -> RayPermutation:
        g = self.check_isometry(g)
        inv = [0] * self.ray_count
        for i, k in enumerate(g.perm):
            inv[k] = i
        return RayPermutation(tuple(inv))

    def identity(self) -> RayPermutation:
        return RayPermutation(tuple(range(self.ray_count)))

    def same_isometry(self, g: RayPermutation, h: RayPermutation) -> bool:
        return g.perm == h.perm

    def isometry_key(self, g: RayPermutation) -> tuple[int, ...]:
        return g.perm

    def displacement(self, g: RayPermutation) -> float:
        return 0.0

    def parse_isometry(self, spec: Any) -> RayPermutation:
        return self.check_isometry(RayPermutation(tuple(int(k) for k in spec)))

    def parse_point(self, spec: Any) -> StarPoint:
        ray, radius = spec
        return self.check_point(StarPoint(int(ray), float(radius)))

    def format_isometry(self, g: RayPermutation) -> list[int]:
        return list(g.perm)

    def sample_points(self, rng: np.random.Generator, count: int, max_radius: int = 20) -> list:
        # radii on a dyadic grid keep every Gromov product exact in floating point
        rays = rng.integers(0, self.ray_count, count)
        radii = rng.integers(0, 4 * max_radius + 1, count) / 4.0
        return [StarPoint(int(k), float(r)) for k, r in zip(rays, radii)]

    def sample_isometries(self, rng: np.random.Generator, count: int) -> list:
        return [RayPermutation(tuple(int(k) for k in rng.permutation(self.ray_count))) for _ in range(count)]

    def __repr__(self) -> str:
        return f"StarSpace(ray_count={self.ray_count})"


# --------------------------------------------------------------------------
# Four-point condition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicityReport:
    max_violation: float
    holds: bool
    samples: int
    delta: float


def check_hyperbolicity(
    space: SpaceModel, delta: float, quadruple_samples: int, seed: int, batch: int = 200_000
) -> HyperbolicityReport:
    """Sample quadruples (x, y, z, w) and test ⟨x,z⟩_w ≥ min(⟨x,y⟩_w, ⟨y,z⟩_w) - delta.

    The reported violation is the largest ``min(⟨x,y⟩_w, ⟨y,z⟩_w) - delta - ⟨x,z⟩_w``
    seen.  Tree and star distances are exact in floating point, so the check is
    exact there.
    """
    if delta < 0 or quadruple_samples < 1:
        raise ValueError("need delta >= 0 and at least one sample")
    rng = np.random.default_rng(seed)
    worst = -math.inf
    remaining = quadruple_samples
    while remaining > 0:
        k = min(batch, remaining)
        remaining -= k
        x, y, z, w = (space.sample_points(rng, k) for _ in range(4))
        dxw = space.pairwise_distances(x, w)
        dyw = space.pairwise_distances(y, w)
        dzw = space.pairwise_distances(z, w)
        dxy = space.pairwise_distances(x, y)
        dyz = space.pairwise_distances(y, z)
        dxz = space.pairwise_distances(x, z)
        # doubled products keep tree arithmetic in integers
        p_xy = dxw + dyw - dxy
        p_yz = dyw + dzw - dyz
        p_xz = dxw + dzw - dxz
        v = np.minimum(p_xy, p_yz) - p_xz
        worst = max(worst, float(np.max(v)) / 2.0 - delta)
    return HyperbolicityReport(worst, worst <= 0.0, quadruple_samples, delta)


def build_space(kind: str, **params: Any) -> SpaceModel:
    """Construct a space from its config name."""
    if kind == "tree":
        return FreeGroupTree(int(params.get("rank", 2)))
    if kind == "halfplane":
        return UpperHalfPlane(float(params["delta"]))
    if kind == "star":
        return StarSpace(int(params.get("ray_count", 4)))
    raise InvalidPoint(f"unknown space kind {kind!r}")


def calibrate_delta(
    space: SpaceModel,
    quadruple_samples: int,
    seed: int,
    margin: float = 0.005,
    resolution: float = 0.01,
) -> float:
    """Empirical four-point defect plus ``margin``, rounded up to ``resolution``.

    Used once to freeze the half-plane constant into config; tests then re-check
    the frozen value on fresh quadruples.
    """
    report = check_hyperbolicity(space, 0.0, quadruple_samples, seed)
    raw = max(report.max_violation, 0.0) + margin
    return math.ceil(raw / resolution) * resolution
