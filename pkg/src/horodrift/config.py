"""Experiment configuration: YAML files validated into pydantic models.

Schema (all sections except ``space``, ``measures`` and ``base_measure`` optional)::

    name: f2_uniform
    seed: 7
    space: {kind: tree, rank: 2}          # or {kind: halfplane, delta: 0.7}, {kind: star, ray_count: 4}
    visual: {b: 2.0}
    measures:
      uniform:
        atoms: [a, A, b, B]              # tree words, half-plane [a, b, c, d], star permutations
        weights: [0.25, 0.25, 0.25, 0.25]
        lambda: 2.5                      # optional G_λ bound
    base_measure: uniform
    nets:
      group: {depth: 2, interior_depth: 2}    # boundary + interior net for the group metric
      pairs: {depth: 3}                       # all pairs of these points
      horofunctions: {depth: 3, interior_depth: 3}
    experiments:
      drift: {n: 2000, trials: 1000}
      ...

Each net accepts ``depth`` (tree ends at that depth), ``grid`` (half-plane
angular grid), ``rays`` (all star rays), explicit ``points`` (boundary
specs) and ``interior_points``, plus ``interior_depth`` (tree words up to
that length).  See ``configs/`` for complete files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .boundary import (
    VisualConfig,
    halfplane_boundary_grid,
    parse_boundary_point,
    star_ends,
    tree_depth_ends,
    tree_words_up_to,
)
from .errors import ConfigError, HorodriftError
from .groups import FiniteSupportMeasure
from .spaces import FreeGroupTree, SpaceModel, StarSpace, UpperHalfPlane, build_space, check_hyperbolicity

# quick sanity check of a frozen half-plane delta on every load
LOAD_CHECK_QUADRUPLES = 20_000


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class SpaceSpec(_Model):
    kind: Literal["tree", "halfplane", "star"]
    rank: int = Field(2, ge=1, le=26)
    delta: float | None = Field(None, ge=0)
    ray_count: int = Field(4, ge=2)

    @model_validator(mode="after")
    def _delta_for_halfplane(self) -> "SpaceSpec":
        if self.kind == "halfplane" and self.delta is None:
            raise ValueError("half-plane spaces need a calibrated delta")
        if self.kind != "halfplane" and self.delta not in (None, 0.0):
            raise ValueError(f"{self.kind} spaces are 0-hyperbolic; delta must be omitted")
        return self


class VisualSpec(_Model):
    b: float = Field(2.0, gt=1)


class MeasureSpec(_Model):
    atoms: list[Any] = Field(min_length=1)
    weights: list[float] = Field(min_length=1)
    lam: float | None = Field(None, alias="lambda", gt=1)

    @model_validator(mode="after")
    def _weights(self) -> "MeasureSpec":
        if len(self.atoms) != len(self.weights):
            raise ValueError("atoms and weights differ in length")
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValueError("weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(self.weights):.12g}, not 1")
        return self


class NetSpec(_Model):
    depth: int | None = Field(None, ge=1, le=8)
    grid: int | None = Field(None, ge=2)
    rays: bool = False
    points: list[Any] = []
    interior_depth: int | None = Field(None, ge=0, le=6)
    interior_points: list[Any] = []


class NetsSpec(_Model):
    group: NetSpec = NetSpec(depth=2, interior_depth=2)
    pairs: NetSpec = NetSpec(depth=3)
    horofunctions: NetSpec = NetSpec(depth=3, interior_depth=3)


class ValidateSpaceSpec(_Model):
    quadruples: int = Field(100_000, ge=1)
    boundary_samples: int = Field(10_000, ge=0)
    chain_net: NetSpec | None = None


class DriftSpec(_Model):
    n: int | list[int] = 2000
    trials: int = Field(1000, ge=2)
    fekete_max_m: int = Field(6, ge=1)
    measure: str | None = None

    @field_validator("n")
    @classmethod
    def _positive(cls, v: int | list[int]) -> int | list[int]:
        if any(k < 1 for k in (v if isinstance(v, list) else [v])):
            raise ValueError("walk lengths must be positive")
        return v


class BridgeSpec(_Model):
    xi: Any
    eta: Any
    n: int = Field(200, ge=1)
    trials: int = Field(1000, ge=1)


class HMETSpec(_Model):
    n: int = Field(2000, ge=2)
    trials: int = Field(1000, ge=2)
    probe: Any
    checkpoint_fraction: float = Field(0.5, gt=0, lt=1)
    depth: int = Field(1, ge=1)
    bridge: BridgeSpec | None = None
    measure: str | None = None


class StationarySpec(_Model):
    n: int = Field(50, ge=1)
    trials: int = Field(5000, ge=1)
    starts: list[Any] = Field(min_length=1)
    alpha: float = Field(1.0, gt=0, le=1)
    bins: int = Field(256, ge=2)
    measure: str | None = None


class SubmultiplicativitySpec(_Model):
    alpha: float = Field(0.5, gt=0, le=1)
    max_total: int = Field(6, ge=2)


class ContractionSpec(_Model):
    n_max: int = Field(64, ge=1)
    alphas: list[float] | None = None
    samples: int = Field(20_000, ge=1)
    submultiplicativity: SubmultiplicativitySpec | None = None
    irreducibility_candidates: list[Any] = []
    measure: str | None = None


class FurstenbergSpec(_Model):
    n: int = Field(200, ge=1)
    trials: int = Field(5000, ge=1)
    start: Any = None
    stationary_atom: Any = None
    drift_n: int = Field(2000, ge=1)
    drift_trials: int = Field(1000, ge=2)
    tolerance: float = Field(0.05, gt=0)
    measure: str | None = None

    @model_validator(mode="after")
    def _start_or_atom(self) -> "FurstenbergSpec":
        if self.start is None and self.stationary_atom is None:
            raise ValueError("give a chain start or an explicit stationary atom")
        return self


class ContinuitySpec(_Model):
    family: Literal["tilt", "lazy"] = "tilt"
    signs: list[float] | None = None
    ts: list[float] = Field(min_length=1)
    alpha: float = Field(0.5, gt=0, le=1)
    n: int = Field(2000, ge=1)
    trials: int = Field(1000, ge=2)
    power_n: int = Field(4, ge=1)
    lam: float = Field(alias="lambda", gt=1)
    seed_offset: int = Field(1, ge=1)
    exclusion_factor: float = Field(3.0, ge=0)
    measure: str | None = None

    @model_validator(mode="after")
    def _signs(self) -> "ContinuitySpec":
        if self.family == "tilt" and self.signs is None:
            raise ValueError("tilt family needs signs")
        if any(not 0 < t < 1 for t in self.ts):
            raise ValueError("perturbation sizes must lie in (0, 1)")
        return self


class LDTSpec(_Model):
    epsilons: list[float] = Field(min_length=1)
    n_grid: list[int] = Field(min_length=2)
    trials: int = Field(100_000, ge=1)
    drift: float | None = None
    probe: Any = None
    min_count: int = Field(5, ge=1)
    measure: str | None = None


class ExperimentsSpec(_Model):
    validate_space: ValidateSpaceSpec | None = None
    drift: DriftSpec | None = None
    hmet: HMETSpec | None = None
    stationary: StationarySpec | None = None
    contraction: ContractionSpec | None = None
    furstenberg: FurstenbergSpec | None = None
    continuity: ContinuitySpec | None = None
    ldt: LDTSpec | None = None


class ExperimentConfig(_Model):
    name: str
    seed: int = Field(0, ge=0)
    space: SpaceSpec
    visual: VisualSpec = VisualSpec()
    measures: dict[str, MeasureSpec] = Field(min_length=1)
    base_measure: str
    cap: int = Field(1_000_000, ge=1)
    nets: NetsSpec = NetsSpec()
    experiments: ExperimentsSpec = ExperimentsSpec()

    @model_validator(mode="after")
    def _names(self) -> "ExperimentConfig":
        names = [self.base_measure] + [
            getattr(getattr(self.experiments, k), "measure", None) for k in ExperimentsSpec.model_fields
        ]
        for m in names:
            if m is not None and m not in self.measures:
                raise ValueError(f"unknown measure {m!r}")
        return self

    # ---- derived objects ------------------------------------------------

    def canonical(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else self.model_copy(update={"seed": seed})

    def build(self) -> "Setup":
        try:
            space = build_space(self.space.kind, **self.space.model_dump(exclude_none=True, exclude={"kind"}))
            if isinstance(space, UpperHalfPlane):
                rep = check_hyperbolicity(space, space.delta, LOAD_CHECK_QUADRUPLES, seed=0)
                if not rep.holds:
                    raise ConfigError(f"delta = {space.delta} fails the four-point check by {rep.max_violation:.4g}")
            visual = VisualConfig(self.visual.b, space.delta)
            measures = {
                name: FiniteSupportMeasure.create(
                    space, [space.parse_isometry(a) for a in m.atoms], m.weights, name=name, tol=1e-9
                )
                for name, m in self.measures.items()
            }
        except ConfigError:
            raise
        except (HorodriftError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(str(e)) from e
        return Setup(self, space, visual, measures)


class Setup:
    """Validated config together with the objects built from it."""

    def __init__(self, config: ExperimentConfig, space: SpaceModel, visual: VisualConfig, measures: dict):
        self.config = config
        self.space = space
        self.visual = visual
        self.measures = measures

    def measure(self, name: str | None = None) -> FiniteSupportMeasure:
        return self.measures[name or self.config.base_measure]

    def lam(self, name: str | None = None) -> float | None:
        return self.config.measures[name or self.config.base_measure].lam

    def boundary_point(self, spec: Any) -> Any:
        try:
            return parse_boundary_point(self.space, spec)
        except (HorodriftError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"bad boundary point {spec!r}: {e}") from e

    def net(self, spec: NetSpec) -> list:
        space = self.space
        out: list = []
        try:
            if spec.depth is not None:
                if not isinstance(space, FreeGroupTree):
                    raise ConfigError("net depth applies to tree spaces only")
                out += tree_depth_ends(space, spec.depth)
            if spec.grid is not None:
                if not isinstance(space, UpperHalfPlane):
                    raise ConfigError("net grid applies to the half-plane only")
                out += halfplane_boundary_grid(spec.grid)
            if spec.rays:
                if not isinstance(space, StarSpace):
                    raise ConfigError("ray nets apply to star spaces only")
                out += star_ends(space)
            out += [parse_boundary_point(space, p) for p in spec.points]
            if spec.interior_depth is not None:
                if not isinstance(space, FreeGroupTree):
                    raise ConfigError("interior_depth applies to tree spaces only")
                out += tree_words_up_to(space, spec.interior_depth)
            out += [space.parse_point(p) for p in spec.interior_points]
        except ConfigError:
            raise
        except (HorodriftError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"bad net entry: {e}") from e
        if not out:
            raise ConfigError("net is empty")
        return out


def _format_error(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_error(e)) from e


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    return parse_config(data)
