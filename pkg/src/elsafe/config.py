"""YAML run configuration (schema-validated, unknown keys rejected).

Units: angles and configuration distances in rad, velocities in rad/s,
lengths in m, masses in kg, gains in N*m*s/rad, times in s.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .basis import PositiveBasis, build_circle_basis, build_sphere_basis
from .conditions import synthesize_shaping
from .dynamics import InnerLoopGains, TwoLinkModel
from .errors import ConfigError
from .geometry import DistanceParams, ObstacleField, cover_unsafe_region
from .params import FilterParams
from .scenario import Scenario
from .shaping import PiecewiseLinear, ShapingFns, affine_relaxation, three_segment_gain
from .workspace import TwoLinkWorkspace


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelCfg(_Strict):
    kind: Literal["two_link"] = "two_link"
    m1: float = Field(2.0, gt=0, description="link 1 mass (kg)")
    l1: float = Field(0.25, gt=0, description="link 1 length (m)")
    m2: float = Field(3.0, gt=0, description="link 2 mass (kg)")
    l2: float = Field(0.4, gt=0, description="link 2 length (m)")
    g: float = Field(9.81, ge=0, description="gravity (m/s^2)")


class WorkspaceCfg(_Strict):
    half_width: float = Field(0.035, ge=0, description="link capsule half width (m)")
    floor_y: float = Field(0.0, description="floor height (m)")
    discs: List[List[float]] = Field(default_factory=list, description="[cx, cy, radius] (m)")


class CoverCfg(_Strict):
    workspace: WorkspaceCfg = WorkspaceCfg()
    bounds: List[List[float]] = Field(description="[lo, hi] per joint (rad)")
    cell_size: float = Field(gt=0, description="grid cell edge (rad)")
    radius: float = Field(gt=0, description="ball radius (rad)")
    subgrid: int = Field(5, ge=1)


class ObstaclesCfg(_Strict):
    file: Optional[str] = Field(None, description="obstacle file, relative to the config")
    inline: Optional[List[List[float]]] = Field(None, description="rows [c_1, ..., c_n, radius] (rad)")
    cover: Optional[CoverCfg] = None

    @model_validator(mode="after")
    def _one_source(self):
        if sum(x is not None for x in (self.file, self.inline, self.cover)) != 1:
            raise ValueError("obstacles need exactly one of: file, inline, cover")
        return self


class DistancesCfg(_Strict):
    d_a: float = Field(gt=0, description="rad")
    d_b: float = Field(gt=0, description="rad")
    d_h: float = Field(gt=0, description="rad")


class FilterCfg(_Strict):
    d_r: float = Field(gt=0, description="robust margin (rad/s)")
    v_bar: float = Field(gt=0, description="velocity cap (rad/s)")
    v_bar_c: float = Field(gt=0, description="primary command cap (rad/s)")
    c0: float = Field(gt=0, lt=1)
    Delta_h: Optional[float] = Field(None, gt=0, description="robustness depth (rad), defaults to d_h")
    d_f: Optional[float] = Field(None, gt=0, description="neighborhood radius (rad)")
    d_s_min: Optional[float] = Field(None, gt=0, description="smallest ball radius (rad), defaults to the field")
    d_s_max: Optional[float] = Field(None, gt=0, description="largest ball radius (rad), defaults to the field")


class FnCfg(_Strict):
    """A piecewise-linear function in one of three spellings.

    Breakpoints (``xs``, ``ys`` and end slopes); a three-segment gain
    (``slope_neg``, ``knee``, ``knee_value``, ``slope_pos``); or a ramp
    ``max(-slope * s + intercept, 0)`` on ``[-1, 1]`` (``slope``, ``intercept``).
    """

    xs: Optional[List[float]] = None
    ys: Optional[List[float]] = None
    left_slope: float = 0.0
    right_slope: float = 0.0
    slope_neg: Optional[float] = None
    knee: Optional[float] = None
    knee_value: Optional[float] = None
    slope_pos: Optional[float] = None
    slope: Optional[float] = None
    intercept: Optional[float] = None

    @model_validator(mode="after")
    def _one_form(self):
        forms = [self.xs is not None and self.ys is not None,
                 None not in (self.slope_neg, self.knee, self.knee_value, self.slope_pos),
                 None not in (self.slope, self.intercept)]
        if sum(forms) != 1:
            raise ValueError("give exactly one of: xs/ys, slope_neg/knee/knee_value/slope_pos, slope/intercept")
        return self

    def build(self) -> PiecewiseLinear:
        if self.xs is not None:
            return PiecewiseLinear(self.xs, self.ys, self.left_slope, self.right_slope)
        if self.knee is not None:
            return three_segment_gain(self.slope_neg, self.knee, self.knee_value, self.slope_pos)
        return affine_relaxation(self.slope, self.intercept)


class ShapingCfg(_Strict):
    mode: Literal["explicit", "synthesize"] = "explicit"
    alpha_c: Optional[FnCfg] = None
    phi: Optional[FnCfg] = None

    @model_validator(mode="after")
    def _complete(self):
        if self.mode == "explicit" and (self.alpha_c is None or self.phi is None):
            raise ValueError("explicit shaping needs alpha_c and phi")
        return self


class BasisCfg(_Strict):
    construction: Literal["circle", "sphere"] = "circle"
    c0: Optional[float] = Field(None, gt=0, lt=1, description="defaults to filter.c0")
    seed: int = 0
    cap: int = 5000


class GainsCfg(_Strict):
    k_D: float = Field(gt=0, description="N*m*s/rad")


class ScenarioCfg(_Strict):
    q0: List[float]
    qdot0: Optional[List[float]] = None
    waypoints: List[List[float]]
    sat_gain: float = Field(0.5236, gt=0, description="rad/s per rad")
    duration: float = Field(ge=0, description="s")
    dt: float = Field(1e-3, gt=0, description="s")
    filter_kind: Literal["baseline", "full", "reduced"] = "full"
    integrator: Literal["implicit", "rk4"] = "implicit"
    rk4_mode: Literal["continuous", "sampled"] = "continuous"
    delta_wp: float = Field(0.05, gt=0, description="waypoint switch radius (rad)")


class CheckCfg(_Strict):
    mu_samples: int = Field(1000, ge=100)
    coverage_samples: int = Field(10_000, ge=1)
    lipschitz_samples: int = Field(10_000, ge=1)
    ball_distance_pitch: Optional[float] = Field(None, gt=0)


class ProbeCfg(_Strict):
    pairs: int = Field(10_000, ge=1)
    separations: List[float] = Field(default_factory=lambda: [1e-2, 1e-4, 1e-6])
    band: float = Field(0.05, gt=0, description="shell width around balls (rad)")
    kinds: List[Literal["baseline", "full", "reduced"]] = Field(
        default_factory=lambda: ["baseline", "full", "reduced"])


class BenchCfg(_Strict):
    sizes: List[int] = Field(default_factory=lambda: [3457, 8747, 13617])
    trials: int = Field(50, ge=1)


class OutputCfg(_Strict):
    dir: str = "out"


class RunConfig(_Strict):
    seed: int = 0
    model: Optional[ModelCfg] = None
    obstacles: Optional[ObstaclesCfg] = None
    distances: DistancesCfg
    filter: FilterCfg
    shaping: ShapingCfg
    basis: BasisCfg = BasisCfg()
    gains: Optional[GainsCfg] = None
    scenario: Optional[ScenarioCfg] = None
    check: CheckCfg = CheckCfg()
    probe: ProbeCfg = ProbeCfg()
    bench: BenchCfg = BenchCfg()
    output: OutputCfg = OutputCfg()


BUNDLED = ("arm_sim", "arm_hardware")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("elsafe") / "data" / f"{name}.yaml"))


def resolve_config_path(name_or_path: str) -> Path:
    """A file path, or the name of a bundled config."""
    p = Path(name_or_path)
    if p.exists():
        return p
    if name_or_path in BUNDLED:
        return bundled_path(name_or_path)
    raise ConfigError(f"config {name_or_path!r} not found (bundled configs: {', '.join(BUNDLED)})")


def load_config(name_or_path) -> tuple:
    """``(RunConfig, base_dir)`` from a path or bundled name."""
    path = resolve_config_path(str(name_or_path))
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return RunConfig.model_validate(raw or {}), path.parent
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class Built:
    cfg: RunConfig
    field: Optional[ObstacleField]
    distances: DistanceParams
    params: FilterParams
    shaping: ShapingFns
    basis: PositiveBasis
    model: Optional[TwoLinkModel]
    gains: Optional[InnerLoopGains]
    scenario: Optional[Scenario]
    workspace: Optional[TwoLinkWorkspace] = None


def build_field(cfg: ObstaclesCfg, base: Path):
    if cfg.file is not None:
        path = Path(cfg.file)
        if not path.is_absolute():
            path = base / path
        return ObstacleField.load(path), None
    if cfg.inline is not None:
        rows = np.asarray(cfg.inline, dtype=float)
        return ObstacleField(rows[:, :-1], rows[:, -1]), None
    c = cfg.cover
    ws = TwoLinkWorkspace(half_width=c.workspace.half_width, floor_y=c.workspace.floor_y,
                          discs=[tuple(d) for d in c.workspace.discs])
    return cover_unsafe_region(ws.unsafe, c.bounds, c.cell_size, c.radius, c.subgrid), ws


def build(cfg: RunConfig, base: Path = Path("."), filter_kind: Optional[str] = None) -> Built:
    field, ws = (build_field(cfg.obstacles, base) if cfg.obstacles is not None else (None, None))
    f = cfg.filter
    d_s_min = f.d_s_min or (field.min_radius if field is not None and len(field) else None)
    d_s_max = f.d_s_max or (field.max_radius if field is not None and len(field) else None)
    if d_s_min is None or d_s_max is None:
        raise ConfigError("d_s_min/d_s_max must be given when there is no obstacle field")
    dist = DistanceParams(cfg.distances.d_a, cfg.distances.d_b, cfg.distances.d_h)
    try:
        params = FilterParams(d_r=f.d_r, v_bar=f.v_bar, v_bar_c=f.v_bar_c, c0=f.c0, d_a=dist.d_a,
                              d_b=dist.d_b, d_h=dist.d_h, d_s_min=d_s_min, d_s_max=d_s_max,
                              Delta_h=f.Delta_h, d_f=f.d_f)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.shaping.mode == "synthesize":
        shaping = synthesize_shaping(params)
    else:
        shaping = ShapingFns(cfg.shaping.alpha_c.build(), cfg.shaping.phi.build(), params.c0)
    c0 = cfg.basis.c0 or params.c0
    n = field.dim if field is not None else 2
    if cfg.basis.construction == "circle":
        basis = build_circle_basis(c0)
    else:
        basis = build_sphere_basis(n, c0, seed=cfg.basis.seed, cap=cfg.basis.cap)
    model = None
    if cfg.model is not None:
        m = cfg.model
        model = TwoLinkModel(m.m1, m.l1, m.m2, m.l2, m.g)
    gains = InnerLoopGains(cfg.gains.k_D) if cfg.gains is not None else None
    sc = None
    if cfg.scenario is not None:
        if field is None or model is None or gains is None:
            raise ConfigError("a scenario needs obstacles, model and gains sections")
        s = cfg.scenario
        sc = Scenario(field, params, shaping, basis, model, gains, s.q0,
                      s.qdot0 if s.qdot0 is not None else np.zeros(len(s.q0)), s.waypoints,
                      sat_gain=s.sat_gain, duration=s.duration, dt=s.dt,
                      filter_kind=filter_kind or s.filter_kind, integrator=s.integrator,
                      rk4_mode=s.rk4_mode, delta_wp=s.delta_wp)
    return Built(cfg, field, dist, params, shaping, basis, model, gains, sc, ws)
