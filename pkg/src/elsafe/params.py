"""Scalar filter parameters and the two bundled parameter presets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .shaping import ShapingFns, affine_relaxation, three_segment_gain


@dataclass(frozen=True)
class FilterParams:
    d_r: float  # robust margin (rad/s)
    v_bar: float  # velocity cap
    v_bar_c: float  # primary command cap
    c0: float
    d_a: float
    d_b: float
    d_h: float
    d_s_min: float
    d_s_max: float
    Delta_h: Optional[float] = None  # robustness depth, defaults to d_h
    d_f: Optional[float] = None  # neighborhood radius for the reduced filter

    def __post_init__(self):
        if self.Delta_h is None:
            object.__setattr__(self, "Delta_h", self.d_h)
        for name in ("d_r", "v_bar", "v_bar_c", "d_a", "d_b", "d_h", "d_s_min", "d_s_max", "Delta_h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_f is not None and not self.d_f > 0:
            raise ValueError(f"d_f must be positive, got {self.d_f}")
        if not 0 < self.c0 < 1:
            raise ValueError(f"c0 must lie in (0, 1), got {self.c0}")
        if self.d_s_max < self.d_s_min:
            raise ValueError("d_s_max must be >= d_s_min")

    def with_(self, **kw) -> "FilterParams":
        return replace(self, **kw)

    @property
    def delta(self) -> float:
        """d_r / (v_bar - d_r); only meaningful when v_bar > d_r."""
        return self.d_r / (self.v_bar - self.d_r)

    @property
    def c_star(self) -> float:
        w = 2 * self.d_s_max + self.d_b
        return (w * w - 4 * self.d_s_min**2 + 2 * self.d_a**2) / (2 * w * w)

    @property
    def gap(self) -> float:
        """D = sqrt(c* + delta) - sqrt(c*)."""
        cs = self.c_star
        return math.sqrt(cs + self.delta) - math.sqrt(cs)

    @property
    def speed_floor(self) -> float:
        """Largest admissible offset c0 (v_bar - d_r)."""
        return self.c0 * (self.v_bar - self.d_r)


def _arm_sim():
    p = FilterParams(d_r=0.0105, v_bar=0.3142, v_bar_c=0.2618, c0=0.9965, d_a=0.1561, d_b=0.0182,
                     d_h=0.00002, d_s_min=0.1745, d_s_max=0.1745, d_f=0.0098)
    # knee value kept, middle slope is knee_value / knee so the gain stays continuous
    alpha = three_segment_gain(0.9, 0.0091, 0.3136, 0.9)
    phi = affine_relaxation(0.3362, 0.3350)
    return p, ShapingFns(alpha, phi, p.c0)


def _arm_hardware():
    p = FilterParams(d_r=0.0209, v_bar=0.5585, v_bar_c=0.2094, c0=0.9965, d_a=0.1561, d_b=0.0182,
                     d_h=0.000002, d_s_min=0.1745, d_s_max=0.1745, d_f=0.0091)
    alpha = three_segment_gain(1.8, 0.0091, 0.5585, 1.8)
    phi = affine_relaxation(1.4881, 1.4828)
    return p, ShapingFns(alpha, phi, p.c0)


PRESETS = {"arm_sim": _arm_sim, "arm_hardware": _arm_hardware}


def preset(name: str):
    """``(FilterParams, ShapingFns)`` for a named preset."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
