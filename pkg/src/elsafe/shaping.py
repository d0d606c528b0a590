"""Piecewise-linear shaping functions for the reshaped QP.

``alpha_c`` is a class-K^e gain (strictly increasing, zero at zero) defined
on the whole real line; ``phi`` is a nonnegative, nonincreasing relaxation
on ``[-1, 1]`` that vanishes on ``[c0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PiecewiseLinear:
    """Continuous piecewise-linear function with linear extrapolation.

    ``xs`` are strictly increasing breakpoints with values ``ys``; outside
    ``[xs[0], xs[-1]]`` the function continues with ``left_slope`` and
    ``right_slope``.
    """

    def __init__(self, xs, ys, left_slope: float = 0.0, right_slope: float = 0.0):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or len(xs) < 1 or len(xs) != len(ys):
            raise ValueError("xs and ys must be 1-D arrays of equal, nonzero length")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.xs, self.ys = xs, ys
        self.left_slope = float(left_slope)
        self.right_slope = float(right_slope)

    def __call__(self, x):
        x0 = np.asarray(x, dtype=float)
        x = x0.reshape(-1)
        y = np.interp(x, self.xs, self.ys)
        lo, hi = self.xs[0], self.xs[-1]
        with np.errstate(invalid="ignore"):
            if self.left_slope and (x < lo).any():
                m = x < lo
                y[m] = self.ys[0] + self.left_slope * (x[m] - lo)
            if self.right_slope and (x > hi).any():
                m = x > hi
                y[m] = self.ys[-1] + self.right_slope * (x[m] - hi)
        return y.reshape(x0.shape) if x0.ndim else float(y[0])

    @property
    def slopes(self) -> np.ndarray:
        inner = np.diff(self.ys) / np.diff(self.xs)
        return np.concatenate([[self.left_slope], inner, [self.right_slope]])

    @property
    def lipschitz(self) -> float:
        return float(np.abs(self.slopes).max())

    def is_strictly_increasing(self) -> bool:
        return bool(np.all(self.slopes > 0))

    def is_nonincreasing(self) -> bool:
        return bool(np.all(self.slopes <= 0))

    def inverse(self) -> "PiecewiseLinear":
        if not self.is_strictly_increasing():
            raise ValueError("only strictly increasing functions are invertible")
        return PiecewiseLinear(self.ys, self.xs, 1 / self.left_slope, 1 / self.right_slope)

    def restricted_breakpoints(self, lo: float, hi: float) -> np.ndarray:
        return self.xs[(self.xs > lo) & (self.xs < hi)]

    def __repr__(self):
        pts = ", ".join(f"({x:.6g}, {y:.6g})" for x, y in zip(self.xs, self.ys))
        return f"PiecewiseLinear([{pts}], left={self.left_slope:.6g}, right={self.right_slope:.6g})"


def three_segment_gain(slope_neg: float, knee: float, knee_value: float, slope_pos: float) -> PiecewiseLinear:
    """Gain with slope ``slope_neg`` below zero, a steep ramp to ``(knee, knee_value)``, then ``slope_pos``."""
    return PiecewiseLinear([0.0, knee], [0.0, knee_value], slope_neg, slope_pos)


def affine_relaxation(slope: float, intercept: float) -> PiecewiseLinear:
    """``phi(s) = max(-slope * s + intercept, 0)`` restricted to ``[-1, 1]``."""
    zero = intercept / slope
    xs, ys = [-1.0], [slope + intercept]
    if -1 < zero < 1:
        xs.append(zero)
        ys.append(0.0)
    xs.append(1.0)
    ys.append(max(-slope + intercept, 0.0))
    return PiecewiseLinear(xs, np.maximum(ys, 0.0))


@dataclass
class ShapingFns:
    alpha_c: PiecewiseLinear
    phi: PiecewiseLinear
    c0: float

    def __post_init__(self):
        self._alpha_inv = self.alpha_c.inverse() if self.alpha_c.is_strictly_increasing() else None

    def alpha_c_inv(self, y):
        if self._alpha_inv is None:
            raise ValueError("alpha_c is not strictly increasing")
        return self._alpha_inv(y)

    def alpha_p(self, s):
        a = self.alpha_c(s)
        return np.maximum(a, self.c0 * a)

    @property
    def L_phi(self) -> float:
        return self.phi.lipschitz

    @property
    def L_alpha(self) -> float:
        """Lipschitz constant of ``c0 * alpha_c``."""
        return self.c0 * self.alpha_c.lipschitz

    def shape_problems(self) -> list[str]:
        """Violations of the structural requirements (empty when valid)."""
        out = []
        if abs(self.alpha_c(0.0)) > 1e-15:
            out.append("alpha_c(0) != 0")
        if not self.alpha_c.is_strictly_increasing():
            out.append("alpha_c is not strictly increasing")
        if not self.phi.is_nonincreasing():
            out.append("phi is not nonincreasing")
        grid = np.concatenate([self.phi.xs, [-1.0, 1.0]])
        if np.any(self.phi(grid) < 0):
            out.append("phi takes negative values")
        if self.phi.xs[0] > -1 or self.phi.xs[-1] < 1:
            out.append("phi breakpoints must span [-1, 1]")
        return out
