"""Outer-loop safety filters: baseline, reshaped (full) and reshaped (reduced).

All three map a configuration ``q`` and a primary velocity command ``v_c``
to the closest velocity reference ``v*`` inside a polyhedron. The baseline
uses one row per obstacle; the reshaped filters use one row per basis
direction, with offsets computed from the distance-regularization value

    r(q, l_k) = min_i [ h_i(q) + phi(l_oi(q) . l_k) ].

An empty field yields ``r = +inf`` so the speed cap alone shapes the set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import PositiveBasis
from .errors import SingularDirection
from .geometry import EPS_SING, ObstacleField
from .params import FilterParams
from .qp import DEFAULT_TOL, HalfspaceSet, QPSolution, QPTolerances, project
from .shaping import ShapingFns

KINDS = ("baseline", "full", "reduced")


def barriers_and_directions(field: ObstacleField, q, idx=None):
    """``(h, U)``: barrier values and unit directions toward the obstacle centers."""
    q = np.asarray(q, dtype=float)
    c = field.centers if idx is None else field.centers[idx]
    rad = field.radii if idx is None else field.radii[idx]
    d = c - q
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    if len(dist) and dist.min() < EPS_SING:
        raise SingularDirection(f"query point within {EPS_SING} of an obstacle center")
    return dist - rad, d / dist[:, None]


def _bracket_min(h, U, fns: ShapingFns, L):
    """``min_i [h_i + phi(U_i . l_k)]`` for every row ``l_k`` of ``L``."""
    if len(h) == 0:
        return np.full(len(L), np.inf)
    return (h[:, None] + fns.phi(U @ L.T)).min(axis=0)


def reshape_r(q, l_k, field: ObstacleField, fns: ShapingFns) -> float:
    h, U = barriers_and_directions(field, q)
    return float(_bracket_min(h, U, fns, np.atleast_2d(l_k))[0])


def reshape_r_reduced(q, l_k, field: ObstacleField, fns: ShapingFns, d_f: float) -> float:
    idx = field.near(q, d_f)
    h, U = barriers_and_directions(field, q, idx)
    return float(min(_bracket_min(h, U, fns, np.atleast_2d(l_k))[0], d_f))


def reshape_values(q, field, fns, basis: PositiveBasis) -> np.ndarray:
    """``r(q, l_k)`` for all basis directions at once."""
    h, U = barriers_and_directions(field, q)
    return _bracket_min(h, U, fns, basis.vectors)


def reshape_values_reduced(q, field, fns, basis: PositiveBasis, d_f: float) -> np.ndarray:
    idx = field.near(q, d_f)
    h, U = barriers_and_directions(field, q, idx)
    return np.minimum(_bracket_min(h, U, fns, basis.vectors), d_f)


def assemble_full(q, field, fns: ShapingFns, p: FilterParams, basis: PositiveBasis) -> HalfspaceSet:
    r = reshape_values(q, field, fns, basis)
    b = np.minimum(p.c0 * fns.alpha_c(r) - p.d_r, p.speed_floor)
    return HalfspaceSet(basis.vectors, b)


def assemble_reduced(q, field, fns: ShapingFns, p: FilterParams, basis: PositiveBasis) -> HalfspaceSet:
    if p.d_f is None:
        raise ValueError("the reduced filter needs d_f")
    r = reshape_values_reduced(q, field, fns, basis, p.d_f)
    return HalfspaceSet(basis.vectors, p.c0 * fns.alpha_c(r) - p.d_r)


def assemble_baseline(q, field, alpha_p, d_r: float) -> HalfspaceSet:
    h, U = barriers_and_directions(field, q)
    return HalfspaceSet(U.reshape(len(h), -1), alpha_p(h) - d_r)


def filter_full(q, v_c, field, fns, p, basis, tol: QPTolerances = DEFAULT_TOL) -> np.ndarray:
    return project(v_c, assemble_full(q, field, fns, p, basis), tol).point


def filter_reduced(q, v_c, field, fns, p, basis, tol: QPTolerances = DEFAULT_TOL) -> np.ndarray:
    return project(v_c, assemble_reduced(q, field, fns, p, basis), tol).point


def filter_baseline(q, v_c, field, alpha_p, d_r, tol: QPTolerances = DEFAULT_TOL) -> np.ndarray:
    return project(v_c, assemble_baseline(q, field, alpha_p, d_r), tol).point


@dataclass
class SafetyFilter:
    """Bundles the data one filter variant needs; calling it returns ``v*``."""

    kind: str
    field: ObstacleField
    fns: ShapingFns
    params: FilterParams
    basis: Optional[PositiveBasis] = None
    tol: QPTolerances = DEFAULT_TOL

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "baseline" and self.basis is None:
            raise ValueError("reshaped filters need a positive basis")

    def constraints(self, q) -> HalfspaceSet:
        if self.kind == "full":
            return assemble_full(q, self.field, self.fns, self.params, self.basis)
        if self.kind == "reduced":
            return assemble_reduced(q, self.field, self.fns, self.params, self.basis)
        return assemble_baseline(q, self.field, self.fns.alpha_p, self.params.d_r)

    def solve(self, q, v_c) -> QPSolution:
        return project(v_c, self.constraints(q), self.tol)

    def __call__(self, q, v_c) -> np.ndarray:
        return self.solve(q, v_c).point
