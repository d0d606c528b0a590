"""Positive bases with a directional coverage constant.

A basis ``l_1..l_m`` with constant ``c0`` must cover every unit direction
``v``: the subset ``S(v) = {l_k : l_k . v >= c0}`` has at least ``n`` members
and ``v`` is a nonnegative combination of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .errors import BudgetExceeded, DecompositionFailed, InvalidC0

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class PositiveBasis:
    vectors: np.ndarray  # (m, n), unit rows
    c0: float

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim != 2 or len(v) == 0:
            raise ValueError("basis vectors must form a non-empty (m, n) array")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1) > 1e-12):
            raise ValueError("basis vectors must have unit norm")
        if not 0 <= self.c0 < 1:
            raise InvalidC0(f"c0 must lie in [0, 1), got {self.c0}")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def cover_set(self, v) -> np.ndarray:
        """Indices of ``S(v)``; the tie ``l_k . v == c0`` counts as inside."""
        return np.flatnonzero(self.vectors @ np.asarray(v, dtype=float) >= self.c0)

    def dumps(self) -> str:
        lines = [f"{self.n} {self.m} {self.c0:.17g}"]
        lines += [" ".join(f"{x:.17g}" for x in row) for row in self.vectors]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PositiveBasis":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        n, m, c0 = int(rows[0][0]), int(rows[0][1]), float(rows[0][2])
        vecs = np.array([[float(x) for x in r] for r in rows[1:]])
        if vecs.shape != (m, n):
            raise ValueError(f"expected {m} vectors of dimension {n}, got {vecs.shape}")
        return cls(vecs, c0)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def _check_c0(c0: float) -> None:
    if not 0 < c0 < 1:
        raise InvalidC0(f"c0 must lie in (0, 1), got {c0}")


def circle_basis_size(c0: float) -> int:
    _check_c0(c0)
    ratio = 2 * math.pi / math.acos(c0)
    # guard exact divisors (c0 = 0.5 -> 6) against rounding up
    return max(3, math.ceil(ratio - 1e-9))


def build_circle_basis(c0: float) -> PositiveBasis:
    """Evenly spaced unit vectors in the plane, adjacent angle <= arccos(c0)."""
    m = circle_basis_size(c0)
    ang = 2 * np.pi * np.arange(m) / m
    return PositiveBasis(np.stack([np.cos(ang), np.sin(ang)], axis=1), c0)


def _fibonacci_sphere(m: int, rotation: np.ndarray) -> np.ndarray:
    k = np.arange(m) + 0.5
    z = 1 - 2 * k / m
    rho = np.sqrt(1 - z * z)
    theta = np.pi * (1 + 5**0.5) * k
    pts = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    return pts @ rotation.T


def _random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    qm, r = np.linalg.qr(rng.standard_normal((n, n)))
    return qm * np.sign(np.diag(r))


def _quasi_uniform(n: int, m: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if n == 3:
        pts = _fibonacci_sphere(m, _random_rotation(3, rng))
    else:
        pts = rng.standard_normal((m, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def build_sphere_basis(
    n: int,
    c0: float,
    seed: int = 0,
    cap: int = 5000,
    audit_samples: int = 2000,
) -> PositiveBasis:
    """Densify a quasi-uniform sphere point set until its coverage audit passes.

    Fibonacci lattice (randomly rotated by ``seed``) for ``n == 3``, seeded
    Gaussian directions otherwise. Raises :class:`BudgetExceeded` once the
    size would pass ``cap`` without a passing audit.
    """
    _check_c0(c0)
    if n < 3:
        raise ValueError("build_sphere_basis needs n >= 3; use build_circle_basis for n = 2")
    m = 2 * n
    while True:
        basis = PositiveBasis(_quasi_uniform(n, m, seed), c0)
        if verify_coverage(basis, audit_samples, seed).passed:
            return basis
        nxt = int(math.ceil(m * 1.25))
        if nxt > cap:
            raise BudgetExceeded(f"no covering basis with at most {cap} vectors for n={n}, c0={c0}")
        m = nxt


@dataclass
class CoverageReport:
    passed: bool
    samples: int
    min_cardinality: int
    max_residual: float
    coef_sum_range: tuple
    witness: Optional[np.ndarray] = None
    reason: str = ""


def sample_directions(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def verify_coverage(basis: PositiveBasis, sample_count: int = 10_000, seed: int = 0) -> CoverageReport:
    dirs = sample_directions(basis.n, sample_count, seed)
    dots = dirs @ basis.vectors.T
    min_card = basis.m
    max_res = 0.0
    lo, hi = math.inf, -math.inf
    for v, row in zip(dirs, dots):
        idx = np.flatnonzero(row >= basis.c0)
        min_card = min(min_card, len(idx))
        if len(idx) < basis.n:
            return CoverageReport(False, sample_count, min_card, max_res, (lo, hi), v,
                                  f"|S(v)| = {len(idx)} < n = {basis.n}")
        rho, res = nnls(basis.vectors[idx].T, v)
        max_res = max(max_res, res)
        if res > RESIDUAL_TOL:
            return CoverageReport(False, sample_count, min_card, max_res, (lo, hi), v,
                                  f"nonnegative residual {res:.3g}")
        lo, hi = min(lo, rho.sum()), max(hi, rho.sum())
    return CoverageReport(True, sample_count, min_card, max_res, (lo, hi))


def decompose(basis: PositiveBasis, v, max_subsets: int = 5000):
    """Nonnegative coefficients ``rho`` with ``v = sum rho_j l_j`` over ``S(v)``.

    Among ``n``-element subsets of ``S(v)`` that reproduce ``v`` with
    nonnegative weights, the one with the largest smallest weight is chosen
    (ties: lowest indices). Falls back to NNLS over all of ``S(v)`` when the
    subset count exceeds ``max_subsets``. Returns ``(indices, rho)``.
    """
    v = np.asarray(v, dtype=float)
    idx = basis.cover_set(v)
    n = basis.n
    if len(idx) < n:
        raise DecompositionFailed(f"|S(v)| = {len(idx)} < n = {n}")
    best = None
    if math.comb(len(idx), n) <= max_subsets:
        for sub in combinations(idx, n):
            a = basis.vectors[list(sub)].T
            if abs(np.linalg.det(a)) < 1e-14:
                continue
            rho = np.linalg.solve(a, v)
            if rho.min() < -1e-12:
                continue
            if best is None or rho.min() > best[1].min() + 1e-15:
                best = (np.array(sub), np.clip(rho, 0, None))
    if best is None:
        rho, _ = nnls(basis.vectors[idx].T, v)
        best = (idx, rho)
    sel, rho = best
    res = np.linalg.norm(basis.vectors[sel].T @ rho - v)
    if res > RESIDUAL_TOL:
        raise DecompositionFailed(f"residual {res:.3g} exceeds {RESIDUAL_TOL}")
    total = rho.sum()
    if basis.c0 > 0 and not (1 - 1e-12 <= total <= 1 / basis.c0 + 1e-12):
        raise DecompositionFailed(f"coefficient sum {total} outside [1, 1/c0]")
    return sel, rho
