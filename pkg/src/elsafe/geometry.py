"""Ball obstacles in configuration space.

Barriers are signed distances ``h_i(q) = |c_i - q| - r_i``; a point is safe
with respect to obstacle ``i`` when ``h_i(q) >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import RadiusTooSmall, SingularDirection

EPS_SING = 1e-9


@dataclass(frozen=True)
class BallObstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("obstacle center must be finite")
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


class ObstacleField:
    """Immutable ordered collection of ball obstacles with a KD-tree index.

    Centers are stored as an ``(N, n)`` array and radii as ``(N,)`` so the
    filters can evaluate every barrier in one vectorized pass.
    """

    def __init__(self, centers, radii, dim: Optional[int] = None, index: bool = True):
        centers = np.asarray(centers, dtype=float)
        radii = np.asarray(radii, dtype=float).reshape(-1)
        if centers.size == 0:
            if dim is None:
                raise ValueError("empty field needs an explicit dimension")
            centers = np.zeros((0, dim))
        if centers.ndim != 2:
            raise ValueError("centers must be an (N, n) array")
        if len(radii) != len(centers):
            raise ValueError("centers and radii differ in length")
        if np.any(radii <= 0):
            raise ValueError("obstacle radii must be positive")
        if not np.all(np.isfinite(centers)):
            raise ValueError("obstacle centers must be finite")
        centers.setflags(write=False)
        radii.setflags(write=False)
        self.centers = centers
        self.radii = radii
        self.dim = centers.shape[1]
        self._tree = cKDTree(centers) if (index and len(radii)) else None

    @classmethod
    def from_obstacles(cls, obstacles: Sequence[BallObstacle], dim: Optional[int] = None):
        if not obstacles:
            return cls(np.zeros((0, dim or 0)), [], dim=dim)
        return cls([o.center for o in obstacles], [o.radius for o in obstacles])

    def __len__(self):
        return len(self.radii)

    def __getitem__(self, i) -> BallObstacle:
        return BallObstacle(self.centers[i].copy(), float(self.radii[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def min_radius(self) -> float:
        return float(self.radii.min()) if len(self) else math.inf

    @property
    def max_radius(self) -> float:
        return float(self.radii.max()) if len(self) else 0.0

    @property
    def has_index(self) -> bool:
        return self._tree is not None

    def barriers(self, q) -> np.ndarray:
        """All barrier values ``h_i(q)`` as an ``(N,)`` array."""
        q = np.asarray(q, dtype=float)
        d = self.centers - q
        return np.sqrt(np.einsum("ij,ij->i", d, d)) - self.radii

    def near(self, q, d_f: float) -> np.ndarray:
        """Indices ``i`` with ``h_i(q) <= d_f``, ascending."""
        q = np.asarray(q, dtype=float)
        if len(self) == 0:
            return np.zeros(0, dtype=int)
        if self._tree is None:
            return np.flatnonzero(self.barriers(q) <= d_f)
        cand = self._tree.query_ball_point(q, d_f + self.max_radius)
        if not cand:
            return np.zeros(0, dtype=int)
        cand = np.sort(np.asarray(cand, dtype=int))
        d = self.centers[cand] - q
        h = np.sqrt(np.einsum("ij,ij->i", d, d)) - self.radii[cand]
        return cand[h <= d_f]

    def save(self, path) -> None:
        Path(path).write_text(dumps_field(self))

    @classmethod
    def load(cls, path) -> "ObstacleField":
        return loads_field(Path(path).read_text())


def barrier(obs: BallObstacle, q) -> float:
    return float(np.linalg.norm(obs.center - np.asarray(q, dtype=float)) - obs.radius)


def unit_to_obstacle(obs: BallObstacle, q) -> np.ndarray:
    d = obs.center - np.asarray(q, dtype=float)
    dist = np.linalg.norm(d)
    if dist < EPS_SING:
        raise SingularDirection(f"query point within {EPS_SING} of obstacle center")
    return d / dist


def dumps_field(field_: ObstacleField) -> str:
    lines = [f"{field_.dim} {len(field_)}"]
    for c, r in zip(field_.centers, field_.radii):
        lines.append(" ".join(f"{x:.17g}" for x in (*c, r)))
    return "\n".join(lines) + "\n"


def loads_field(text: str) -> ObstacleField:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError("obstacle file must start with a header line 'n N'")
    n, count = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != count:
        raise ValueError(f"header announces {count} obstacles, found {len(body)}")
    data = np.array([[float(x) for x in r] for r in body]).reshape(count, -1) if count else np.zeros((0, n + 1))
    if data.shape[1] != n + 1:
        raise ValueError(f"each obstacle line needs {n + 1} numbers")
    return ObstacleField(data[:, :n], data[:, n], dim=n)


@dataclass(frozen=True)
class DistanceParams:
    """Ball-distance margins ``d_a``, ``d_b``, ``d_h`` (rad)."""

    d_a: float
    d_b: float
    d_h: float

    def validate(self, field_: Optional[ObstacleField] = None) -> None:
        if not (self.d_a > 0 and self.d_b > 0 and self.d_h > 0):
            raise ValueError("d_a, d_b and d_h must be positive")
        if field_ is not None and len(field_) and not self.d_h < field_.min_radius:
            raise ValueError("d_h must be smaller than every obstacle radius")


@dataclass
class Assumption3Report:
    passed: bool
    precheck_passed: bool
    samples_checked: int
    witness: Optional[tuple] = None  # (q, j, k)
    precheck_witness: Optional[tuple] = None  # (j, k, distance)
    pitch: float = 0.0

    def summary(self) -> str:
        s = f"sampling check: {'PASS' if self.passed else 'FAIL'} ({self.samples_checked} annulus samples, pitch {self.pitch:.6g})"
        if self.witness is not None:
            q, j, k = self.witness
            s += f"; witness q={np.array2string(q, precision=6)} pair=({j},{k})"
        s += f"\npairwise pre-check: {'PASS' if self.precheck_passed else 'FAIL'}"
        if self.precheck_witness is not None:
            j, k, d = self.precheck_witness
            s += f"; pair=({j},{k}) distance={d:.6g}"
        return s


def _pairwise_precheck(field_: ObstacleField, dp: DistanceParams):
    if len(field_) < 2:
        return True, None
    tree = field_._tree or cKDTree(field_.centers)
    reach = 2 * field_.max_radius + dp.d_b
    pairs = tree.query_pairs(reach, output_type="ndarray")
    if len(pairs) == 0:
        return True, None
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    c, r = field_.centers, field_.radii
    dist = np.linalg.norm(c[pairs[:, 0]] - c[pairs[:, 1]], axis=1)
    bad = (dist > dp.d_a) & (dist <= r[pairs[:, 0]] + r[pairs[:, 1]] + dp.d_b)
    if not bad.any():
        return True, None
    i = int(np.flatnonzero(bad)[0])
    return False, (int(pairs[i, 0]), int(pairs[i, 1]), float(dist[i]))


def check_assumption3(
    field_: ObstacleField,
    dp: DistanceParams,
    pitch: Optional[float] = None,
    chunk: int = 200_000,
) -> Assumption3Report:
    """Check the ball-distance condition on a grid of pitch ``d_b/4``.

    Every grid point ``q`` with ``h_i(q) >= -d_h`` for all ``i`` and at least
    one ``h_j(q) <= d_b/2`` is inspected; all obstacles within ``d_b/2`` of
    ``q`` must have pairwise center distance at most ``d_a``. The conservative
    pairwise pre-check is reported alongside but does not decide the verdict.
    """
    dp.validate()
    pitch = dp.d_b / 4 if pitch is None else pitch
    pre_ok, pre_w = _pairwise_precheck(field_, dp)
    if len(field_) < 2:
        return Assumption3Report(True, pre_ok, 0, None, pre_w, pitch)

    c, r = field_.centers, field_.radii
    tree = field_._tree or cKDTree(c)
    reach = field_.max_radius + dp.d_b / 2
    lo = np.floor((c - r[:, None] - dp.d_b).min(axis=0) / pitch) * pitch
    hi = (c + r[:, None] + dp.d_b).max(axis=0)
    axes = [np.arange(l, h + pitch, pitch) for l, h in zip(lo, hi)]
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    r_min = field_.min_radius
    checked = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        sub = np.unravel_index(idx, sizes)
        pts = np.stack([axes[d][sub[d]] for d in range(field_.dim)], axis=1)
        dist, _ = tree.query(pts, k=1)
        keep = (dist <= reach) & (dist >= r_min - dp.d_h)
        if not keep.any():
            continue
        pts = pts[keep]
        neigh = tree.query_ball_point(pts, reach)
        for q, nb in zip(pts, neigh):
            nb = np.asarray(nb, dtype=int)
            h = np.linalg.norm(c[nb] - q, axis=1) - r[nb]
            if h.min() < -dp.d_h:
                continue
            close = np.sort(nb[h <= dp.d_b / 2])
            if len(close) == 0:
                continue
            checked += 1
            if len(close) < 2:
                continue
            cc = c[close]
            dd = np.linalg.norm(cc[:, None, :] - cc[None, :, :], axis=2)
            if dd.max() > dp.d_a:
                a, b = np.unravel_index(np.argmax(dd), dd.shape)
                j, k = sorted((int(close[a]), int(close[b])))
                return Assumption3Report(False, pre_ok, checked, (q.copy(), j, k), pre_w, pitch)
    return Assumption3Report(True, pre_ok, checked, None, pre_w, pitch)


def cover_unsafe_region(
    indicator: Callable[[np.ndarray], np.ndarray],
    bounds,
    cell_size: float,
    radius: float,
    subgrid: int = 5,
) -> ObstacleField:
    """Cover an unsafe set with equal balls centred on flagged grid cells.

    ``indicator`` maps an ``(M, n)`` array of configurations to a boolean
    ``(M,)`` array (True = unsafe). ``bounds`` is a sequence of ``(lo, hi)``
    per coordinate. A cell is flagged when any of its ``subgrid**n`` interior
    sample points is unsafe.
    """
    bounds = np.asarray(bounds, dtype=float)
    n = bounds.shape[0]
    if radius < cell_size * math.sqrt(n) / 2:
        raise RadiusTooSmall(
            f"radius {radius} below the cell half-diagonal {cell_size * math.sqrt(n) / 2:.6g}"
        )
    counts = [max(1, int(math.ceil((hi - lo) / cell_size - 1e-12))) for lo, hi in bounds]
    offsets = (np.arange(subgrid) + 0.5) / subgrid * cell_size
    local = np.array(list(product(offsets, repeat=n)))  # (subgrid**n, n)
    grids = np.meshgrid(*[np.arange(k) for k in counts], indexing="ij")
    cells = np.stack([g.reshape(-1) for g in grids], axis=1)  # row-major order
    corners = bounds[:, 0] + cells * cell_size
    flagged = np.zeros(len(corners), dtype=bool)
    step = max(1, 100_000 // len(local))
    for s in range(0, len(corners), step):
        pts = (corners[s : s + step, None, :] + local[None, :, :]).reshape(-1, n)
        hit = np.asarray(indicator(pts), dtype=bool).reshape(-1, len(local))
        flagged[s : s + step] = hit.any(axis=1)
    if not flagged.any():
        return ObstacleField(np.zeros((0, n)), [], dim=n)
    centers = corners[flagged] + cell_size / 2
    return ObstacleField(centers, np.full(len(centers), float(radius)))
