"""Closed-loop runs, trajectory logs, W monitoring, Lipschitz probes and timing."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .basis import PositiveBasis
from .dynamics import (ELModel, InnerLoopGains, State, inner_loop_torque, lyapunov_value, step,
                       tracking_step)
from .errors import FilterInfeasible, Infeasible
from .filters import SafetyFilter
from .geometry import ObstacleField, cover_unsafe_region
from .params import FilterParams
from .shaping import ShapingFns

W_TOL = 1e-6


def primary_command(q, q_r, sat_gain: float, v_bar_c: float) -> np.ndarray:
    """Saturated proportional command toward ``q_r``; its norm never exceeds ``v_bar_c``."""
    e = np.asarray(q, dtype=float) - np.asarray(q_r, dtype=float)
    dist = float(np.linalg.norm(e))
    if dist == 0.0:
        return np.zeros_like(e)
    return -e * min(sat_gain, v_bar_c / dist)


@dataclass
class Scenario:
    field: ObstacleField
    params: FilterParams
    shaping: ShapingFns
    basis: PositiveBasis
    model: ELModel
    gains: InnerLoopGains
    q0: np.ndarray
    qdot0: np.ndarray
    waypoints: list
    sat_gain: float = 0.5236
    v_bar_c: Optional[float] = None  # defaults to params.v_bar_c
    duration: float = 40.0
    dt: float = 1e-3
    filter_kind: str = "full"
    integrator: str = "implicit"  # or "rk4"
    rk4_mode: str = "continuous"
    delta_wp: float = 0.05
    record_timing: bool = True

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float)
        self.qdot0 = np.asarray(self.qdot0, dtype=float)
        self.waypoints = [np.asarray(w, dtype=float) for w in self.waypoints]
        if self.v_bar_c is None:
            self.v_bar_c = self.params.v_bar_c
        if not self.waypoints:
            raise ValueError("scenario needs at least one waypoint")
        if self.integrator not in ("implicit", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.duration < 0 or not self.dt > 0:
            raise ValueError("duration must be >= 0 and dt > 0")

    @property
    def n(self) -> int:
        return len(self.q0)

    @property
    def v_c_d(self) -> float:
        """Worst-case command rate of the proportional law, sat_gain * v_bar."""
        return self.sat_gain * self.params.v_bar

    def make_filter(self, kind: Optional[str] = None) -> SafetyFilter:
        return SafetyFilter(kind or self.filter_kind, self.field, self.shaping, self.params, self.basis)


def _columns(n: int):
    cols = ["t"]
    for prefix in ("q", "qd", "vc", "vs", "u"):
        cols += [f"{prefix}{i + 1}" for i in range(n)]
    return cols + ["minh", "W", "solve_ms"]


@dataclass
class TrajectoryLog:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    vc: np.ndarray
    vs: np.ndarray
    u: np.ndarray
    minh: np.ndarray
    W: np.ndarray
    solve_ms: np.ndarray
    switch_steps: list = field(default_factory=list)

    @classmethod
    def allocate(cls, count: int, n: int) -> "TrajectoryLog":
        z = lambda *s: np.full((count, *s), np.nan)
        return cls(z(), z(n), z(n), z(n), z(n), z(n), z(), z(), z())

    def truncate(self, count: int) -> "TrajectoryLog":
        return TrajectoryLog(*(getattr(self, c)[:count] for c in
                               ("t", "q", "qd", "vc", "vs", "u", "minh", "W", "solve_ms")),
                             [s for s in self.switch_steps if s < count])

    def __len__(self):
        return len(self.t)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.qd, axis=1)

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.q, self.qd, self.vc, self.vs, self.u,
                                self.minh, self.W, self.solve_ms])

    def dumps(self) -> str:
        rows = [",".join(_columns(self.n))]
        rows += [",".join(f"{x:.17g}" for x in r) for r in self.table()]
        return "\n".join(rows) + "\n"

    def to_csv(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TrajectoryLog":
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        n = (len(header) - 4) // 5
        if header != _columns(n):
            raise ValueError("unexpected trajectory CSV header")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
        s = lambda k: data[:, 1 + k * n: 1 + (k + 1) * n]
        return cls(data[:, 0], s(0), s(1), s(2), s(3), s(4), data[:, -3], data[:, -2], data[:, -1])

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        return cls.loads(Path(path).read_text())


def run_closed_loop(sc: Scenario, filter_kind: Optional[str] = None) -> TrajectoryLog:
    """Simulate the cascade: primary command, safety filter, tracking law, plant.

    The waypoint index advances once ``|q - waypoint| <= delta_wp`` (never
    past the last waypoint). With the ``implicit`` integrator the filter is
    evaluated once per step and ``v*`` is held; with ``rk4`` the whole chain
    is re-evaluated at each stage (``rk4_mode="continuous"``) or the torque is
    held (``"sampled"``). On an infeasible filter problem a
    :class:`FilterInfeasible` is raised carrying the state and the partial log.
    """
    filt = sc.make_filter(filter_kind)
    steps = int(round(sc.duration / sc.dt))
    n = sc.n
    log = TrajectoryLog.allocate(steps + 1, n)
    state = State(sc.q0, sc.qdot0)
    wp = 0
    last = len(sc.waypoints) - 1

    def solve(q, vc, t):
        try:
            return filt(q, vc)
        except Infeasible as exc:
            err = FilterInfeasible(f"filter infeasible at t={t:.6g}: {exc}", t, q.copy(), state.qdot.copy())
            err.log = log.truncate(k)
            raise err from exc

    for k in range(steps + 1):
        t = k * sc.dt
        q = state.q
        while wp < last and np.linalg.norm(q - sc.waypoints[wp]) <= sc.delta_wp:
            wp += 1
            log.switch_steps.append(k)
        vc = primary_command(q, sc.waypoints[wp], sc.sat_gain, sc.v_bar_c)
        t0 = time.perf_counter()
        vs = solve(q, vc, t)
        elapsed = (time.perf_counter() - t0) * 1e3
        u = inner_loop_torque(sc.model, state, vs, sc.gains)
        log.t[k] = t
        log.q[k], log.qd[k], log.vc[k], log.vs[k], log.u[k] = q, state.qdot, vc, vs, u
        log.minh[k] = sc.field.barriers(q).min() if len(sc.field) else math.inf
        log.solve_ms[k] = elapsed if sc.record_timing else 0.0
        if k == steps:
            break
        if sc.integrator == "implicit":
            state, _ = tracking_step(sc.model, state, vs, sc.gains, sc.dt)
        else:
            target = sc.waypoints[wp]

            def controller(s, _t=t):
                v = solve(s.q, primary_command(s.q, target, sc.sat_gain, sc.v_bar_c), _t)
                return inner_loop_torque(sc.model, s, v, sc.gains)

            state = step(sc.model, state, controller, sc.dt, sc.rk4_mode)
    return log


def command_rate(log: TrajectoryLog) -> float:
    """Largest finite-difference ``|dv_c/dt|`` away from waypoint switches."""
    if len(log) < 2:
        return 0.0
    rate = np.linalg.norm(np.diff(log.vc, axis=0), axis=1) / np.diff(log.t)
    mask = np.ones(len(rate), dtype=bool)
    for s in log.switch_steps:
        mask[max(s - 1, 0): s + 1] = False
    return float(rate[mask].max(initial=0.0))


@dataclass
class WParams:
    floor: float
    d_w: float
    v_c_d: float
    denominator: float

    @classmethod
    def from_constants(cls, n, L, mu1, mu2, k_D, v_c_d, v_bar, d_r, Delta_h) -> "WParams":
        den = mu1 * k_D - 2 * n * L * mu2**2
        floor = n * L * mu1 * mu2**2 * (v_c_d + v_bar - d_r) * d_r / den
        d_w = min(Delta_h, mu1**2 * d_r**2 / (2 * mu2) - floor)
        return cls(floor, d_w, v_c_d, den)

    @property
    def certified(self) -> bool:
        """The gain makes the floor positive and leaves room for a basin ``d_w > 0``."""
        return self.denominator > 0 and self.floor > 0 and self.d_w > 0


@dataclass
class WReport:
    W: np.ndarray
    verdict: str  # PASS, FAIL or NOT-CERTIFIED
    reason: str
    params: WParams

    @property
    def W0(self) -> float:
        return float(self.W[0])

    @property
    def W_max(self) -> float:
        return float(self.W.max())


def monitor_W(log: TrajectoryLog, model: ELModel, wp: WParams, field: ObstacleField) -> WReport:
    """Evaluate ``W = max(-h_1, ..., -h_N, W_{N+1})`` along the log and grade it.

    Fills ``log.W`` in place.
    """
    W = np.empty(len(log))
    for k in range(len(log)):
        V = lyapunov_value(model, State(log.q[k], log.qd[k]), log.vs[k])
        W[k] = max(-log.minh[k], -wp.floor + V)
    log.W[:] = W
    if not wp.certified:
        reason = (f"gain condition fails: floor={wp.floor:.6g}, d_w={wp.d_w:.6g}, "
                  f"mu1*k_D - 2nL*mu2^2 = {wp.denominator:.6g}")
        return WReport(W, "NOT-CERTIFIED", reason, wp)
    if W[0] > wp.d_w:
        return WReport(W, "NOT-CERTIFIED", f"W(0)={W[0]:.6g} exceeds d_w={wp.d_w:.6g}", wp)
    if W[0] > 0:
        return WReport(W, "NOT-CERTIFIED", f"W(0)={W[0]:.6g} is positive", wp)
    ok = W.max() <= W_TOL
    return WReport(W, "PASS" if ok else "FAIL", f"max W = {W.max():.6g}", wp)


@dataclass
class ProbePairs:
    q1: np.ndarray
    q2: np.ndarray
    vc1: np.ndarray
    vc2: np.ndarray
    separation: np.ndarray


def _robust(field: ObstacleField, q, depth: float) -> bool:
    return len(field) == 0 or field.barriers(q).min() >= -depth


def probe_pairs(sc: Scenario, pair_count: int, seed: int = 0, separations=(1e-2, 1e-4, 1e-6),
                band: float = 0.05, junction_fraction: float = 0.2, box=None) -> ProbePairs:
    """Deterministic sample of nearby input pairs inside the robust region.

    Base points sit in a shell of width ``band`` around random balls, plus
    (in the plane) a ``junction_fraction`` share right outside intersection
    points of overlapping balls. Commands point at the nearest obstacle half
    of the time. With an empty field, points are drawn from ``box``.
    """
    rng = np.random.default_rng(seed)
    fld, p = sc.field, sc.params
    n = sc.n
    depth = p.Delta_h
    out = {k: [] for k in ("q1", "q2", "vc1", "vc2", "separation")}
    use_junctions = junction_fraction > 0 and n == 2 and len(fld) > 1
    junctions = _junction_points(fld) if use_junctions else np.zeros((0, n))
    while len(out["q1"]) < pair_count:
        if len(fld) == 0:
            lo, hi = np.asarray(box if box is not None else [[-1.0] * n, [1.0] * n], dtype=float)
            q1 = rng.uniform(lo, hi)
        elif len(junctions) and rng.random() < junction_fraction:
            j = junctions[rng.integers(len(junctions))]
            q1 = j + rng.uniform(0, band / 5) * _unit(rng, n)
        else:
            i = rng.integers(len(fld))
            q1 = fld.centers[i] + (fld.radii[i] + rng.uniform(-depth, band)) * _unit(rng, n)
        if not _robust(fld, q1, depth):
            continue
        sep = separations[len(out["q1"]) % len(separations)]
        q2 = q1 + sep * _unit(rng, n)
        if not _robust(fld, q2, depth):
            continue
        mag = sc.v_bar_c * rng.uniform(0.2, 1.0)
        if len(fld) and rng.random() < 0.5:
            i = int(np.argmin(fld.barriers(q1)))
            d = fld.centers[i] - q1 + 0.3 * np.linalg.norm(fld.centers[i] - q1) * _unit(rng, n)
            vc1 = mag * d / np.linalg.norm(d)
        else:
            vc1 = mag * _unit(rng, n)
        vc2 = vc1 + sep * _unit(rng, n)
        for k, v in zip(out, (q1, q2, vc1, vc2, sep)):
            out[k].append(v)
    return ProbePairs(*(np.array(out[k]) for k in ("q1", "q2", "vc1", "vc2", "separation")))


def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _junction_points(fld: ObstacleField) -> np.ndarray:
    """Intersection points of overlapping circle pairs that lie on the union boundary."""
    tree = fld._tree
    if tree is None:
        return np.zeros((0, 2))
    pairs = tree.query_pairs(2 * fld.max_radius, output_type="ndarray")
    pts = []
    inside = np.nextafter(-1e-9, -np.inf)
    for i, j in pairs:
        ci, cj, ri, rj = fld.centers[i], fld.centers[j], fld.radii[i], fld.radii[j]
        d = np.linalg.norm(cj - ci)
        if d <= abs(ri - rj) or d >= ri + rj:
            continue
        a = (ri**2 - rj**2 + d**2) / (2 * d)
        hgt = math.sqrt(max(ri**2 - a**2, 0.0))
        mid = ci + a * (cj - ci) / d
        perp = np.array([-(cj - ci)[1], (cj - ci)[0]]) / d
        for s in (1, -1):
            x = mid + s * hgt * perp
            if len(fld.near(x, inside)) == 0:
                pts.append(x)
    return np.array(pts) if pts else np.zeros((0, 2))


@dataclass
class ProbeResult:
    kind: str
    quotients: np.ndarray  # nan where the filter was infeasible
    pairs: ProbePairs
    infeasible: int

    @property
    def max_quotient(self) -> float:
        return float(np.nanmax(self.quotients)) if np.isfinite(self.quotients).any() else math.nan

    @property
    def location(self):
        k = int(np.nanargmax(self.quotients))
        return self.pairs.q1[k], self.pairs.vc1[k], float(self.pairs.separation[k])

    def per_separation(self) -> dict:
        out = {}
        for s in np.unique(self.pairs.separation):
            m = self.pairs.separation == s
            out[float(s)] = float(np.nanmax(self.quotients[m]))
        return out


def lipschitz_probe(filter_kind: str, sc: Scenario, pair_count: int = 10_000, seed: int = 0,
                    pairs: Optional[ProbePairs] = None, **kw) -> ProbeResult:
    """Max of ``|v*_1 - v*_2| / (|q_1 - q_2| + |v_c1 - v_c2|)`` over sampled pairs."""
    pairs = pairs if pairs is not None else probe_pairs(sc, pair_count, seed, **kw)
    filt = sc.make_filter(filter_kind)
    quot = np.full(len(pairs.q1), np.nan)
    bad = 0
    for k in range(len(quot)):
        try:
            v1 = filt(pairs.q1[k], pairs.vc1[k])
            v2 = filt(pairs.q2[k], pairs.vc2[k])
        except Infeasible:
            bad += 1
            continue
        den = np.linalg.norm(pairs.q1[k] - pairs.q2[k]) + np.linalg.norm(pairs.vc1[k] - pairs.vc2[k])
        quot[k] = np.linalg.norm(v1 - v2) / den
    return ProbeResult(filter_kind, quot, pairs, bad)


def synthetic_field(N: int, seed: int = 0, radius_factor: float = 2.5) -> ObstacleField:
    """Exactly ``N`` balls covering a seeded union of discs in the plane.

    The cell size is bisected until the covering has at least ``N`` balls;
    the row-major covering is then truncated to its first ``N`` entries.
    """
    if N == 0:
        return ObstacleField(np.zeros((0, 2)), [], dim=2)
    rng = np.random.default_rng(seed)
    discs = np.column_stack([rng.uniform(0.8, 5.5, (8, 2)), rng.uniform(0.3, 0.9, 8)])

    def unsafe(pts):
        d = np.linalg.norm(pts[:, None, :] - discs[None, :, :2], axis=2)
        return (d < discs[None, :, 2]).any(axis=1)

    bounds = [(0.0, 2 * math.pi), (0.0, 2 * math.pi)]
    cover = lambda c: cover_unsafe_region(unsafe, bounds, c, radius_factor * c, subgrid=2)
    # count scales like 1/cell^2; bracket around that estimate before bisecting
    guess = 0.2 * math.sqrt(len(cover(0.2)) / N)
    lo, hi = 0.7 * guess, 1.4 * guess
    while len(cover(lo)) < N:
        lo *= 0.8
    for _ in range(30):
        mid = math.sqrt(lo * hi)
        if len(cover(mid)) >= N:
            lo = mid
        else:
            hi = mid
    f = cover(lo)
    return ObstacleField(f.centers[:N], f.radii[:N])


def bench_iteration(field_sizes, trials: int = 50, seed: int = 0, params: Optional[FilterParams] = None,
                    shaping: Optional[ShapingFns] = None, basis: Optional[PositiveBasis] = None):
    """Mean per-iteration wall time (ms) of assemble + solve, full vs reduced.

    Returns rows ``(N, full_ms, reduced_ms)``.
    """
    from .basis import build_circle_basis
    from .params import preset

    if params is None or shaping is None:
        params, shaping = preset("arm_sim")
    basis = basis or build_circle_basis(params.c0)
    rows = []
    for N in field_sizes:
        fld = synthetic_field(N, seed)
        sc = Scenario(fld, params, shaping, basis, None, InnerLoopGains(1.0), np.zeros(2), np.zeros(2),
                      [np.zeros(2)])
        pairs = probe_pairs(sc, trials, seed, separations=(1e-3,), junction_fraction=0.0,
                            box=[[0.0, 0.0], [2 * math.pi, 2 * math.pi]])
        times = []
        for kind in ("full", "reduced"):
            filt = sc.make_filter(kind)
            filt(pairs.q1[0], pairs.vc1[0])  # warm-up
            t0 = time.perf_counter()
            for q, vc in zip(pairs.q1, pairs.vc1):
                filt(q, vc)
            times.append((time.perf_counter() - t0) / len(pairs.q1) * 1e3)
        rows.append((N, times[0], times[1]))
    return rows


def bench_csv(rows) -> str:
    return "N,full_ms,reduced_ms\n" + "".join(f"{N},{a:.17g},{b:.17g}\n" for N, a, b in rows)
