"""Parameter-condition checker, Lipschitz certificate and shaping synthesis.

Every sufficient condition on the scalar margins and shaping functions is
evaluated with a signed slack (positive means satisfied). Conditions whose
inputs are meaningless once an earlier one fails (for instance anything
dividing by ``v_bar - 2 d_r``) are reported as SKIP so that a single bad
parameter shows up as exactly one failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import PositiveBasis
from .errors import DegenerateBasis, SynthesisFailed
from .params import FilterParams
from .shaping import PiecewiseLinear, ShapingFns

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"
ENDPOINT_TOL = 1e-12

# evaluation order; each entry lists the conditions it depends on
CONDITIONS = {
    "shape_class": (),
    "ball_premises": (),
    "basis_match": (),
    "radius_vs_da": (),
    "speed_margin": (),
    "cosine_margin": ("speed_margin",),
    "basis_constant": ("speed_margin",),
    "alpha_knee": ("speed_margin", "shape_class"),
    "phi_lower_bound": ("speed_margin", "shape_class"),
    "phi_zero_tail": ("shape_class",),
    "robust_constants": ("speed_margin", "cosine_margin", "ball_premises", "shape_class"),
    "neighborhood_radius": ("speed_margin", "shape_class"),
    "reduced_robust_constants": ("robust_constants",),
    "damping_gain": ("speed_margin",),
}

DESCRIPTIONS = {
    "shape_class": "alpha_c class-K^e with Lipschitz inverse; phi nonnegative and nonincreasing",
    "ball_premises": "d_a < d_s_min, d_h < d_s_min and 0 < Delta_h <= d_h",
    "basis_match": "basis built for the same c0 and dimension",
    "radius_vs_da": "sqrt(2) d_s_min > d_a",
    "speed_margin": "v_bar > 2 d_r",
    "cosine_margin": "(2 d_s^2 - d_a^2) / (2 (d_s_max + d_b/2)^2) > 1 - (v_bar - 2 d_r)^2 / (2 (v_bar - d_r)^2)",
    "basis_constant": "c0 > sqrt(c*) + sqrt(c* + d_r/(v_bar - d_r))",
    "alpha_knee": "c0 (v_bar - d_r) >= c0 alpha_c(d_b/2) - d_r > (d_r - c0 alpha_c(-d_h)) / D",
    "phi_lower_bound": "phi(s) > max_{p, K} alpha_c^-1((-K (s - c0) - K D + d_r) / c0) + p on [-1, c0)",
    "phi_zero_tail": "phi = 0 on [c0, 1]",
    "robust_constants": "some c_M in the admissible interval makes the robust-region constants consistent",
    "neighborhood_radius": "alpha_c^-1((-c0 alpha_c(-d_h) + (1 + D) d_r) / (c0 D)) < d_f <= alpha_c^-1(v_bar + (1/c0 - 1) d_r)",
    "reduced_robust_constants": "c0 (v_bar - d_r) >= c0 alpha_c(max(d_f, d_b/2)) - d_r >= c0 alpha_c(min(d_f, d_b/2)) - d_r >= K_v",
    "damping_gain": "k_D > 2 n L mu2^3 (v_c^d + v_bar) / (mu1^2 d_r)",
}


@dataclass
class ConditionResult:
    key: str
    status: str
    slack: float = math.nan
    detail: str = ""


@dataclass
class ConditionReport:
    results: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)

    def __getitem__(self, key) -> ConditionResult:
        for r in self.results:
            if r.key == key:
                return r
        raise KeyError(key)

    def __contains__(self, key):
        return any(r.key == key for r in self.results)

    @property
    def passed(self) -> bool:
        return all(r.status == PASS for r in self.results)

    def failed(self) -> list:
        return [r.key for r in self.results if r.status == FAIL]

    def first_failure(self) -> Optional[str]:
        f = self.failed()
        return f[0] if f else None

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            slack = "" if math.isnan(r.slack) else f" slack={r.slack:.6g}"
            extra = f" ({r.detail})" if r.detail else ""
            lines.append(f"{r.status} {r.key}{slack}: {DESCRIPTIONS[r.key]}{extra}")
        for k, v in self.derived.items():
            lines.append(f"derived {k} = {v:.10g}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _min_slack(*vals):
    return float(min(vals))


def _c_m_interval(p: FilterParams):
    lo = 1 - (p.v_bar - 2 * p.d_r) ** 2 / (2 * (p.v_bar - p.d_r) ** 2)
    hi = (2 * (p.d_s_min - p.Delta_h) ** 2 - p.d_a**2) / (2 * (p.d_s_max + p.d_b / 2) ** 2)
    return lo, hi


def _robust_constants(p: FilterParams, fns: ShapingFns):
    """Slacks of the robust-region constants at c_M just below its upper limit.

    Every inequality involving c_M gets easier as c_M grows, so checking the
    supremum of the open interval decides existence.
    """
    lo, hi = _c_m_interval(p)
    c0, d = p.c0, p.delta
    c_m = hi - 1e-12 * max(1.0, abs(hi))
    half = (1 - c_m) / 2
    s_interval = hi - lo
    s_cos = c0 - math.sqrt(half) - math.sqrt(half + d) if half >= 0 else -math.inf
    sep = c0 - math.sqrt(max(2 - 2 * c_m, 0.0))
    s_gap = sep - p.gap
    kv_lower = (-c0 * fns.alpha_c(-p.Delta_h) + p.d_r) / sep if sep > 0 else math.inf
    kv = c0 * fns.alpha_c(p.d_b / 2) - p.d_r
    s_kv = kv - kv_lower
    return c_m, kv_lower, kv, (s_interval, s_cos, s_gap, s_kv)


def phi_margin(fns: ShapingFns, p: FilterParams, p_samples: int = 101, s_samples: int = 1001):
    """``phi(s)`` minus the required lower bound on a grid of ``s`` in ``[-1, c0]``.

    The grid contains every breakpoint of ``phi`` and of each sampled bound
    curve, so between grid points everything is linear and the margin is
    concave there: its minimum over ``[-1, c0]`` is attained on the grid.
    Returns ``(s, margin)``.
    """
    c0, d_r, D = p.c0, p.d_r, p.gap
    ps = np.unique(np.concatenate([np.linspace(0.0, p.d_h, p_samples), [min(p.Delta_h, p.d_h)]]))
    k1 = np.full_like(ps, c0 * (p.v_bar - d_r))
    k2 = (d_r - c0 * fns.alpha_c(-ps)) / D
    K = np.concatenate([k1, k2])
    P = np.concatenate([ps, ps])
    # bound_j(s) = alpha_c^-1(a_j + b_j s) + P_j
    b = -K / c0
    a = (K * c0 - K * D + d_r) / c0
    knots = fns.alpha_c.ys
    with np.errstate(divide="ignore", invalid="ignore"):
        s_knots = ((knots[None, :] - a[:, None]) / b[:, None]).ravel()
    s = np.concatenate([
        np.linspace(-1.0, c0, s_samples),
        fns.phi.restricted_breakpoints(-1.0, c0),
        s_knots[np.isfinite(s_knots)],
    ])
    s = np.unique(s[(s >= -1.0) & (s <= c0)])
    bound = fns.alpha_c_inv(a[:, None] + b[:, None] * s[None, :]) + P[:, None]
    return s, fns.phi(s) - bound.max(axis=0)


def check_parameter_conditions(
    p: FilterParams,
    fns: ShapingFns,
    basis: Optional[PositiveBasis] = None,
    mu_bounds=None,
    L: Optional[float] = None,
    k_D: Optional[float] = None,
    v_c_d: Optional[float] = None,
    n: int = 2,
) -> ConditionReport:
    """Evaluate every sufficient condition; the gain test runs when ``mu_bounds``, ``L`` and ``k_D`` are given."""
    rep = ConditionReport()
    status: dict = {}
    c0 = p.c0

    def add(key, ok, slack=math.nan, detail=""):
        st = PASS if ok else FAIL
        status[key] = st
        rep.results.append(ConditionResult(key, st, float(slack), detail))

    def blocked(key):
        bad = [dep for dep in CONDITIONS[key] if status.get(dep) != PASS]
        if bad:
            status[key] = SKIP
            rep.results.append(ConditionResult(key, SKIP, math.nan, "needs " + ", ".join(bad)))
            return True
        return False

    probs = fns.shape_problems()
    if abs(fns.c0 - c0) > 1e-15:
        probs.append(f"shaping c0 {fns.c0} differs from parameter c0 {c0}")
    add("shape_class", not probs, detail="; ".join(probs))

    s_prem = _min_slack(p.d_s_min - p.d_a, p.d_s_min - p.d_h, p.d_h - p.Delta_h)
    add("ball_premises", s_prem >= 0 and p.Delta_h > 0 and p.d_s_min > p.d_a and p.d_s_min > p.d_h, s_prem)

    if basis is not None:
        ok = basis.c0 >= c0 - 1e-15 and basis.n == n
        add("basis_match", ok, basis.c0 - c0, f"basis c0={basis.c0}, n={basis.n}")

    s20 = math.sqrt(2) * p.d_s_min - p.d_a
    add("radius_vs_da", s20 > 0, s20)

    s21 = p.v_bar - 2 * p.d_r
    add("speed_margin", s21 > 0, s21)

    if not blocked("cosine_margin"):
        lhs = (2 * p.d_s_min**2 - p.d_a**2) / (2 * (p.d_s_max + p.d_b / 2) ** 2)
        rhs = 1 - (p.v_bar - 2 * p.d_r) ** 2 / (2 * (p.v_bar - p.d_r) ** 2)
        add("cosine_margin", lhs > rhs, lhs - rhs)

    if not blocked("basis_constant"):
        cs = p.c_star
        slack = c0 - math.sqrt(max(cs, 0.0)) - math.sqrt(max(cs + p.delta, 0.0))
        add("basis_constant", cs >= 0 and slack > 0, slack)
        rep.derived["c_star"] = cs
        rep.derived["D"] = p.gap

    if not blocked("alpha_knee"):
        mid = c0 * fns.alpha_c(p.d_b / 2) - p.d_r
        upper = p.speed_floor - mid
        lower = mid - (p.d_r - c0 * fns.alpha_c(-p.d_h)) / p.gap
        add("alpha_knee", upper >= 0 and lower > 0, min(upper, lower), f"upper={upper:.3g}, lower={lower:.3g}")

    if not blocked("phi_lower_bound"):
        s, margin = phi_margin(fns, p)
        inner = s < c0
        worst = int(np.argmin(np.where(inner, margin, np.inf)))
        end = float(margin[~inner][0]) if (~inner).any() else math.inf
        # the endpoint only needs the limit to be nonnegative, up to roundoff
        ok = bool(np.all(margin[inner] > 0)) and end >= -ENDPOINT_TOL
        add("phi_lower_bound", ok, min(float(margin[worst]), end),
            f"worst s={s[worst]:.6g}, margin at c0={end:.3g}")

    if not blocked("phi_zero_tail"):
        tail = np.concatenate([[c0, 1.0], fns.phi.restricted_breakpoints(c0, 1.0)])
        worst = float(np.abs(fns.phi(tail)).max())
        add("phi_zero_tail", worst == 0.0, -worst)

    if not blocked("robust_constants"):
        c_m, kv_lower, kv, slacks = _robust_constants(p, fns)
        ok = slacks[0] > 0 and all(x > 0 for x in slacks[1:3]) and slacks[3] >= 0
        add("robust_constants", ok, min(slacks),
            "interval={:.3g}, cosine={:.3g}, separation={:.3g}, K_v={:.3g}".format(*slacks))
        rep.derived["c_M"] = c_m
        rep.derived["K_v_lower"] = kv_lower
        rep.derived["K_v"] = kv

    if p.d_f is not None:
        if not blocked("neighborhood_radius"):
            D = p.gap
            lo = float(fns.alpha_c_inv((-c0 * fns.alpha_c(-p.d_h) + (1 + D) * p.d_r) / (c0 * D)))
            hi = float(fns.alpha_c_inv(p.v_bar + (1 / c0 - 1) * p.d_r))
            add("neighborhood_radius", lo < p.d_f <= hi, min(p.d_f - lo, hi - p.d_f),
                f"d_f in ({lo:.6g}, {hi:.6g}]")
            rep.derived["d_f_lower"] = lo
            rep.derived["d_f_upper"] = hi
        if not blocked("reduced_robust_constants"):
            big = c0 * fns.alpha_c(max(p.d_f, p.d_b / 2)) - p.d_r
            small = c0 * fns.alpha_c(min(p.d_f, p.d_b / 2)) - p.d_r
            kv_lower = rep.derived["K_v_lower"]
            sl = (p.speed_floor - big, big - small, small - kv_lower)
            add("reduced_robust_constants", all(x >= 0 for x in sl), min(sl))

    if mu_bounds is not None and L is not None and k_D is not None:
        if not blocked("damping_gain"):
            mu1, mu2 = mu_bounds
            vcd = p.v_bar_c if v_c_d is None else v_c_d
            need = 2 * n * L * mu2**3 * (vcd + p.v_bar) / (mu1**2 * p.d_r)
            add("damping_gain", k_D > need, k_D - need, f"k_D={k_D:.6g}, required > {need:.6g}")
            rep.derived["k_D_required"] = need
    return rep


@dataclass
class LipschitzCertificate:
    L_phi: float
    L_alpha: float
    L_r: float
    c_lambda: float
    rho: float
    L: float
    m: int
    n: int

    def to_text(self) -> str:
        return "\n".join(f"{k} = {getattr(self, k):.10g}" for k in
                         ("L_phi", "L_alpha", "L_r", "c_lambda", "rho", "L", "m", "n"))


def smallest_singular_value(A, samples: int = 10_000, seed: int = 0) -> float:
    """min over unit ``theta`` of ``|A theta|``: sampled, and exact from the Gram matrix."""
    A = np.asarray(A, dtype=float)
    rng = np.random.default_rng(seed)
    th = rng.standard_normal((samples, A.shape[1]))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    sampled = float(np.linalg.norm(th @ A.T, axis=1).min())
    exact = float(math.sqrt(max(np.linalg.eigvalsh(A.T @ A)[0], 0.0)))
    return min(sampled, exact)


def lipschitz_certificate(p: FilterParams, fns: ShapingFns, basis: PositiveBasis, field=None,
                          samples: int = 10_000, seed: int = 0) -> LipschitzCertificate:
    d_s_min = field.min_radius if field is not None and len(field) else p.d_s_min
    L_phi = fns.L_phi
    L_alpha = fns.L_alpha
    L_r = 1 + 2 * L_phi / (d_s_min - p.Delta_h)
    c_lam = smallest_singular_value(basis.vectors, samples, seed)
    if c_lam < 1e-12:
        raise DegenerateBasis(f"smallest singular value {c_lam:.3g} of the basis matrix is below 1e-12")
    n, m = basis.n, basis.m
    rho = 0.5 + (1 + 4 * math.sqrt(n) * max(1 / c_lam, 1.0)) / c_lam
    L = rho * max(1.0, m * L_alpha * L_r)
    return LipschitzCertificate(L_phi, L_alpha, L_r, c_lam, rho, L, m, n)


PRECONDITIONS = ("radius_vs_da", "speed_margin", "cosine_margin")


def synthesize_shaping(p: FilterParams, gentle_slope: float = 1.0) -> ShapingFns:
    """Build a three-segment ``alpha_c`` and a ramp ``phi`` that pass the checker.

    ``alpha_c`` uses ``gentle_slope`` below zero and above the knee at
    ``d_b/2``; the knee value is the largest one the speed cap allows (lowered
    when ``d_f`` sits beyond the knee so that ``alpha_c(d_f)`` still fits).
    ``phi(s) = a * max(c0 - s, 0)`` with ``a`` just above the steepest ratio
    between the required bound and ``c0 - s``.
    """
    placeholder = ShapingFns(PiecewiseLinear([0.0], [0.0], 1.0, 1.0),
                             PiecewiseLinear([-1.0, 1.0], [0.0, 0.0]), p.c0)
    pre = check_parameter_conditions(p, placeholder)
    for key in PRECONDITIONS:
        if pre[key].status != PASS:
            raise SynthesisFailed(key, f"{DESCRIPTIONS[key]} violated (slack {pre[key].slack:.6g})")

    g = gentle_slope
    knee = p.d_b / 2
    y_max = p.v_bar - p.d_r + p.d_r / p.c0
    # a hair below the cap keeps alpha_c(d_f) strictly inside under roundoff
    y_knee = y_max * (1 - 1e-9) - g * max((p.d_f or 0.0) - knee, 0.0)
    if y_knee <= 0:
        raise SynthesisFailed("alpha_knee", "no room for a positive knee value")
    alpha = PiecewiseLinear([0.0, knee], [0.0, y_knee], g, g)

    # bound / (c0 - s), clustered near c0 where the ratio is steepest
    probe = ShapingFns(alpha, PiecewiseLinear([-1.0, 1.0], [0.0, 0.0]), p.c0)
    s, margin = phi_margin(probe, p)
    inner = s < p.c0
    ratio = float(np.max(-margin[inner] / (p.c0 - s[inner])))
    a = max(1.05 * ratio, 1e-6)
    for _ in range(40):
        phi = PiecewiseLinear([-1.0, p.c0, 1.0], [a * (1 + p.c0), 0.0, 0.0])
        fns = ShapingFns(alpha, phi, p.c0)
        rep = check_parameter_conditions(p, fns)
        if rep["phi_lower_bound"].status == PASS:
            break
        a *= 1.25
    bad = rep.first_failure()
    if bad is not None:
        raise SynthesisFailed(bad, f"{DESCRIPTIONS[bad]} violated (slack {rep[bad].slack:.6g})")
    return fns
