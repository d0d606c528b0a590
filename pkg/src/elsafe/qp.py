"""Euclidean projection onto an intersection of halfspaces.

Solves ``min |v - v_c|^2  s.t.  l_k . v <= b_k`` exactly with a dual
active-set method (Goldfarb-Idnani with identity Hessian). The iteration
starts at the unconstrained minimizer ``v_c`` and adds violated constraints
one at a time, dropping active ones whose multiplier would turn negative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import Infeasible, MaxIterations, TooManyConstraints


@dataclass(frozen=True)
class QPTolerances:
    primal: float = 1e-10
    kkt: float = 1e-9
    dependence: float = 1e-12
    max_iter: int = 500


DEFAULT_TOL = QPTolerances()


@dataclass
class HalfspaceSet:
    normals: np.ndarray  # (m, n)
    offsets: np.ndarray  # (m,)

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if self.normals.ndim != 2 or len(self.normals) != len(self.offsets):
            raise ValueError("normals must be (m, n) with one offset per row")

    @property
    def m(self) -> int:
        return len(self.offsets)

    def violation(self, v) -> np.ndarray:
        return self.normals @ v - self.offsets


@dataclass
class QPSolution:
    point: np.ndarray
    multipliers: np.ndarray
    active_set: list = field(default_factory=list)
    iterations: int = 0

    def kkt_residuals(self, v_c, cs: HalfspaceSet):
        """(stationarity, max primal violation, max complementarity, min multiplier)."""
        stat = np.linalg.norm(self.point - v_c + cs.normals.T @ self.multipliers)
        viol = cs.violation(self.point)
        prim = float(max(viol.max(initial=0.0), 0.0))
        comp = float(np.abs(self.multipliers * viol).max(initial=0.0))
        return float(stat), prim, comp, float(self.multipliers.min(initial=0.0))


def _solve_active(v_c, A, b):
    """Projection of v_c onto the affine set ``A v = b`` (rows independent)."""
    g = A @ A.T
    mu = np.linalg.solve(g, A @ v_c - b)
    return v_c - A.T @ mu, mu


def project(v_c, cs: HalfspaceSet, tol: QPTolerances = DEFAULT_TOL) -> QPSolution:
    v_c = np.asarray(v_c, dtype=float)
    L, b = cs.normals, cs.offsets
    m = cs.m
    x = v_c.copy()
    active: list[int] = []
    u = np.zeros(0)
    it = 0
    while True:
        s = L @ x - b
        if m == 0 or s.max() <= tol.primal * 0.1:
            break
        p = int(np.argmax(s))
        u_p = 0.0
        # inner loop: drive constraint p to equality, dropping blockers
        while True:
            it += 1
            if it > tol.max_iter:
                raise MaxIterations(f"projection did not converge in {tol.max_iter} steps")
            a = L[p]
            if active:
                N = L[active]
                r = np.linalg.solve(N @ N.T, N @ a)
                z = a - N.T @ r
            else:
                r = np.zeros(0)
                z = a.copy()
            zz = float(z @ z)
            t1, k_block = np.inf, -1
            pos = r > tol.dependence
            if pos.any():
                ratios = np.where(pos, u / np.where(pos, r, 1.0), np.inf)
                k_block = int(np.argmin(ratios))
                t1 = float(ratios[k_block])
            slack = float(a @ x - b[p])
            t2 = slack / zz if zz > tol.dependence * float(a @ a) else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                raise Infeasible(f"constraint {p} cannot be satisfied together with the active set {active}")
            if np.isfinite(t2):
                x = x - t * z
            u = u - t * r
            u_p += t
            if t2 <= t1:
                active.append(p)
                u = np.append(u, u_p)
                break
            # partial step: drop the blocking constraint, keep working on p
            del active[k_block]
            u = np.delete(u, k_block)
    mu = np.zeros(m)
    if active:
        # clean re-solve on the final active set removes accumulated drift
        x, ua = _solve_active(v_c, L[active], b[active])
        if ua.min() < -tol.kkt:
            ua = np.clip(ua, 0.0, None)
            x = v_c - L[active].T @ ua
        mu[active] = np.clip(ua, 0.0, None)
    return QPSolution(x, mu, sorted(active), it)


def enumerate_oracle(v_c, cs: HalfspaceSet, max_constraints: int = 20, feas_tol: float = 1e-9) -> QPSolution:
    """Brute-force projection: best feasible point over all active subsets of size <= n."""
    v_c = np.asarray(v_c, dtype=float)
    m, n = cs.m, len(v_c)
    if m > max_constraints:
        raise TooManyConstraints(f"oracle limited to {max_constraints} constraints, got {m}")
    best = None
    for size in range(0, min(n, m) + 1):
        for sub in combinations(range(m), size):
            sub = list(sub)
            if size:
                A = cs.normals[sub]
                if np.linalg.matrix_rank(A, tol=1e-10) < size:
                    continue
                x, mu_s = _solve_active(v_c, A, cs.offsets[sub])
            else:
                x, mu_s = v_c.copy(), np.zeros(0)
            if np.all(cs.violation(x) <= feas_tol):
                d = float(np.sum((x - v_c) ** 2))
                if best is None or d < best[0] - 1e-15:
                    best = (d, x, sub, mu_s)
    if best is None:
        raise Infeasible("no feasible vertex/face found by enumeration")
    _, x, sub, mu_s = best
    mu = np.zeros(m)
    mu[sub] = mu_s
    return QPSolution(x, mu, sub, 0)
