"""Euler-Lagrange plants, the velocity-tracking inner loop and integrators.

Plants follow ``M(q) qdd + C(q, qd) qd + N(q, qd) = u``. The inner loop is

    u = N(q, qd) + C(q, qd) v* - k_D (qd - v*)

with no ``M dv*/dt`` feedforward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SingularInertia

COND_LIMIT = 1e12


@dataclass
class State:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        # float64 unless an extended-precision array is passed in
        dt = np.result_type(np.asarray(self.q), np.asarray(self.qdot), np.float64)
        self.q = np.array(self.q, dtype=dt)
        self.qdot = np.array(self.qdot, dtype=dt)
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have the same shape")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("state must be finite")


class ELModel:
    """Interface: subclasses provide ``M``, ``C``, ``N`` and ``n``."""

    n: int = 0

    def M(self, q) -> np.ndarray:
        raise NotImplementedError

    def C(self, q, qdot) -> np.ndarray:
        raise NotImplementedError

    def N(self, q, qdot) -> np.ndarray:
        raise NotImplementedError

    def matrices(self, state: State):
        return self.M(state.q), self.C(state.q, state.qdot), self.N(state.q, state.qdot)

    def accel(self, state: State, u) -> np.ndarray:
        M, C, N = self.matrices(state)
        if np.linalg.cond(np.asarray(M, dtype=float)) > COND_LIMIT:
            raise SingularInertia(f"inertia condition number exceeds {COND_LIMIT:g} at q={state.q}")
        rhs = np.asarray(u) - C @ state.qdot - N
        if rhs.dtype == np.float64:
            return np.linalg.solve(M, rhs)
        return _gauss_solve(M, rhs)


def _gauss_solve(A, b):
    """Partial-pivoting elimination that keeps the dtype of ``b`` (LAPACK is float64 only)."""
    A = np.array(A, dtype=b.dtype)
    x = np.array(b, dtype=b.dtype)
    n = len(x)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(A[k:, k])))
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            A[i, k:] -= f * A[k, k:]
            x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


class ConstantInertiaModel(ELModel):
    """``M`` constant, no Coriolis terms, optional constant generalized force."""

    def __init__(self, M, N=None):
        self._M = np.asarray(M, dtype=float)
        self.n = self._M.shape[0]
        self._N = np.zeros(self.n) if N is None else np.asarray(N, dtype=float)

    def M(self, q):
        return self._M

    def C(self, q, qdot):
        return np.zeros((self.n, self.n))

    def N(self, q, qdot):
        return self._N


@dataclass(frozen=True)
class TwoLinkModel(ELModel):
    """Planar arm of two uniform rods; joint angles measured from the x axis and link 1."""

    m1: float = 2.0
    l1: float = 0.25
    m2: float = 3.0
    l2: float = 0.4
    g: float = 9.81
    n: int = 2

    @property
    def lc1(self):
        return self.l1 / 2

    @property
    def lc2(self):
        return self.l2 / 2

    @property
    def I1(self):
        return self.m1 * self.l1**2 / 12

    @property
    def I2(self):
        return self.m2 * self.l2**2 / 12

    def M(self, q):
        c2 = math.cos(q[1])
        m2, l1, lc2 = self.m2, self.l1, self.lc2
        a = self.I1 + self.I2 + self.m1 * self.lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2)
        b = self.I2 + m2 * (lc2**2 + l1 * lc2 * c2)
        d = self.I2 + m2 * lc2**2
        return np.array([[a, b], [b, d]])

    def C(self, q, qdot):
        hh = -self.m2 * self.l1 * self.lc2 * math.sin(q[1])
        return np.array([[hh * qdot[1], hh * (qdot[0] + qdot[1])], [-hh * qdot[0], 0.0]])

    def N(self, q, qdot):
        c1, c12 = math.cos(q[0]), math.cos(q[0] + q[1])
        g2 = self.m2 * self.lc2 * self.g * c12
        return np.array([(self.m1 * self.lc1 + self.m2 * self.l1) * self.g * c1 + g2, g2])

    def joint_positions(self, q):
        """Workspace positions of the elbow and the tip."""
        p1 = self.l1 * np.array([math.cos(q[0]), math.sin(q[0])])
        p2 = p1 + self.l2 * np.array([math.cos(q[0] + q[1]), math.sin(q[0] + q[1])])
        return p1, p2


def two_link_dynamics(params: TwoLinkModel, state: State):
    return params.matrices(state)


@dataclass(frozen=True)
class InnerLoopGains:
    k_D: float

    def __post_init__(self):
        if not self.k_D > 0:
            raise ValueError(f"k_D must be positive, got {self.k_D}")

    def required(self, L, mu1, mu2, v_c_d, v_bar, d_r, n=2) -> float:
        """Smallest gain the tracking certificate accepts (strict inequality)."""
        return 2 * n * L * mu2**3 * (v_c_d + v_bar) / (mu1**2 * d_r)

    def admissible(self, L, mu1, mu2, v_c_d, v_bar, d_r, n=2) -> bool:
        return self.k_D > self.required(L, mu1, mu2, v_c_d, v_bar, d_r, n)


def inner_loop_torque(model: ELModel, state: State, v_star, gains: InnerLoopGains) -> np.ndarray:
    v_star = np.asarray(v_star, dtype=float)
    return (model.N(state.q, state.qdot) + model.C(state.q, state.qdot) @ v_star
            - gains.k_D * (state.qdot - v_star))


def lyapunov_value(model: ELModel, state: State, v_star) -> float:
    e = state.qdot - np.asarray(v_star, dtype=float)
    return float(0.5 * e @ model.M(state.q) @ e)


def step(model: ELModel, state: State, controller: Callable[[State], np.ndarray], dt: float,
         mode: str = "continuous") -> State:
    """One classical RK4 step.

    ``mode="continuous"`` re-evaluates ``controller`` at every stage;
    ``"sampled"`` holds the torque computed at the start of the step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if mode not in ("continuous", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    held = controller(state) if mode == "sampled" else None

    def f(q, qd):
        s = State(q, qd)
        u = held if held is not None else controller(s)
        return qd, model.accel(s, u)

    q, qd = state.q, state.qdot
    k1q, k1v = f(q, qd)
    k2q, k2v = f(q + 0.5 * dt * k1q, qd + 0.5 * dt * k1v)
    k3q, k3v = f(q + 0.5 * dt * k2q, qd + 0.5 * dt * k2v)
    k4q, k4v = f(q + dt * k3q, qd + dt * k3v)
    return State(q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q),
                 qd + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


def tracking_step(model: ELModel, state: State, v_star, gains: InnerLoopGains, dt: float):
    """Semi-implicit Euler step of the closed inner loop with ``v*`` held.

    Substituting the tracking law into the plant cancels ``N`` and leaves
    ``M dqd/dt = -(C + k_D I)(qd - v*)``. The velocity update treats the
    right-hand side implicitly (``M`` and ``C`` frozen at the step start),
    which stays stable however large ``k_D / mu_min(M)`` is; the position
    update then uses the new velocity. Returns ``(new_state, applied_torque)``.
    """
    v_star = np.asarray(v_star, dtype=float)
    M, C, N = model.matrices(state)
    if np.linalg.cond(M) > COND_LIMIT:
        raise SingularInertia(f"inertia condition number exceeds {COND_LIMIT:g} at q={state.q}")
    G = C + gains.k_D * np.eye(len(v_star))
    qd_new = np.linalg.solve(M + dt * G, M @ state.qdot + dt * G @ v_star)
    u = N + C @ v_star - gains.k_D * (qd_new - v_star)
    return State(state.q + dt * qd_new, qd_new), u


def estimate_mu_bounds(model: ELModel, sample_count: int = 1000, seed: int = 0,
                       low: Optional[np.ndarray] = None, high: Optional[np.ndarray] = None,
                       factor: float = 0.01):
    """Extreme eigenvalues of ``M`` over sampled ``q``, shrunk and inflated by ``factor``."""
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    n = model.n
    low = np.full(n, -math.pi) if low is None else np.asarray(low, dtype=float)
    high = np.full(n, math.pi) if high is None else np.asarray(high, dtype=float)
    rng = np.random.default_rng(seed)
    qs = rng.uniform(low, high, size=(sample_count, n))
    eig = np.array([np.linalg.eigvalsh(model.M(q)) for q in qs])
    return float(eig.min() * (1 - factor)), float(eig.max() * (1 + factor))
