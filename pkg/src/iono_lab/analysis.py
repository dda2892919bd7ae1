"""Hover linearization and Kalman controllability analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import INPUT_LABELS, STATE_LABELS, InertialConfig, derivative


@dataclass
class LinearSystem:
    a: np.ndarray
    b: np.ndarray
    state_labels: tuple = STATE_LABELS
    input_labels: tuple = INPUT_LABELS
    equilibrium_residual: float = 0.0

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if self.b.ndim == 1:
            self.b = self.b.reshape(-1, 1)
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.b.shape[0] != n:
            raise ValueError(f"inconsistent shapes A{self.a.shape} B{self.b.shape}")
        if len(self.state_labels) != n or len(self.input_labels) != self.b.shape[1]:
            raise ValueError("label counts do not match matrix dimensions")
        if len(set(self.state_labels)) != n or len(set(self.input_labels)) != len(self.input_labels):
            raise ValueError("labels must be unique")

    @property
    def is_equilibrium(self) -> bool:
        return self.equilibrium_residual < 1e-9

    def subsystem(self, states, inputs=None) -> "LinearSystem":
        si = [self.state_labels.index(s) for s in states]
        ui = list(range(self.b.shape[1])) if inputs is None else [self.input_labels.index(s) for s in inputs]
        return LinearSystem(self.a[np.ix_(si, si)], self.b[np.ix_(si, ui)],
                            tuple(states), tuple(self.input_labels[i] for i in ui),
                            self.equilibrium_residual)


@dataclass
class ControllabilityReport:
    rank: int
    n: int
    uncontrollable_basis: list = field(default_factory=list)
    state_labels: tuple = ()
    singular_values: list = field(default_factory=list)

    def projection_residual(self, direction) -> float:
        """Norm of the part of ``direction`` lying in the controllable subspace."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        if not self.uncontrollable_basis:
            return 1.0
        basis = np.array(self.uncontrollable_basis)
        return float(np.linalg.norm(d - basis.T @ (basis @ d)))

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "n": self.n,
            "singular_values": [float(s) for s in self.singular_values],
            "uncontrollable_directions": [
                {lab: float(v) for lab, v in zip(self.state_labels, vec)}
                for vec in self.uncontrollable_basis
            ],
        }


def linearize(x_star=None, u_star=None, cfg: InertialConfig = InertialConfig(),
              state_step: float = 1e-6, input_step: float = 1e-9) -> LinearSystem:
    """Central-difference Jacobians of the simulator derivative.

    Defaults to hover: zero state with each thruster at m*g/4.
    """
    x_star = np.zeros(12) if x_star is None else np.asarray(x_star, dtype=float)
    if u_star is None:
        u_star = np.full(4, cfg.mass * cfg.gravity / 4)
    u_star = np.asarray(u_star, dtype=float)

    a = np.empty((12, 12))
    for j in range(12):
        dx = np.zeros(12)
        dx[j] = state_step
        a[:, j] = (derivative(x_star + dx, u_star, cfg) - derivative(x_star - dx, u_star, cfg)) / (2 * state_step)
    b = np.empty((12, 4))
    for j in range(4):
        du = np.zeros(4)
        du[j] = input_step
        b[:, j] = (derivative(x_star, u_star + du, cfg) - derivative(x_star, u_star - du, cfg)) / (2 * input_step)
    residual = float(np.linalg.norm(derivative(x_star, u_star, cfg), np.inf))
    return LinearSystem(a, b, STATE_LABELS, INPUT_LABELS, residual)


def hover_linearization(cfg: InertialConfig = InertialConfig()) -> LinearSystem:
    """Hand-derived A, B at hover (zero state, total thrust m*g)."""
    g, m, arm = cfg.gravity, cfg.mass, cfg.arm
    idx = {s: i for i, s in enumerate(STATE_LABELS)}
    a = np.zeros((12, 12))
    a[idx["X"], idx["vx"]] = 1.0
    a[idx["Y"], idx["vy"]] = 1.0
    a[idx["Z"], idx["vz"]] = 1.0
    a[idx["psi"], idx["wz"]] = 1.0
    a[idx["theta"], idx["wy"]] = 1.0
    a[idx["phi"], idx["wx"]] = 1.0
    # translation picks up gravity through the attitude
    a[idx["vx"], idx["theta"]] = g
    a[idx["vy"], idx["phi"]] = -g
    b = np.zeros((12, 4))
    b[idx["vz"], :] = 1.0 / m
    b[idx["wx"], :] = arm * np.array([-1, 1, 1, -1]) / cfg.ixx
    b[idx["wy"], :] = arm * np.array([-1, -1, 1, 1]) / cfg.iyy
    return LinearSystem(a, b)


def controllability_matrix(sys: LinearSystem) -> np.ndarray:
    """[B, AB, ..., A^(n-1) B]."""
    n = sys.a.shape[0]
    blocks = [sys.b]
    for _ in range(n - 1):
        blocks.append(sys.a @ blocks[-1])
    return np.hstack(blocks)


def analyze_yaw(sys: LinearSystem, tolerance: float = 1e-8) -> ControllabilityReport:
    """Rank of the controllability matrix and an orthonormal basis of its left null space.

    Rows are scaled to unit max-norm before the SVD; the rank and the
    controllable subspace are unchanged by this, but the tiny inertias no
    longer swamp the translational rows.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    wc = controllability_matrix(sys)
    n = wc.shape[0]
    scale = np.abs(wc).max(axis=1)
    scale[scale == 0] = 1.0
    u, s, _ = np.linalg.svd(wc / scale[:, None])
    smax = s[0] if s.size and s[0] > 0 else 0.0
    rank = int(np.sum(s > tolerance * smax)) if smax > 0 else 0
    # left null space of diag(1/scale) Wc; map back and re-orthonormalize
    null = u[:, rank:] / scale[:, None]
    if null.shape[1]:
        q, _ = np.linalg.qr(null)
        basis = [q[:, k] for k in range(q.shape[1])]
    else:
        basis = []
    basis = [_clean(v) for v in basis]
    return ControllabilityReport(rank, n, basis, tuple(sys.state_labels), list(s))


def _clean(v, eps=1e-12):
    v = np.where(np.abs(v) < eps, 0.0, v)
    k = np.argmax(np.abs(v))
    return v / np.linalg.norm(v) * np.sign(v[k]) + 0.0


ATTITUDE_STATES = ("psi", "theta", "phi", "wx", "wy", "wz")


def attitude_subsystem(cfg: InertialConfig = InertialConfig()) -> LinearSystem:
    """Six-state attitude block with body torques (tau_x, tau_y) as inputs."""
    full = linearize(cfg=cfg)
    att = full.subsystem(ATTITUDE_STATES)
    idx = [att.state_labels.index(s) for s in ("wx", "wy")]
    b = np.zeros((6, 2))
    b[idx[0], 0] = 1.0 / cfg.ixx
    b[idx[1], 1] = 1.0 / cfg.iyy
    return LinearSystem(att.a, b, ATTITUDE_STATES, ("tau_x", "tau_y"), att.equilibrium_residual)
