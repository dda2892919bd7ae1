"""Lie-bracket yaw control on the (psi, theta, phi) attitude kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim import MN, PSI, InertialConfig, SimConfig, SingularityError, rollout


def _cos_theta(theta: float) -> float:
    c = math.cos(theta)
    if not abs(theta) < math.pi / 2 or c <= 0.0:
        raise SingularityError(f"vector fields singular at theta={theta!r}")
    return c


def vector_fields(x):
    """Input fields (f, g, h) for body rates (wx, wy, wz) at attitude x = (psi, theta, phi).

    The columns of the inverse Wronskian; h's last entry is cos(phi) tan(theta)
    so that it agrees with the simulator kinematics.
    """
    _, theta, phi = x
    cth = _cos_theta(theta)
    sph, cph = math.sin(phi), math.cos(phi)
    tth = math.tan(theta)
    f = np.array([0.0, 0.0, 1.0])
    g = np.array([sph / cth, cph, sph * tth])
    h = np.array([cph / cth, -sph, cph * tth])
    return f, g, h


def jacobian_f(x) -> np.ndarray:
    _cos_theta(x[1])
    return np.zeros((3, 3))


def jacobian_g(x) -> np.ndarray:
    """Analytic dg/dx, columns ordered (psi, theta, phi)."""
    _, theta, phi = x
    cth = _cos_theta(theta)
    sth, tth = math.sin(theta), math.tan(theta)
    sph, cph = math.sin(phi), math.cos(phi)
    return np.array([
        [0.0, sph * sth / cth**2, cph / cth],
        [0.0, 0.0, -sph],
        [0.0, sph / cth**2, cph * tth],
    ])


def lie_bracket_fg(x) -> np.ndarray:
    """[f, g](x) = (dg/dx) f - (df/dx) g."""
    f, g, _ = vector_fields(x)
    return jacobian_g(x) @ f - jacobian_f(x) @ g


def _flow(x, field_sign, duration, n):
    """RK4 flow of the kinematics along +/-f or +/-g for ``duration``."""
    which, sign = field_sign
    dt = duration / n

    def rhs(y):
        f, g, _ = vector_fields(y)
        return sign * (f if which == "f" else g)

    y = np.array(x, dtype=float)
    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


FORWARD_SEQUENCE = (("f", 1.0), ("g", 1.0), ("f", -1.0), ("g", -1.0))
# the forward schedule played backwards in time; its bracket is [g, f] = -[f, g]
REVERSED_SEQUENCE = (("g", -1.0), ("f", -1.0), ("g", 1.0), ("f", 1.0))
# sign-flipped schedule; [-f, -g] = [f, g], so the net motion keeps its sign
NEGATED_SEQUENCE = (("f", -1.0), ("g", -1.0), ("f", 1.0), ("g", 1.0))


def flow_endpoint(x0, epsilon: float, substeps: int = 100,
                  sequence=FORWARD_SEQUENCE) -> np.ndarray:
    """State after the four-phase unit-rate sequence, each phase held ``epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if substeps < 10:
        raise ValueError("substeps must be >= 10")
    y = np.array(x0, dtype=float)
    for phase in sequence:
        y = _flow(y, phase, epsilon, substeps)
    return y


def flow_composition(x0, epsilon: float, substeps: int = 100,
                     sequence=FORWARD_SEQUENCE) -> np.ndarray:
    """Finite-epsilon estimate (x(4 eps) - x0) / eps^2 of the bracket [f, g](x0)."""
    x0 = np.asarray(x0, dtype=float)
    return (flow_endpoint(x0, epsilon, substeps, sequence) - x0) / epsilon**2


def flow_remainder(x0, epsilon: float, substeps: int = 100) -> float:
    """Norm of x(4 eps) - x0 - eps^2 [f, g](x0)."""
    x0 = np.asarray(x0, dtype=float)
    xe = flow_endpoint(x0, epsilon, substeps)
    return float(np.linalg.norm(xe - x0 - epsilon**2 * lie_bracket_fg(x0)))


ACTION_LABELS = ("pitch+", "roll+", "pitch-", "roll-", "equil")

LIE_ACTIONS = {
    "pitch+": np.array([0.15, 0.05, 0.05, 0.15]) * MN,
    "roll+": np.array([0.15, 0.15, 0.05, 0.05]) * MN,
    "pitch-": np.array([0.05, 0.15, 0.15, 0.05]) * MN,
    "roll-": np.array([0.05, 0.05, 0.15, 0.15]) * MN,
    "equil": np.array([0.1, 0.1, 0.1, 0.1]) * MN,
}

SEQUENCE_LABELS = ("pitch+", "roll+", "pitch-", "roll-")


@dataclass(frozen=True)
class LieSequenceConfig:
    epsilon: float = 0.01
    control_period: float = 0.01
    actions: dict = field(default_factory=lambda: dict(LIE_ACTIONS))

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        ticks = self.epsilon / self.control_period
        if ticks < 1 - 1e-9 or abs(ticks - round(ticks)) > 1e-9:
            raise ValueError("epsilon must be a positive multiple of the control period")
        eq = self.actions["equil"]
        for a, b in (("pitch+", "pitch-"), ("roll+", "roll-")):
            if not np.allclose(self.actions[a] + self.actions[b], 2 * eq, rtol=0, atol=1e-15):
                raise ValueError(f"{a}/{b} are not mirror images about equilibrium")

    @property
    def ticks_per_phase(self) -> int:
        return int(round(self.epsilon / self.control_period))


def lie_phase_label(t: float, cfg: LieSequenceConfig) -> str:
    if t < 0:
        raise ValueError("t must be non-negative")
    # snap to the control tick so float noise in t cannot shift a phase boundary
    tick = int(math.floor(t / cfg.control_period + 1e-9))
    return SEQUENCE_LABELS[(tick // cfg.ticks_per_phase) % 4]


def lie_policy(t: float, cfg: LieSequenceConfig) -> np.ndarray:
    """Open-loop command at time t: pitch+, roll+, pitch-, roll-, each held epsilon."""
    return cfg.actions[lie_phase_label(t, cfg)].copy()


def lie_reference_labels(n: int, epsilon: float = 0.05, control_period: float = 0.01) -> list:
    cfg = LieSequenceConfig(epsilon=epsilon, control_period=control_period)
    return [lie_phase_label(k * control_period, cfg) for k in range(n)]


DEFAULT_EPSILONS = (0.01, 0.02, 0.03, 0.04, 0.06, 0.08)


def lie_sweep(epsilons=DEFAULT_EPSILONS, sim: SimConfig = None,
              inertial: InertialConfig = InertialConfig(), t_cap: float = 10.0) -> list:
    """Roll out the open-loop sequence for each epsilon from rest, noise off.

    Returns one dict per epsilon with the average yaw rate over the run and
    the time at which the attitude stop condition fired (or ``t_cap``).
    """
    if sim is None:
        sim = SimConfig(noise_sigma=0.0)
    elif sim.noise_sigma != 0:
        raise ValueError("lie_sweep runs noise-free; pass a SimConfig with noise_sigma=0")
    max_steps = int(round(t_cap / sim.control_period))
    rows = []
    for eps in epsilons:
        cfg = LieSequenceConfig(epsilon=eps, control_period=sim.control_period)
        rec = rollout(np.zeros(12), lambda t, x, c=cfg: lie_policy(t, c),
                      max_steps, sim, inertial)
        t_end = rec.elapsed
        rows.append({
            "epsilon": eps,
            "yaw_rate_deg_s": math.degrees(rec.next_states[-1][PSI]) / t_end,
            "stop_time_s": t_end,
            "crashed": rec.crashed,
        })
    return rows
