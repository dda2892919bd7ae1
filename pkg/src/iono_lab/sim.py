"""Rigid-body simulator for the four-thruster ionocraft.

States are plain length-12 numpy arrays ordered as ``STATE_LABELS``; thruster
commands are length-4 arrays of forces in newtons. Everything is SI and
radians internally.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

log = logging.getLogger(__name__)

STATE_LABELS = ("X", "Y", "Z", "psi", "theta", "phi",
                "vx", "vy", "vz", "wx", "wy", "wz")
INPUT_LABELS = ("F1", "F2", "F3", "F4")

# state indices
X, Y, Z, PSI, THETA, PHI, VX, VY, VZ, WX, WY, WZ = range(12)

MN = 1e-3  # newtons per millinewton
GMM2 = 1e-9  # kg*m^2 per g*mm^2

# Table of assembly configurations: mass in mg, inertia in g*mm^2.
ASSEMBLY_TABLE = {
    "no_imu": {"mass_mg": 26.0, "ixx_gmm2": 1.967, "iyy_gmm2": 1.967, "izz_gmm2": 3.775},
    "imu_center": {"mass_mg": 46.0, "ixx_gmm2": 1.984, "iyy_gmm2": 1.983, "izz_gmm2": 3.804},
    "imu_5mm_x_error": {"mass_mg": 46.0, "ixx_gmm2": 2.262, "iyy_gmm2": 1.983, "izz_gmm2": 4.083},
}


class SingularityError(ValueError):
    """Euler kinematics evaluated at |theta| >= pi/2."""


@dataclass(frozen=True)
class ThrustParams:
    beta: tuple = (0.6, 0.6, 0.6, 0.6)
    d: float = 500e-6  # air gap, m
    mu: float = 2e-4  # ion mobility, m^2/(V s)

    def __post_init__(self):
        if len(self.beta) != 4:
            raise ValueError("beta needs one value per thruster")
        if any(not 0.3 <= b <= 1.0 for b in self.beta):
            raise ValueError(f"beta out of [0.3, 1.0]: {self.beta}")
        if self.d <= 0 or self.mu <= 0:
            raise ValueError("d and mu must be positive")


@dataclass(frozen=True)
class InertialConfig:
    mass: float = 50e-6
    ixx: float = 1.984e-9
    iyy: float = 1.983e-9
    izz: float = 3.804e-9
    arm: float = 0.01
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("mass", "ixx", "iyy", "izz", "arm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def inertia(self) -> np.ndarray:
        return np.array([self.ixx, self.iyy, self.izz])

    @classmethod
    def from_table(cls, name: str, mass: Optional[float] = None, **kw) -> "InertialConfig":
        row = ASSEMBLY_TABLE[name]
        return cls(
            mass=row["mass_mg"] * 1e-6 if mass is None else mass,
            ixx=row["ixx_gmm2"] * GMM2,
            iyy=row["iyy_gmm2"] * GMM2,
            izz=row["izz_gmm2"] * GMM2,
            **kw,
        )


@dataclass(frozen=True)
class SimConfig:
    dt_dynamics: float = 1e-3
    control_period: float = 1e-2
    noise_sigma: float = 0.01
    stop_angle: float = math.radians(45.0)
    integrator: str = "euler"
    noise_per_substep: bool = False
    f_max: float = 0.3 * MN

    def __post_init__(self):
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt_dynamics <= 0:
            raise ValueError("dt_dynamics must be positive")
        ratio = self.control_period / self.dt_dynamics
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control_period must be an integer multiple of dt_dynamics")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 < self.stop_angle < math.pi / 2:
            raise ValueError("stop_angle must lie in (0, pi/2)")

    @property
    def substeps(self) -> int:
        return int(round(self.control_period / self.dt_dynamics))


@dataclass
class StepOutcome:
    next_state: np.ndarray
    crashed: bool
    elapsed: float


def thrust_from_current(current: float, params: ThrustParams = ThrustParams(),
                        thruster_index: int = 1) -> float:
    """Electrohydrodynamic force F = beta_k * i * d / mu for thruster 1..4."""
    if current < 0:
        raise ValueError("ion current must be non-negative")
    if thruster_index not in (1, 2, 3, 4):
        raise ValueError(f"thruster index must be 1..4, got {thruster_index}")
    return params.beta[thruster_index - 1] * current * params.d / params.mu


def current_for_thrust(force: float, params: ThrustParams = ThrustParams(),
                       thruster_index: int = 1) -> float:
    if force < 0:
        raise ValueError("force must be non-negative")
    if thruster_index not in (1, 2, 3, 4):
        raise ValueError(f"thruster index must be 1..4, got {thruster_index}")
    return force * params.mu / (params.beta[thruster_index - 1] * params.d)


def mix_forces(u, cfg: InertialConfig = InertialConfig()):
    """Map thruster forces to (Fz, tau_x, tau_y, tau_z).

    The z torque row of the mixer is identically zero.
    """
    f1, f2, f3, f4 = (float(v) for v in u)
    arm = cfg.arm
    fz = f1 + f2 + f3 + f4
    tau_y = arm * (-f1 - f2 + f3 + f4)
    tau_x = arm * (-f1 + f2 + f3 - f4)
    return fz, tau_x, tau_y, 0.0


def body_to_inertial(angles) -> np.ndarray:
    """ZYX rotation taking body-frame vectors to the inertial frame."""
    psi, theta, phi = angles
    cps, sps = math.cos(psi), math.sin(psi)
    cth, sth = math.cos(theta), math.sin(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    return np.array([
        [cth * cps, cps * sth * sph - cph * sps, sph * sps + cph * cps * sth],
        [cth * sps, cph * cps + sth * sph * sps, cph * sth * sps - cps * sph],
        [-sth, cth * sph, cth * cph],
    ])


def _check_theta(theta: float) -> float:
    cth = math.cos(theta)
    if not abs(theta) < math.pi / 2 or cth <= 0.0:
        raise SingularityError(f"Euler kinematics singular at theta={theta!r}")
    return cth


def euler_rates(angles, omega):
    """(psi_dot, theta_dot, phi_dot) from body rates through the inverse Wronskian."""
    _, theta, phi = angles
    wx, wy, wz = omega
    cth = _check_theta(theta)
    sth = math.sin(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    psi_dot = (sph * wy + cph * wz) / cth
    theta_dot = cph * wy - sph * wz
    phi_dot = wx + (sph * sth * wy + cph * sth * wz) / cth
    return psi_dot, theta_dot, phi_dot


def derivative(x, u, cfg: InertialConfig = InertialConfig()) -> np.ndarray:
    """Time derivative of the 12-state at thruster command ``u``."""
    psi, theta, phi = x[PSI], x[THETA], x[PHI]
    vx, vy, vz = x[VX], x[VY], x[VZ]
    wx, wy, wz = x[WX], x[WY], x[WZ]

    cth = _check_theta(theta)
    sth = math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    cph, sph = math.cos(phi), math.sin(phi)

    fz, tau_x, tau_y, tau_z = mix_forces(u, cfg)
    out = np.empty(12)

    # position: Q v
    out[X] = cth * cps * vx + (cps * sth * sph - cph * sps) * vy + (sph * sps + cph * cps * sth) * vz
    out[Y] = cth * sps * vx + (cph * cps + sth * sph * sps) * vy + (cph * sth * sps - cps * sph) * vz
    out[Z] = -sth * vx + cth * sph * vy + cth * cph * vz

    # attitude: W^-1 w
    out[PSI] = (sph * wy + cph * wz) / cth
    out[THETA] = cph * wy - sph * wz
    out[PHI] = wx + (sph * sth * wy + cph * sth * wz) / cth

    # body-frame translation; gravity is Q^T (0, 0, -g), i.e. -g times the third row of Q
    g = cfg.gravity
    out[VX] = -g * -sth - (wy * vz - wz * vy)
    out[VY] = -g * cth * sph - (wz * vx - wx * vz)
    out[VZ] = fz / cfg.mass - g * cth * cph - (wx * vy - wy * vx)

    ixx, iyy, izz = cfg.ixx, cfg.iyy, cfg.izz
    out[WX] = (tau_x - (wy * izz * wz - wz * iyy * wy)) / ixx
    out[WY] = (tau_y - (wz * ixx * wx - wx * izz * wz)) / iyy
    out[WZ] = (tau_z - (wx * iyy * wy - wy * ixx * wx)) / izz
    return out


def _euler_step(x, u, h, inertial):
    return x + h * derivative(x, u, inertial)


def _rk4_step(x, u, h, inertial):
    k1 = derivative(x, u, inertial)
    k2 = derivative(x + 0.5 * h * k1, u, inertial)
    k3 = derivative(x + 0.5 * h * k2, u, inertial)
    k4 = derivative(x + h * k3, u, inertial)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


_INTEGRATORS = {"euler": _euler_step, "rk4": _rk4_step}


def attitude_exceeded(x, stop_angle: float) -> bool:
    return abs(x[THETA]) > stop_angle or abs(x[PHI]) > stop_angle


def step_control_period(x, u, cfg: SimConfig, inertial: InertialConfig,
                        rng: Optional[np.random.Generator] = None) -> StepOutcome:
    """Advance one zero-order-hold control period.

    Noise is drawn from ``rng`` once per period (or once per substep when
    ``cfg.noise_per_substep``); with ``noise_sigma == 0`` the rng is untouched.
    """
    x = np.asarray(x, dtype=float).copy()
    u = np.asarray(u, dtype=float)
    if attitude_exceeded(x, cfg.stop_angle):
        return StepOutcome(x, True, 0.0)

    step = _INTEGRATORS[cfg.integrator]
    h = cfg.dt_dynamics
    noisy = cfg.noise_sigma > 0
    if noisy and rng is None:
        raise ValueError("an rng is required when noise_sigma > 0")

    for k in range(cfg.substeps):
        x = step(x, u, h, inertial)
        if noisy and cfg.noise_per_substep:
            x += rng.normal(0.0, cfg.noise_sigma, 12)
        if attitude_exceeded(x, cfg.stop_angle):
            return StepOutcome(x, True, (k + 1) * h)

    if noisy and not cfg.noise_per_substep:
        x += rng.normal(0.0, cfg.noise_sigma, 12)
    return StepOutcome(x, attitude_exceeded(x, cfg.stop_angle), cfg.substeps * h)


@dataclass
class TrialRecord:
    """Per-step log of one episode plus its summary statistics."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    next_states: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    crashed: bool = False
    elapsed: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def episode_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def final_yaw(self) -> float:
        return float(self.next_states[-1][PSI]) if self.next_states else 0.0

    @property
    def yaw_rate_deg_s(self) -> float:
        """Average yaw rate over the run, (psi_end - psi_0) / t_end."""
        if not self.actions or self.elapsed <= 0:
            return 0.0
        dpsi = self.next_states[-1][PSI] - self.states[0][PSI]
        return math.degrees(dpsi) / self.elapsed

    def summary(self) -> dict:
        return {
            "episode_reward": self.episode_reward,
            "yaw_rate_deg_per_s": self.yaw_rate_deg_s,
            "crashed": self.crashed,
            "steps": self.steps,
        }


Policy = Callable[[float, np.ndarray], np.ndarray]


def clamp_action(u, f_max: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    clipped = np.clip(u, 0.0, f_max)
    if not np.array_equal(clipped, u):
        log.warning("policy output %s outside [0, %g] N; clamped", u, f_max)
    return clipped


def rollout(x0, policy: Policy, max_steps: int, cfg: SimConfig = SimConfig(),
            inertial: InertialConfig = InertialConfig(),
            rng: Optional[np.random.Generator] = None,
            reward_fn: Optional[Callable[[np.ndarray], float]] = None) -> TrialRecord:
    """Run ``policy(t, x)`` until crash or ``max_steps`` control periods."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rec = TrialRecord()
    x = np.asarray(x0, dtype=float).copy()
    t = 0.0
    for k in range(max_steps):
        t = k * cfg.control_period
        u = clamp_action(policy(t, x), cfg.f_max)
        out = step_control_period(x, u, cfg, inertial, rng)
        rec.times.append(t)
        rec.states.append(x)
        rec.actions.append(u)
        rec.next_states.append(out.next_state)
        if reward_fn is not None:
            rec.rewards.append(float(reward_fn(out.next_state)))
        rec.elapsed = t + out.elapsed
        x = out.next_state
        if out.crashed:
            rec.crashed = True
            break
    return rec


class IonocraftEnv:
    """Stateful wrapper around the step function with its own rng stream."""

    def __init__(self, sim: SimConfig = SimConfig(), inertial: InertialConfig = InertialConfig(),
                 rng: Optional[np.random.Generator] = None, x0=None):
        self.sim = sim
        self.inertial = inertial
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.state = np.zeros(12) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.t = 0.0

    def reset(self, x0=None) -> np.ndarray:
        self.state = np.zeros(12) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.t = 0.0
        return self.state.copy()

    def step(self, u) -> StepOutcome:
        out = step_control_period(self.state, u, self.sim, self.inertial, self.rng)
        self.state = out.next_state
        self.t += self.sim.control_period
        return out
