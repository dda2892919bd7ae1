"""Experiment configuration: JSON documents with unit-suffixed keys.

Loading converts to the SI/radian dataclasses used by the library;
``to_dict`` converts back, so load -> dump -> load is idempotent.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace

from .lie import DEFAULT_EPSILONS
from .mbrl import MpcConfig, RewardConfig, TrainConfig
from .sim import GMM2, MN, STATE_LABELS, InertialConfig, SimConfig

FORMAT_VERSION = 1
EXPERIMENTS = ("lie-sweep", "analyze", "mbrl-train", "mbrl-eval", "mimic")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Randomization:
    inertia_variation_frac: float = 0.15
    init_angle_range: float = math.radians(22.5)


@dataclass(frozen=True)
class LieBlock:
    epsilons: tuple = DEFAULT_EPSILONS
    t_cap: float = 10.0


@dataclass(frozen=True)
class MbrlBlock:
    num_seeds: int = 5
    num_trials: int = 10
    steps_per_trial: int = 1000
    control_arm: bool = True


@dataclass(frozen=True)
class EvalBlock:
    steps: int = 1000
    model_path: str = ""
    randomize: bool = False


@dataclass(frozen=True)
class MimicBlock:
    num_trials: int = 6
    log_steps: int = 25
    reference_epsilon: float = 0.05
    init_pitch: float = math.radians(5.0)
    init_roll: float = math.radians(-5.0)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "lie-sweep"
    master_seed: int = 0
    output_dir: str = "out"
    sim: SimConfig = field(default_factory=SimConfig)
    inertial: InertialConfig = field(default_factory=InertialConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    randomization: Randomization = field(default_factory=Randomization)
    lie: LieBlock = field(default_factory=LieBlock)
    mbrl: MbrlBlock = field(default_factory=MbrlBlock)
    eval: EvalBlock = field(default_factory=EvalBlock)
    mimic: MimicBlock = field(default_factory=MimicBlock)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        v = self.randomization.inertia_variation_frac
        if not 0 <= v < 0.5:
            raise ConfigError("inertia_variation_frac must lie in [0, 0.5)")
        a = self.randomization.init_angle_range
        if not 0 < a < self.sim.stop_angle:
            raise ConfigError("init_angle_range_deg must lie in (0, stop_angle_deg)")
        if not self.reward.eta < self.sim.stop_angle:
            raise ConfigError("eta_deg must be below stop_angle_deg")
        if self.mbrl.num_trials < 2 or self.mbrl.num_seeds < 1:
            raise ConfigError("mbrl needs num_trials >= 2 and num_seeds >= 1")
        if not 1 <= self.mbrl.steps_per_trial <= 1000 or not 1 <= self.eval.steps <= 1000:
            raise ConfigError("episodes are limited to 1000 steps")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _labels_to_indices(labels):
    try:
        return tuple(STATE_LABELS.index(s) for s in labels)
    except ValueError as exc:
        raise ConfigError(f"unknown state label in state_inputs: {exc}") from None


def _r(v: float) -> float:
    # unit conversions leave float dust; 12 significant digits keeps dumps stable
    return float(f"{v:.12g}")


def to_dict(cfg: ExperimentConfig) -> dict:
    s, i, m, r, t = cfg.sim, cfg.inertial, cfg.mpc, cfg.reward, cfg.training
    return {
        "format_version": FORMAT_VERSION,
        "experiment": cfg.experiment,
        "master_seed": cfg.master_seed,
        "output_dir": cfg.output_dir,
        "sim": {
            "dt_dynamics_s": s.dt_dynamics,
            "control_period_s": s.control_period,
            "noise_sigma": s.noise_sigma,
            "noise_per_substep": s.noise_per_substep,
            "stop_angle_deg": _r(math.degrees(s.stop_angle)),
            "integrator": s.integrator,
            "f_max_mN": _r(s.f_max / MN),
        },
        "inertial": {
            "mass_mg": _r(i.mass * 1e6),
            "ixx_gmm2": _r(i.ixx / GMM2),
            "iyy_gmm2": _r(i.iyy / GMM2),
            "izz_gmm2": _r(i.izz / GMM2),
            "arm_mm": _r(i.arm * 1e3),
            "gravity_m_per_s2": i.gravity,
        },
        "mpc": {
            "horizon": m.horizon,
            "num_samples": m.num_samples,
            "action_low_mN": _r(m.action_low / MN),
            "action_high_mN": _r(m.action_high / MN),
            "action_mode": m.action_mode,
        },
        "reward": {"eta_deg": _r(math.degrees(r.eta)), "mode": r.mode, "lambda": r.lam},
        "training": {
            "epochs": t.epochs,
            "lr": t.lr,
            "batch": t.batch,
            "hidden": t.hidden,
            "activation": t.activation,
            "state_inputs": [STATE_LABELS[k] for k in t.state_inputs],
        },
        "randomization": {
            "inertia_variation_frac": cfg.randomization.inertia_variation_frac,
            "init_angle_range_deg": _r(math.degrees(cfg.randomization.init_angle_range)),
        },
        "lie": {"epsilons_s": list(cfg.lie.epsilons), "t_cap_s": cfg.lie.t_cap},
        "mbrl": {
            "num_seeds": cfg.mbrl.num_seeds,
            "num_trials": cfg.mbrl.num_trials,
            "steps_per_trial": cfg.mbrl.steps_per_trial,
            "control_arm": cfg.mbrl.control_arm,
        },
        "eval": {"steps": cfg.eval.steps, "model_path": cfg.eval.model_path, "randomize": cfg.eval.randomize},
        "mimic": {
            "num_trials": cfg.mimic.num_trials,
            "log_steps": cfg.mimic.log_steps,
            "reference_epsilon_s": cfg.mimic.reference_epsilon,
            "init_pitch_deg": _r(math.degrees(cfg.mimic.init_pitch)),
            "init_roll_deg": _r(math.degrees(cfg.mimic.init_roll)),
        },
    }


def from_dict(d: dict) -> ExperimentConfig:
    d = copy.deepcopy(d)
    version = d.pop("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported config format_version {version!r}")
    base = to_dict(ExperimentConfig())
    unknown = set(d) - set(base)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key, val in base.items():
        if isinstance(val, dict):
            block = d.get(key, {})
            if not isinstance(block, dict):
                raise ConfigError(f"'{key}' must be an object")
            extra = set(block) - set(val)
            if extra:
                raise ConfigError(f"unknown keys in '{key}': {sorted(extra)}")
            val.update(block)
        elif key in d:
            base[key] = d[key]
    b = base
    try:
        s, i, m, r, t = b["sim"], b["inertial"], b["mpc"], b["reward"], b["training"]
        return ExperimentConfig(
            experiment=b["experiment"],
            master_seed=int(b["master_seed"]),
            output_dir=str(b["output_dir"]),
            sim=SimConfig(
                dt_dynamics=float(s["dt_dynamics_s"]),
                control_period=float(s["control_period_s"]),
                noise_sigma=float(s["noise_sigma"]),
                noise_per_substep=bool(s["noise_per_substep"]),
                stop_angle=math.radians(s["stop_angle_deg"]),
                integrator=s["integrator"],
                f_max=s["f_max_mN"] / 1e3,
            ),
            inertial=InertialConfig(
                mass=i["mass_mg"] / 1e6,
                ixx=i["ixx_gmm2"] / 1e9,
                iyy=i["iyy_gmm2"] / 1e9,
                izz=i["izz_gmm2"] / 1e9,
                arm=i["arm_mm"] / 1e3,
                gravity=float(i["gravity_m_per_s2"]),
            ),
            mpc=MpcConfig(
                horizon=int(m["horizon"]),
                num_samples=int(m["num_samples"]),
                action_low=m["action_low_mN"] / 1e3,
                action_high=m["action_high_mN"] / 1e3,
                action_mode=m["action_mode"],
            ),
            reward=RewardConfig(eta=math.radians(r["eta_deg"]), mode=r["mode"], lam=float(r["lambda"])),
            training=TrainConfig(
                epochs=int(t["epochs"]),
                lr=float(t["lr"]),
                batch=int(t["batch"]),
                hidden=int(t["hidden"]),
                activation=t["activation"],
                state_inputs=_labels_to_indices(t["state_inputs"]),
            ),
            randomization=Randomization(
                inertia_variation_frac=float(b["randomization"]["inertia_variation_frac"]),
                init_angle_range=math.radians(b["randomization"]["init_angle_range_deg"]),
            ),
            lie=LieBlock(epsilons=tuple(float(e) for e in b["lie"]["epsilons_s"]),
                         t_cap=float(b["lie"]["t_cap_s"])),
            mbrl=MbrlBlock(**{k: v for k, v in b["mbrl"].items()}),
            eval=EvalBlock(steps=int(b["eval"]["steps"]), model_path=str(b["eval"]["model_path"]),
                           randomize=bool(b["eval"]["randomize"])),
            mimic=MimicBlock(
                num_trials=int(b["mimic"]["num_trials"]),
                log_steps=int(b["mimic"]["log_steps"]),
                reference_epsilon=float(b["mimic"]["reference_epsilon_s"]),
                init_pitch=math.radians(b["mimic"]["init_pitch_deg"]),
                init_roll=math.radians(b["mimic"]["init_roll_deg"]),
            ),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return from_dict(d)


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"
