"""Experiment runners that turn an ExperimentConfig into CSV/JSON artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import analyze_yaw, attitude_subsystem, linearize
from .config import ExperimentConfig, Randomization, to_dict
from .lie import lie_reference_labels, lie_sweep
from .mbrl import (
    DynamicsModel, MpcConfig, TrialStats, action_label, mbrl_loop, percentile_curves, run_trial, train,
)
from .seeding import stream
from .sim import ASSEMBLY_TABLE, GMM2, INPUT_LABELS, PHI, STATE_LABELS, THETA, InertialConfig, IonocraftEnv

log = logging.getLogger(__name__)

REPORT_VERSION = 1
PAPER_SCALE_SEEDS = 25

LIE_SWEEP_HEADER = ("epsilon_s", "yaw_rate_deg_per_s", "stop_time_s")
LEARNING_CURVE_HEADER = ("seed", "trial", "variation", "episode_reward", "yaw_rate_deg_per_s", "crashed", "steps")
TRAJECTORY_HEADER = ("t",) + STATE_LABELS + INPUT_LABELS + ("reward",)
MIMIC_HEADER = ("step", "chosen_label", "lie_reference_label", "match")


class OutputExistsError(OSError):
    pass


# -- randomization ----------------------------------------------------------

def randomize_inertia(base: InertialConfig, frac: float, rng: np.random.Generator) -> InertialConfig:
    """Scale mass and the three inertias by independent U(1-frac, 1+frac) factors."""
    if frac == 0:
        return base
    k = rng.uniform(1 - frac, 1 + frac, 4)
    return replace(base, mass=base.mass * k[0], ixx=base.ixx * k[1], iyy=base.iyy * k[2], izz=base.izz * k[3])


def random_initial_state(angle_range: float, rng: np.random.Generator) -> np.ndarray:
    x0 = np.zeros(12)
    x0[THETA], x0[PHI] = rng.uniform(-angle_range, angle_range, 2)
    return x0


def randomize_env(base: InertialConfig, cfg: Randomization, rng: np.random.Generator):
    """Randomized inertial parameters and initial attitude, both drawn from ``rng``."""
    inertial = randomize_inertia(base, cfg.inertia_variation_frac, rng)
    return inertial, random_initial_state(cfg.init_angle_range, rng)


def make_env_factory(cfg: ExperimentConfig, experiment: str, robot: int, variation: bool,
                     inertial: InertialConfig = None, x0=None):
    """``make_env(trial)`` for mbrl_loop.

    With ``variation`` the robot's inertia is drawn once from its own stream
    and each trial draws a fresh initial attitude; otherwise the nominal (or
    given) inertia and ``x0`` (default zero) are used for every trial.
    """
    base = cfg.inertial if inertial is None else inertial
    arm = "variation" if variation else "nominal"
    if variation:
        base = randomize_inertia(base, cfg.randomization.inertia_variation_frac,
                                 stream(cfg.master_seed, experiment, arm, robot, "inertia"))

    def make_env(trial):
        noise = stream(cfg.master_seed, experiment, arm, robot, trial, "noise")
        if variation:
            start = random_initial_state(cfg.randomization.init_angle_range,
                                         stream(cfg.master_seed, experiment, arm, robot, trial, "init"))
        else:
            start = np.zeros(12) if x0 is None else np.asarray(x0, dtype=float)
        return IonocraftEnv(cfg.sim, base, noise), start

    def rng_for(trial, purpose):
        return stream(cfg.master_seed, experiment, arm, robot, trial, purpose)

    return make_env, rng_for


# -- io helpers -------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


# -- experiments ------------------------------------------------------------

def cmd_lie_sweep(cfg: ExperimentConfig) -> Path:
    sim = replace(cfg.sim, noise_sigma=0.0)
    rows = lie_sweep(cfg.lie.epsilons, sim, cfg.inertial, cfg.lie.t_cap)
    path = _out_dir(cfg) / "lie_sweep.csv"
    write_csv(path, LIE_SWEEP_HEADER, [(r["epsilon"], r["yaw_rate_deg_s"], r["stop_time_s"]) for r in rows])
    return path


def _matrix(a) -> list:
    return [[float(v) for v in row] for row in np.asarray(a)]


def cmd_analyze(cfg: ExperimentConfig) -> Path:
    hover = linearize(cfg=cfg.inertial)
    full = analyze_yaw(hover)
    att = analyze_yaw(attitude_subsystem(cfg.inertial))
    wz = np.zeros(12)
    wz[STATE_LABELS.index("wz")] = 1.0
    assemblies = {}
    for name, row in ASSEMBLY_TABLE.items():
        ic = InertialConfig.from_table(name)
        assemblies[name] = {"mass_kg": ic.mass, "ixx_kgm2": ic.ixx, "iyy_kgm2": ic.iyy, "izz_kgm2": ic.izz,
                            "source_units": "mg, g*mm^2"}
    report = {
        "format_version": REPORT_VERSION,
        "state_labels": list(STATE_LABELS),
        "input_labels": list(INPUT_LABELS),
        "hover_thrust_per_thruster_N": cfg.inertial.mass * cfg.inertial.gravity / 4,
        "equilibrium_residual": hover.equilibrium_residual,
        "A": _matrix(hover.a),
        "B": _matrix(hover.b),
        "full_state": full.to_dict(),
        "wz_projection_residual": full.projection_residual(wz),
        "wz_uncontrollable": full.projection_residual(wz) < 1e-6,
        "attitude_subsystem": att.to_dict(),
        "assemblies": assemblies,
        "gmm2_to_kgm2": GMM2,
    }
    path = _out_dir(cfg) / "analysis.json"
    write_json(path, report)
    return path


def model_filename(seed: int, variation: bool) -> str:
    return f"model_seed{seed}_{'variation' if variation else 'nominal'}.json"


def train_robot(cfg: ExperimentConfig, robot: int, variation: bool, experiment: str = "mbrl-train",
                num_trials: int = None, until=None, inertial=None, x0=None):
    """Run the MBRL loop for one robot and refit the model on all of its data.

    Returns (stats, final model, dataset, records).
    """
    make_env, rng_for = make_env_factory(cfg, experiment, robot, variation, inertial, x0)
    stats, _, data, records = mbrl_loop(
        make_env, rng_for, num_trials=num_trials or cfg.mbrl.num_trials, seed=robot, mpc=cfg.mpc,
        reward_cfg=cfg.reward, hyper=cfg.training, steps=cfg.mbrl.steps_per_trial, until=until)
    final_seed = int(rng_for(len(stats), "train").integers(2**31))
    model = train(data, cfg.training, seed=final_seed)
    return stats, model, data, records


def cmd_mbrl_train(cfg: ExperimentConfig, force: bool = False) -> Path:
    out = _out_dir(cfg)
    path = out / "learning_curve.csv"
    models = out / "models"
    if not force and (path.exists() or models.exists()):
        raise OutputExistsError(f"{path} or {models} already exists; pass --force to overwrite")
    models.mkdir(exist_ok=True)
    arms = (True, False) if cfg.mbrl.control_arm else (True,)
    rows: list[tuple[bool, TrialStats]] = []
    for variation in arms:
        for robot in range(cfg.mbrl.num_seeds):
            stats, model, _, _ = train_robot(cfg, robot, variation)
            model.save(models / model_filename(robot, variation))
            rows.extend((variation, s) for s in stats)
    rows.sort(key=lambda r: (r[1].seed, r[1].trial, not r[0]))
    write_csv(path, LEARNING_CURVE_HEADER,
              [(s.seed, s.trial, v, s.episode_reward, s.yaw_rate_deg_per_s, s.crashed, s.steps) for v, s in rows])
    summary = {"format_version": REPORT_VERSION, "num_seeds": cfg.mbrl.num_seeds, "arms": {}}
    for variation in arms:
        sel = [s for v, s in rows if v == variation]
        name = "variation" if variation else "nominal"
        summary["arms"][name] = {
            "episode_reward_percentiles": {str(t): {str(q): v for q, v in p.items()}
                                           for t, p in percentile_curves(sel).items()},
            "crash_fraction_by_trial": {str(t): float(np.mean([s.crashed for s in sel if s.trial == t]))
                                        for t in sorted({s.trial for s in sel})},
        }
    write_json(out / "learning_curve_summary.json", summary)
    write_json(out / "config.json", to_dict(cfg))
    return path


def zero_crossings(values) -> int:
    """Number of strict sign changes, skipping exact zeros."""
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def evaluate(model: DynamicsModel, cfg: ExperimentConfig, inertial: InertialConfig, x0, episode: int,
             experiment: str = "mbrl-eval"):
    """One MPC episode with a fixed model; returns its TrialRecord."""
    env = IonocraftEnv(cfg.sim, inertial, stream(cfg.master_seed, experiment, "eval", episode, "noise"))
    rec, _ = run_trial(env, model, cfg.mpc, cfg.reward, stream(cfg.master_seed, experiment, "eval", episode, "plan"),
                       cfg.eval.steps, x0)
    return rec


def cmd_mbrl_eval(cfg: ExperimentConfig, model_path: str = None) -> Path:
    model_path = model_path or cfg.eval.model_path
    if not model_path:
        raise ValueError("mbrl-eval needs a model file (eval.model_path or --model)")
    model = DynamicsModel.load(model_path)
    if cfg.eval.randomize:
        inertial, x0 = randomize_env(cfg.inertial, cfg.randomization,
                                     stream(cfg.master_seed, "mbrl-eval", "randomize"))
    else:
        inertial, x0 = cfg.inertial, np.zeros(12)
    rec = evaluate(model, cfg, inertial, x0, 0)
    out = _out_dir(cfg)
    path = out / "trajectory.csv"
    write_csv(path, TRAJECTORY_HEADER,
              [(t,) + tuple(x) + tuple(u) + (r,)
               for t, x, u, r in zip(rec.times, rec.states, rec.actions, rec.rewards)])
    theta = [x[THETA] for x in rec.states]
    phi = [x[PHI] for x in rec.states]
    write_json(out / "eval_summary.json", {
        "format_version": REPORT_VERSION,
        "model_file": os.path.basename(model_path),
        "steps": rec.steps,
        "crashed": rec.crashed,
        "episode_reward": rec.episode_reward,
        "yaw_rate_deg_per_s": rec.yaw_rate_deg_s,
        "theta_zero_crossings": zero_crossings(theta),
        "phi_zero_crossings": zero_crossings(phi),
    })
    return path


def mimic_run(cfg: ExperimentConfig):
    """Discrete-lie MBRL on a symmetric robot from a tilted start.

    Returns (chosen labels, reference labels) for the first logged steps of
    the final trial.
    """
    i = cfg.inertial
    sym = (i.ixx + i.iyy) / 2
    inertial = replace(i, ixx=sym, iyy=sym)
    mcfg = replace(cfg, mpc=replace(cfg.mpc, action_mode="discrete-lie"))
    x0 = np.zeros(12)
    x0[THETA], x0[PHI] = cfg.mimic.init_pitch, cfg.mimic.init_roll
    _, _, _, records = train_robot(mcfg, 0, False, "mimic", cfg.mimic.num_trials, inertial=inertial, x0=x0)
    n = cfg.mimic.log_steps
    chosen = [action_label(u) for u in records[-1].actions[:n]]
    reference = lie_reference_labels(len(chosen), cfg.mimic.reference_epsilon, cfg.sim.control_period)
    return chosen, reference


def cmd_mimic(cfg: ExperimentConfig) -> Path:
    chosen, reference = mimic_run(cfg)
    matches = [c == r for c, r in zip(chosen, reference)]
    rows = [(k, c, r, m) for k, (c, r, m) in enumerate(zip(chosen, reference, matches))]
    agreement = float(np.mean(matches)) if matches else 0.0
    rows.append(("summary", "", "", agreement))
    path = _out_dir(cfg) / "mimic_actions.csv"
    write_csv(path, MIMIC_HEADER, rows)
    return path


COMMANDS = {
    "lie-sweep": cmd_lie_sweep,
    "analyze": cmd_analyze,
    "mbrl-train": cmd_mbrl_train,
    "mbrl-eval": cmd_mbrl_eval,
    "mimic": cmd_mimic,
}
