"""Model-based RL: delta dynamics model, random-shooting MPC and the trial loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lie import ACTION_LABELS, LIE_ACTIONS
from .nn import MLP, Adam
from .sim import MN, PHI, PSI, THETA, WX, WY, WZ, IonocraftEnv, TrialRecord

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
STD_FLOOR = 1e-8


# -- reward -----------------------------------------------------------------

@dataclass(frozen=True)
class RewardConfig:
    eta: float = math.radians(10.0)
    mode: str = "sliding"
    lam: float = 1.0

    def __post_init__(self):
        if self.mode not in ("sliding", "naive"):
            raise ValueError(f"unknown reward mode {self.mode!r}")
        if not 0 < self.eta < math.pi / 2:
            raise ValueError("eta must lie in (0, stop_angle)")


def reward_batch(states: np.ndarray, cfg: RewardConfig = RewardConfig()) -> np.ndarray:
    states = np.atleast_2d(states)
    psi, theta, phi = states[:, PSI], states[:, THETA], states[:, PHI]
    tilt = theta**2 + phi**2
    if cfg.mode == "naive":
        return psi**2 - cfg.lam * tilt
    inside = (np.abs(phi) < cfg.eta) & (np.abs(theta) < cfg.eta)
    return np.where(inside, np.abs(psi), -tilt)


def reward(x, cfg: RewardConfig = RewardConfig()) -> float:
    """Sliding mode: |psi| inside the attitude window, -(theta^2 + phi^2) outside."""
    return float(reward_batch(np.asarray(x, dtype=float)[None, :], cfg)[0])


# -- data -------------------------------------------------------------------

@dataclass
class Dataset:
    x: np.ndarray = field(default_factory=lambda: np.empty((0, 12)))
    u: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    x_next: np.ndarray = field(default_factory=lambda: np.empty((0, 12)))
    r: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.x)

    def extend(self, x, u, x_next, r=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x_next = np.atleast_2d(np.asarray(x_next, dtype=float))
        r = np.zeros(len(x)) if r is None or len(r) == 0 else np.asarray(r, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(x_next))):
            raise ValueError("non-finite transition")
        self.x = np.vstack([self.x, x])
        self.u = np.vstack([self.u, u])
        self.x_next = np.vstack([self.x_next, x_next])
        self.r = np.concatenate([self.r, r])

    def add_record(self, rec: TrialRecord):
        if rec.steps:
            self.extend(rec.states, rec.actions, rec.next_states, rec.rewards)

    @property
    def inputs(self) -> np.ndarray:
        return np.hstack([self.x, self.u])

    @property
    def targets(self) -> np.ndarray:
        return self.x_next - self.x


@dataclass
class Normalization:
    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray

    @classmethod
    def fit(cls, inputs, targets):
        return cls(inputs.mean(axis=0), np.maximum(inputs.std(axis=0), STD_FLOOR),
                   targets.mean(axis=0), np.maximum(targets.std(axis=0), STD_FLOOR))


# -- model ------------------------------------------------------------------

FULL_STATE = tuple(range(12))
# theta, phi and the body rates: everything the attitude and yaw deltas depend
# on. Position, yaw and linear velocity do not enter the rotational dynamics.
ATTITUDE_INPUTS = (THETA, PHI, WX, WY, WZ)


class DynamicsModel:
    """Delta model: x' = x + denorm(net(norm([x[state_inputs], u]))).

    The network always predicts the full 12-state delta; ``state_inputs``
    selects which state coordinates it sees.
    """

    def __init__(self, net: MLP, norm: Normalization, seed: Optional[int] = None,
                 state_inputs=FULL_STATE):
        self.net = net
        self.norm = norm
        self.seed = seed
        self.state_inputs = tuple(int(i) for i in state_inputs)
        self.loss_history: list = []

    def _check(self):
        if not all(np.all(np.isfinite(p)) for p in self.net.params):
            raise ValueError("model weights are not finite")

    def predict_batch(self, x, u) -> np.ndarray:
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        z = (np.hstack([x[:, self.state_inputs], u]) - self.norm.in_mean) / self.norm.in_std
        delta = self.net(z) * self.norm.out_std + self.norm.out_mean
        return x + delta

    def predict(self, x, u) -> np.ndarray:
        self._check()
        out = self.predict_batch(np.asarray(x, dtype=float)[None, :], np.asarray(u, dtype=float)[None, :])[0]
        if not np.all(np.isfinite(out)):
            raise ValueError("non-finite prediction")
        return out

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "layer_dims": self.net.layer_dims,
            "activation": self.net.activation,
            "weights": [w.tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
            "normalization": {
                "in_mean": self.norm.in_mean.tolist(),
                "in_std": self.norm.in_std.tolist(),
                "out_mean": self.norm.out_mean.tolist(),
                "out_std": self.norm.out_std.tolist(),
            },
            "seed": self.seed,
            "state_inputs": list(self.state_inputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
        net = MLP(d["layer_dims"], d["activation"])
        net.weights = [np.array(w, dtype=float) for w in d["weights"]]
        net.biases = [np.array(b, dtype=float) for b in d["biases"]]
        n = d["normalization"]
        norm = Normalization(*(np.array(n[k], dtype=float) for k in ("in_mean", "in_std", "out_mean", "out_std")))
        return cls(net, norm, d.get("seed"), d.get("state_inputs", FULL_STATE))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DynamicsModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 17
    lr: float = 0.0025
    batch: int = 18
    hidden: int = 250
    activation: str = "relu"
    state_inputs: tuple = ATTITUDE_INPUTS


def train(dataset: Dataset, hyper: TrainConfig = TrainConfig(), seed: int = 0) -> DynamicsModel:
    """Fit a delta model with Adam on normalized (input, delta) pairs."""
    if len(dataset) < hyper.batch:
        raise ValueError(f"need at least {hyper.batch} transitions, have {len(dataset)}")
    rng = np.random.default_rng(seed)
    inputs = np.hstack([dataset.x[:, list(hyper.state_inputs)], dataset.u])
    targets = dataset.targets
    norm = Normalization.fit(inputs, targets)
    zin = (inputs - norm.in_mean) / norm.in_std
    zout = (targets - norm.out_mean) / norm.out_std

    net = MLP([zin.shape[1], hyper.hidden, hyper.hidden, zout.shape[1]], hyper.activation, rng)
    opt = Adam(net.params, lr=hyper.lr)
    model = DynamicsModel(net, norm, seed, hyper.state_inputs)
    model.loss_history.append(float(np.mean((net(zin) - zout) ** 2)))

    n = len(zin)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch):
            idx = order[start:start + hyper.batch]
            _, grads = net.loss_and_grads(zin[idx], zout[idx])
            opt.step(grads)
        model.loss_history.append(float(np.mean((net(zin) - zout) ** 2)))
    return model


def rollout_predict(model, x0, actions) -> list:
    """Recursively predicted states x1..xT for an action sequence of length T."""
    actions = list(actions)
    if not actions:
        raise ValueError("action sequence must be non-empty")
    out = []
    x = np.asarray(x0, dtype=float)
    for u in actions:
        x = model.predict(x, u)
        out.append(x)
    return out


# -- planning ---------------------------------------------------------------

DISCRETE_ACTIONS = np.array([LIE_ACTIONS[k] for k in ACTION_LABELS])


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 5
    num_samples: int = 500
    action_low: float = 0.0
    action_high: float = 0.3 * MN
    action_mode: str = "continuous"

    def __post_init__(self):
        if self.horizon < 1 or self.num_samples < 1:
            raise ValueError("horizon and num_samples must be >= 1")
        if self.action_low > self.action_high:
            raise ValueError("action_low must not exceed action_high")
        if self.action_mode not in ("continuous", "discrete-lie"):
            raise ValueError(f"unknown action_mode {self.action_mode!r}")


def sample_sequences(cfg: MpcConfig, rng: np.random.Generator):
    """Candidate action sequences of shape (N, horizon, 4) and, in discrete mode, their indices."""
    shape = (cfg.num_samples, cfg.horizon)
    if cfg.action_mode == "discrete-lie":
        idx = rng.integers(0, len(DISCRETE_ACTIONS), shape)
        return DISCRETE_ACTIONS[idx], idx
    return rng.uniform(cfg.action_low, cfg.action_high, shape + (4,)), None


def score_sequences(model, x, seqs, reward_cfg: RewardConfig) -> np.ndarray:
    n, horizon, _ = seqs.shape
    states = np.repeat(np.asarray(x, dtype=float)[None, :], n, axis=0)
    total = np.zeros(n)
    for k in range(horizon):
        states = model.predict_batch(states, seqs[:, k, :])
        total += reward_batch(states, reward_cfg)
    # a diverged prediction never wins
    total[~np.isfinite(total)] = -np.inf
    return total


def mpc_plan(model, x, cfg: MpcConfig, reward_cfg: RewardConfig, rng: np.random.Generator):
    """Sample, score and return (best sequence, its discrete indices or None, scores)."""
    seqs, idx = sample_sequences(cfg, rng)
    scores = score_sequences(model, x, seqs, reward_cfg)
    best = int(np.argmax(scores))  # first index wins ties
    return seqs[best], (None if idx is None else idx[best]), scores


def mpc_select(model, x, cfg: MpcConfig = MpcConfig(), reward_cfg: RewardConfig = RewardConfig(),
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """First action of the highest-scoring random-shooting candidate."""
    rng = np.random.default_rng(0) if rng is None else rng
    seq, _, _ = mpc_plan(model, x, cfg, reward_cfg, rng)
    return seq[0].copy()


# -- trials -----------------------------------------------------------------

def random_action(cfg: MpcConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.action_mode == "discrete-lie":
        return DISCRETE_ACTIONS[rng.integers(0, len(DISCRETE_ACTIONS))].copy()
    return rng.uniform(cfg.action_low, cfg.action_high, 4)


def action_label(u) -> str:
    for label, a in LIE_ACTIONS.items():
        if np.array_equal(a, u):
            return label
    return "continuous"


def run_trial(env: IonocraftEnv, model=None, mpc: MpcConfig = MpcConfig(),
              reward_cfg: RewardConfig = RewardConfig(), rng: Optional[np.random.Generator] = None,
              steps: int = 1000, x0=None):
    """One episode of MPC control (or uniform-random actions when ``model`` is None).

    Returns the TrialRecord and a Dataset holding just this episode's transitions.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x = env.reset(x0) if x0 is not None else env.state.copy()
    rec = TrialRecord()
    for k in range(steps):
        if model is None:
            u = random_action(mpc, rng)
        else:
            u = mpc_select(model, x, mpc, reward_cfg, rng)
        out = env.step(u)
        rec.times.append(k * env.sim.control_period)
        rec.states.append(x)
        rec.actions.append(u)
        rec.next_states.append(out.next_state)
        rec.rewards.append(reward(out.next_state, reward_cfg))
        rec.elapsed = k * env.sim.control_period + out.elapsed
        x = out.next_state
        if out.crashed:
            rec.crashed = True
            break
    data = Dataset()
    data.add_record(rec)
    return rec, data


@dataclass
class TrialStats:
    seed: int
    trial: int
    episode_reward: float
    yaw_rate_deg_per_s: float
    crashed: bool
    steps: int
    data_seconds: float


def percentile_curves(rows, key="episode_reward", qs=(50, 65, 95)) -> dict:
    """Per-trial percentiles across seeds; returns {trial: {q: value}}."""
    by_trial = {}
    for r in rows:
        by_trial.setdefault(r.trial, []).append(getattr(r, key))
    return {t: {q: float(np.percentile(v, q)) for q in qs} for t, v in sorted(by_trial.items())}


def mbrl_loop(make_env, rng_for, num_trials: int = 10, seed: int = 0,
              mpc: MpcConfig = MpcConfig(), reward_cfg: RewardConfig = RewardConfig(),
              hyper: TrainConfig = TrainConfig(), steps: int = 1000, until=None):
    """Bootstrap with random actions, then alternate retraining and MPC trials.

    The bootstrap trial restarts the environment after each crash until it
    has gathered ``steps`` transitions; its reported statistics are those of
    its first episode.

    ``make_env(trial)`` returns ``(env, x0)``; ``rng_for(trial, purpose)``
    returns the generator used for planning ("plan") and training ("train").
    With ``until(dataset) -> bool`` given, the loop stops early once it
    returns True, and ``num_trials`` becomes an upper bound.
    Returns (list of TrialStats, final model, dataset, list of TrialRecord).
    """
    if num_trials < 2:
        raise ValueError("num_trials must be >= 2")
    data = Dataset()
    model = None
    stats, records = [], []
    for trial in range(num_trials):
        if trial > 0:
            model = train(data, hyper, seed=int(rng_for(trial, "train").integers(2**31)))
        env, x0 = make_env(trial)
        plan_rng = rng_for(trial, "plan")
        rec, _ = run_trial(env, model, mpc, reward_cfg, plan_rng, steps, x0)
        data.add_record(rec)
        records.append(rec)
        if trial == 0:
            # random actions crash within a few steps; restart until the
            # bootstrap has a full trial's worth of transitions
            collected = rec.steps
            while collected < steps:
                extra, _ = run_trial(env, None, mpc, reward_cfg, plan_rng, steps - collected, x0)
                data.add_record(extra)
                collected += extra.steps
        stats.append(TrialStats(seed, trial, rec.episode_reward, rec.yaw_rate_deg_s,
                                rec.crashed, rec.steps, len(data) * env.sim.control_period))
        log.info("seed %d trial %d: steps=%d crashed=%s yaw=%.2f deg/s data=%d",
                 seed, trial, rec.steps, rec.crashed, rec.yaw_rate_deg_s, len(data))
        if until is not None and trial > 0 and until(data):
            break
    return stats, model, data, records
