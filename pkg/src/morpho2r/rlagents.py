"""SAC, DDPG and PPO for single-step (contextual bandit) morphology design.

Every episode is one action followed by an immediate reward and termination,
so value targets are the observed reward; there is nothing to bootstrap.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .kinematics import PHI_EPS, Morphology, phi_to_lengths
from .neuralnet import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    SQUASH_EPS,
    Adam,
    Mlp,
    gaussian_log_prob,
    sample_squashed,
    split_head,
)
from .reward import RewardVariant, RewardWeights, circle_analytic_reward, evaluate
from .taskpaths import PathKind, TaskPath, band_for, context_vector, sample_path

L_MIN, L_MAX = 0.05, 0.60


class TrainingDivergedError(RuntimeError):
    pass


class ActionMode(str, Enum):
    CIRCLE_PHI = "circle_phi"
    FULL = "full"


@dataclass(frozen=True)
class ActionSpec:
    mode: ActionMode
    R: float = 0.40
    l_min: float = L_MIN
    l_max: float = L_MAX

    @property
    def dim(self) -> int:
        return 1 if self.mode is ActionMode.CIRCLE_PHI else 3


@dataclass(frozen=True)
class MappedAction:
    morphology: Morphology
    phi: float | None = None

    def physical(self) -> list[float]:
        if self.phi is not None:
            return [self.phi]
        m = self.morphology
        return [m.L1, m.L2, m.theta2_cmd]


def map_action(spec: ActionSpec, u) -> MappedAction:
    """Map a squashed action in ``(-1, 1)^d`` to a physical design."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != spec.dim:
        raise ValueError(f"action has {u.size} components, expected {spec.dim}")
    if spec.mode is ActionMode.CIRCLE_PHI:
        phi = np.pi / 4 + (np.pi / 4 - PHI_EPS) * u[0]
        L1, L2 = phi_to_lengths(phi, spec.R)
        return MappedAction(Morphology(L1, L2, np.pi / 2), float(phi))
    half = 0.5 * (u + 1.0)
    L1 = spec.l_min + half[0] * (spec.l_max - spec.l_min)
    L2 = spec.l_min + half[1] * (spec.l_max - spec.l_min)
    return MappedAction(Morphology(float(L1), float(L2), float(half[2] * np.pi)))


@dataclass
class BanditEnv:
    """Fixed-context bandit: squashed action in, scalar reward out."""

    task: TaskPath
    spec: ActionSpec
    reward_fn: Callable[[np.ndarray], float]
    context: np.ndarray

    def reward(self, u) -> float:
        return float(self.reward_fn(np.asarray(u, dtype=float)))


def make_env(task: TaskPath, variant: RewardVariant | str = RewardVariant.HYBRID,
             weights: RewardWeights = RewardWeights()) -> BanditEnv:
    """Circle tasks use the analytic ``sin(2 phi)`` objective over ``phi``;
    other paths score the full morphology with the requested reward."""
    ctx = context_vector(task)
    if task.kind is PathKind.CIRCLE:
        spec = ActionSpec(ActionMode.CIRCLE_PHI, R=task.p1)

        def fn(u):
            return float(circle_analytic_reward(map_action(spec, u).phi))

        return BanditEnv(task, spec, fn, ctx)

    spec = ActionSpec(ActionMode.FULL)
    path = sample_path(task)
    band = band_for(task)
    variant = RewardVariant(variant)

    def fn(u):
        return evaluate(map_action(spec, u).morphology, path, band, weights).total(variant)

    return BanditEnv(task, spec, fn, ctx)


class ReplayBuffer:
    def __init__(self, capacity: int, ctx_dim: int, act_dim: int):
        self.capacity = capacity
        self.ctx = np.zeros((capacity, ctx_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def add(self, ctx, act, rew) -> None:
        i = self._next
        self.ctx[i], self.act[i], self.rew[i] = ctx, act, rew
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=min(batch, self.size), replace=False)
        return self.ctx[idx], self.act[idx], self.rew[idx]

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class SACSettings:
    episodes: int = 5000
    batch_size: int = 256
    lr: float = 3e-4
    gamma: float = 0.99
    buffer_size: int = 100_000
    tau: float = 0.005
    alpha: float = 0.2
    warmup: int = 256
    hidden: tuple[int, ...] = (64, 64)
    critic_activation: str = "relu"
    policy_out_scale: float = 1e-2


@dataclass(frozen=True)
class DDPGSettings:
    episodes: int = 5000
    batch_size: int = 256
    lr: float = 1e-3
    gamma: float = 0.99
    buffer_size: int = 100_000
    tau: float = 0.005
    warmup: int = 256
    noise_start: float = 0.1
    noise_end: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    critic_activation: str = "relu"
    policy_out_scale: float = 1e-2


@dataclass(frozen=True)
class PPOSettings:
    episodes: int = 5000
    batch_size: int = 128
    lr: float = 3e-4
    gamma: float = 0.99
    clip_ratio: float = 0.2
    epochs: int = 10
    minibatch_size: int = 32
    normalize_advantage: bool = False
    hidden: tuple[int, ...] = (64, 64)
    critic_activation: str = "relu"
    policy_out_scale: float = 1e-2


@dataclass
class TrainRecord:
    algorithm: str
    seed: int
    actions: np.ndarray  # squashed actions in (-1, 1), one row per episode
    rewards: np.ndarray
    greedy_u: np.ndarray
    greedy_reward: float
    settings: dict = field(default_factory=dict)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.rewards))

    @property
    def best_u(self) -> np.ndarray:
        return self.actions[self.best_index]

    @property
    def best_reward(self) -> float:
        return float(self.rewards[self.best_index])


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise TrainingDivergedError("non-finite value encountered during an update")


def _make_critic(ctx_dim, act_dim, s, rng) -> Mlp:
    return Mlp([ctx_dim + act_dim, *s.hidden, 1], rng, activation=s.critic_activation)


def _fit_critic(critic: Mlp, opt: Adam, ctx, act, rew) -> float:
    # single-step episodes: the regression target is the reward itself
    q = critic.forward(np.hstack([ctx, act]))[:, 0]
    err = q - rew
    grads, _ = critic.backward((2.0 / len(rew)) * err[:, None])
    _check_finite(err, *grads)
    opt.step(grads)
    return float(np.mean(err * err))


def _dq_da(critic: Mlp, ctx, act):
    q = critic.forward(np.hstack([ctx, act]))
    _, g_in = critic.backward(np.ones_like(q))
    return q[:, 0], g_in[:, ctx.shape[1]:]


class SACAgent:
    name = "SAC"

    def __init__(self, ctx_dim: int, act_dim: int, rng: np.random.Generator,
                 settings: SACSettings = SACSettings()):
        s = self.settings = settings
        self.act_dim = act_dim
        self.actor = Mlp([ctx_dim, *s.hidden, 2 * act_dim], rng, s.policy_out_scale)
        self.q1 = _make_critic(ctx_dim, act_dim, s, rng)
        self.q2 = _make_critic(ctx_dim, act_dim, s, rng)
        self.q1_targ, self.q2_targ = self.q1.copy(), self.q2.copy()
        self.actor_opt = Adam(self.actor.params, s.lr)
        self.q1_opt = Adam(self.q1.params, s.lr)
        self.q2_opt = Adam(self.q2.params, s.lr)

    def act(self, ctx, rng) -> np.ndarray:
        mean, log_std, _ = split_head(self.actor.forward(ctx[None, :]))
        a, _, _, _ = sample_squashed(mean, log_std, rng)
        return a[0]

    def greedy(self, ctx) -> np.ndarray:
        mean, _, _ = split_head(self.actor.forward(ctx[None, :]))
        return np.tanh(mean[0])

    def update(self, batch, rng) -> dict:
        s = self.settings
        ctx, act, rew = batch
        l1 = _fit_critic(self.q1, self.q1_opt, ctx, act, rew)
        l2 = _fit_critic(self.q2, self.q2_opt, ctx, act, rew)

        n = len(rew)
        mean, log_std, live = split_head(self.actor.forward(ctx))
        a, logp, u, eps = sample_squashed(mean, log_std, rng)
        q1, g1 = _dq_da(self.q1, ctx, a)
        q2, g2 = _dq_da(self.q2, ctx, a)
        dq_da = np.where((q1 <= q2)[:, None], g1, g2)
        one_m_a2 = 1.0 - a * a
        # loss = mean(alpha * logp - min Q)
        dlogp_du = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS)
        dl_du = (s.alpha * dlogp_du - dq_da * one_m_a2) / n
        std = np.exp(log_std)
        dl_dmean = dl_du
        dl_dlogstd = (dl_du * std * eps - s.alpha / n) * live
        grads, _ = self.actor.backward(np.hstack([dl_dmean, dl_dlogstd]))
        _check_finite(*grads)
        self.actor_opt.step(grads)

        self.q1_targ.soft_update_from(self.q1, s.tau)
        self.q2_targ.soft_update_from(self.q2, s.tau)
        return {"critic_loss": 0.5 * (l1 + l2), "entropy": float(-logp.mean())}


class DDPGAgent:
    name = "DDPG"

    def __init__(self, ctx_dim: int, act_dim: int, rng: np.random.Generator,
                 settings: DDPGSettings = DDPGSettings()):
        s = self.settings = settings
        self.act_dim = act_dim
        self.actor = Mlp([ctx_dim, *s.hidden, act_dim], rng, s.policy_out_scale)
        self.critic = _make_critic(ctx_dim, act_dim, s, rng)
        self.actor_targ, self.critic_targ = self.actor.copy(), self.critic.copy()
        self.actor_opt = Adam(self.actor.params, s.lr)
        self.critic_opt = Adam(self.critic.params, s.lr)
        self.noise = s.noise_start

    def set_progress(self, frac: float) -> None:
        s = self.settings
        self.noise = s.noise_start + (s.noise_end - s.noise_start) * min(max(frac, 0.0), 1.0)

    def act(self, ctx, rng) -> np.ndarray:
        pre = self.actor.forward(ctx[None, :])[0]
        return np.tanh(pre + self.noise * rng.standard_normal(self.act_dim))

    def greedy(self, ctx) -> np.ndarray:
        return np.tanh(self.actor.forward(ctx[None, :])[0])

    def update(self, batch, rng) -> dict:
        s = self.settings
        ctx, act, rew = batch
        loss = _fit_critic(self.critic, self.critic_opt, ctx, act, rew)

        a = np.tanh(self.actor.forward(ctx))
        _, dq_da = _dq_da(self.critic, ctx, a)
        grads, _ = self.actor.backward(-dq_da * (1.0 - a * a) / len(rew))
        _check_finite(*grads)
        self.actor_opt.step(grads)

        self.critic_targ.soft_update_from(self.critic, s.tau)
        self.actor_targ.soft_update_from(self.actor, s.tau)
        return {"critic_loss": loss}


class PPOAgent:
    name = "PPO"

    def __init__(self, ctx_dim: int, act_dim: int, rng: np.random.Generator,
                 settings: PPOSettings = PPOSettings()):
        s = self.settings = settings
        self.act_dim = act_dim
        self.actor = Mlp([ctx_dim, *s.hidden, 2 * act_dim], rng, s.policy_out_scale)
        self.value = _make_critic(ctx_dim, 0, s, rng)
        self.actor_opt = Adam(self.actor.params, s.lr)
        self.value_opt = Adam(self.value.params, s.lr)

    def dist(self, ctx):
        mean, log_std, _ = split_head(self.actor.forward(ctx[None, :]))
        return mean[0], log_std[0]

    def greedy(self, ctx) -> np.ndarray:
        return np.tanh(self.dist(ctx)[0])

    def update(self, ctx_b, u, logp_old, rew, rng) -> dict:
        s = self.settings
        n = len(rew)
        adv = rew - self.value.forward(ctx_b)[:, 0]
        if s.normalize_advantage:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        ratios = []
        for _ in range(s.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, s.minibatch_size):
                idx = perm[start:start + s.minibatch_size]
                m = len(idx)
                c = ctx_b[idx]
                out = self.actor.forward(c)
                mean, log_std, live = split_head(out)
                logp = gaussian_log_prob(u[idx], mean, log_std)
                ratio = np.exp(logp - logp_old[idx])
                A = adv[idx]
                clipped = ((A > 0) & (ratio > 1 + s.clip_ratio)) | ((A < 0) & (ratio < 1 - s.clip_ratio))
                dl_dlogp = np.where(clipped, 0.0, -ratio * A) / m
                z = (u[idx] - mean) / np.exp(log_std)
                dl_dmean = dl_dlogp[:, None] * z / np.exp(log_std)
                dl_dlogstd = dl_dlogp[:, None] * (z * z - 1.0) * live
                grads, _ = self.actor.backward(np.hstack([dl_dmean, dl_dlogstd]))
                _check_finite(*grads)
                self.actor_opt.step(grads)

                v = self.value.forward(c)[:, 0]
                vgrads, _ = self.value.backward((2.0 / m) * (v - rew[idx])[:, None])
                _check_finite(*vgrads)
                self.value_opt.step(vgrads)
                ratios.append(ratio)
        r = np.concatenate(ratios)
        return {"ratio_mean": float(r.mean()), "ratio_max_dev": float(np.abs(r - 1).max())}


ALGORITHMS = ("sac", "ddpg", "ppo")


def _finish(agent, env: BanditEnv, name, seed, actions, rewards, settings) -> TrainRecord:
    for net in (getattr(agent, "actor"), getattr(agent, "q1", None), getattr(agent, "critic", None),
                getattr(agent, "value", None)):
        if net is not None and not net.all_finite():
            raise TrainingDivergedError(f"{name}: non-finite parameters after training")
    g = agent.greedy(env.context)
    return TrainRecord(name, seed, np.asarray(actions), np.asarray(rewards), g, env.reward(g),
                       asdict(settings))


def train_off_policy(agent, env: BanditEnv, seed: int, rng: np.random.Generator,
                     uniform_warmup: bool) -> tuple[list, list]:
    s = agent.settings
    buf = ReplayBuffer(s.buffer_size, env.context.size, env.spec.dim)
    actions, rewards = [], []
    for ep in range(s.episodes):
        if hasattr(agent, "set_progress"):
            agent.set_progress(ep / max(s.episodes - 1, 1))
        if uniform_warmup and ep < s.warmup:
            a = rng.uniform(-1.0, 1.0, env.spec.dim)
        else:
            a = agent.act(env.context, rng)
        # keep strictly inside the open box so the mapping stays invertible
        a = np.clip(a, -1.0 + 1e-7, 1.0 - 1e-7)
        r = env.reward(a)
        buf.add(env.context, a, r)
        actions.append(a)
        rewards.append(r)
        if len(buf) >= s.warmup and len(buf) >= s.batch_size:
            agent.update(buf.sample(s.batch_size, rng), rng)
    return actions, rewards


def train_sac(env: BanditEnv, seed: int, settings: SACSettings = SACSettings()) -> tuple[TrainRecord, SACAgent]:
    rng = np.random.default_rng(seed)
    agent = SACAgent(env.context.size, env.spec.dim, rng, settings)
    actions, rewards = train_off_policy(agent, env, seed, rng, uniform_warmup=False)
    return _finish(agent, env, "SAC", seed, actions, rewards, settings), agent


def train_ddpg(env: BanditEnv, seed: int, settings: DDPGSettings = DDPGSettings()) -> tuple[TrainRecord, DDPGAgent]:
    rng = np.random.default_rng(seed)
    agent = DDPGAgent(env.context.size, env.spec.dim, rng, settings)
    actions, rewards = train_off_policy(agent, env, seed, rng, uniform_warmup=True)
    return _finish(agent, env, "DDPG", seed, actions, rewards, settings), agent


def train_ppo(env: BanditEnv, seed: int, settings: PPOSettings = PPOSettings()) -> tuple[TrainRecord, PPOAgent]:
    s = settings
    rng = np.random.default_rng(seed)
    agent = PPOAgent(env.context.size, env.spec.dim, rng, s)
    actions, rewards = [], []
    done = 0
    while done < s.episodes:
        n = min(s.batch_size, s.episodes - done)
        mean, log_std = agent.dist(env.context)
        u = mean + np.exp(log_std) * rng.standard_normal((n, env.spec.dim))
        a = np.clip(np.tanh(u), -1.0 + 1e-7, 1.0 - 1e-7)
        r = np.array([env.reward(ai) for ai in a])
        logp_old = gaussian_log_prob(u, mean, log_std)
        ctx_b = np.repeat(env.context[None, :], n, axis=0)
        agent.update(ctx_b, u, logp_old, r, rng)
        actions.extend(a)
        rewards.extend(r)
        done += n
    return _finish(agent, env, "PPO", seed, actions, rewards, s), agent


TRAINERS = {"sac": train_sac, "ddpg": train_ddpg, "ppo": train_ppo}
SETTINGS = {"sac": SACSettings, "ddpg": DDPGSettings, "ppo": PPOSettings}


def train(algo: str, env: BanditEnv, seed: int, settings=None) -> TrainRecord:
    algo = algo.lower()
    if algo not in TRAINERS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    settings = settings or SETTINGS[algo]()
    record, _ = TRAINERS[algo](env, seed, settings)
    return record
