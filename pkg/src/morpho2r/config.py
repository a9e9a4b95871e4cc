"""Experiment configuration: defaults, YAML loading and validation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .blackbox import BOSettings, CMAESSettings, PSOSettings
from .reward import RewardVariant, RewardWeights
from .rlagents import DDPGSettings, PPOSettings, SACSettings
from .taskpaths import PathKind, TaskPath


class ConfigError(ValueError):
    pass


TASK_NAMES = {"circle": PathKind.CIRCLE, "ellipse": PathKind.ELLIPSE, "rect": PathKind.RECTANGLE,
              "rectangle": PathKind.RECTANGLE}
FILE_TASK_NAME = {PathKind.CIRCLE: "circle", PathKind.ELLIPSE: "ellipse", PathKind.RECTANGLE: "rectangle"}

HEURISTICS = ("pso", "bo", "cmaes")
RL_METHODS = ("sac", "ddpg", "ppo")
CIRCLE_METHODS = ("analytic", "sweep", *HEURISTICS, *RL_METHODS)
PATH_METHODS = ("equal-dex", "band-match", *RL_METHODS)

DEFAULT_SIZES = {PathKind.CIRCLE: (0.40, 0.0), PathKind.ELLIPSE: (0.40, 0.25), PathKind.RECTANGLE: (0.70, 0.40)}

# choices the method description leaves open; echoed into run metadata
UNSTATED_DEFAULTS = {
    "elbow_branch": "theta2 = +arccos(.) in [0, pi]",
    "reach_tolerance_m": 1e-9,
    "ellipse_sampling": "uniform curve parameter",
    "rectangle_sampling": "uniform arc length, counter-clockwise from (+w/2, +h/2)",
    "band_match_order": "L1 >= L2",
    "equal_dex_theta2_logged": "pi/2",
    "rng": "numpy PCG64 via default_rng(seed)",
    "gp_prior_mean": "sample mean of observations",
    "gp_signal_variance": 1.0,
    "cmaes_weights": "log-decreasing ln(mu+1/2) - ln(i), normalised",
    "cmaes_c_mu": 0.5,
    "hidden_layers": [64, 64],
    "actor_hidden_activation": "tanh",
    "critic_hidden_activation": "relu",
    "init": "U(+-1/sqrt(fan_in)); policy output layer scaled by 1e-2",
    "log_std_clamp": [-5.0, 2.0],
    "off_policy_warmup_episodes": 256,
    "ddpg_warmup_actions": "uniform in the action box",
    "ddpg_noise": "Gaussian on pre-squash output, sigma 0.1 -> 0.01 linear",
    "ppo_epochs": 10,
    "ppo_minibatch": 32,
    "ppo_advantage": "reward - V(ctx), unnormalised; no entropy bonus",
    "context": "one-hot kind (3) + two sizes in metres",
    "curve_moving_average_window": 100,
    "circle_summary_rl_row": "mean over seeds of the BEST action",
    "path_summary_rl_stats": "GREEDY morphology; R = greedy hybrid reward",
}


def _replace(obj, overrides: dict, where: str):
    if not overrides:
        return obj
    names = {f.name for f in dataclasses.fields(obj)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    fixed = {k: tuple(v) if isinstance(getattr(obj, k), tuple) else v for k, v in overrides.items()}
    return dataclasses.replace(obj, **fixed)


@dataclass
class ExperimentConfig:
    task: TaskPath
    methods: tuple[str, ...]
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    out_dir: Path = Path("runs")
    reward_variant: str = "analytic"
    weights: RewardWeights = RewardWeights()
    sweep_n_grid: int = 1801
    heuristic_seed: int = 0
    pso: PSOSettings = PSOSettings()
    bo: BOSettings = BOSettings()
    cmaes: CMAESSettings = CMAESSettings()
    sac: SACSettings = SACSettings()
    ddpg: DDPGSettings = DDPGSettings()
    ppo: PPOSettings = PPOSettings()
    workers: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def task_name(self) -> str:
        return FILE_TASK_NAME[self.task.kind]

    def rl_settings(self, algo: str):
        return getattr(self, algo)

    def with_episodes(self, episodes: int) -> "ExperimentConfig":
        cfg = dataclasses.replace(self)
        for algo in RL_METHODS:
            setattr(cfg, algo, dataclasses.replace(getattr(cfg, algo), episodes=episodes))
        return cfg

    def to_dict(self) -> dict:
        d = {
            "task": {"kind": self.task.kind.value, "p1": self.task.p1, "p2": self.task.p2,
                     "n_samples": self.task.n_samples, "ellipse_sampling": self.task.ellipse_sampling},
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "reward_variant": self.reward_variant,
            "weights": dataclasses.asdict(self.weights),
            "sweep_n_grid": self.sweep_n_grid,
            "heuristic_seed": self.heuristic_seed,
            "workers": self.workers,
        }
        for name in ("pso", "bo", "cmaes", *RL_METHODS):
            d[name] = dataclasses.asdict(getattr(self, name))
        return json.loads(json.dumps(d))

    def digest(self) -> str:
        # worker count does not affect results
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def default_methods(kind: PathKind) -> tuple[str, ...]:
    return CIRCLE_METHODS if kind is PathKind.CIRCLE else PATH_METHODS


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    kind = cfg.task.kind
    allowed = default_methods(kind)
    for m in cfg.methods:
        if m not in CIRCLE_METHODS + PATH_METHODS:
            raise ConfigError(f"unknown method {m!r}")
        if m not in allowed:
            raise ConfigError(f"method {m!r} is not available for the {cfg.task_name} task")
    expected = "analytic" if kind is PathKind.CIRCLE else RewardVariant.HYBRID.value
    if cfg.reward_variant != expected:
        raise ConfigError(f"the {cfg.task_name} task uses the {expected!r} reward, got {cfg.reward_variant!r}")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def config_from_mapping(raw: dict, task: str | None = None) -> ExperimentConfig:
    """Build a config from a plain mapping (a parsed YAML/JSON document).

    ``task`` overrides ``raw["task"]["kind"]``; missing keys take defaults.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    tsec = dict(raw.pop("task", {}) or {})
    kind_name = task or tsec.get("kind", "circle")
    tsec.pop("kind", None)
    if kind_name not in TASK_NAMES:
        raise ConfigError(f"unknown task {kind_name!r}")
    kind = TASK_NAMES[kind_name]
    p1, p2 = DEFAULT_SIZES[kind]
    try:
        tp = TaskPath(kind, float(tsec.pop("p1", p1)), float(tsec.pop("p2", p2)),
                      int(tsec.pop("n_samples", 720)), tsec.pop("ellipse_sampling", "parameter"))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if tsec:
        raise ConfigError(f"unknown keys in task: {sorted(tsec)}")

    default_variant = "analytic" if kind is PathKind.CIRCLE else RewardVariant.HYBRID.value
    try:
        cfg = ExperimentConfig(
            task=tp,
            methods=tuple(raw.pop("methods", default_methods(kind))),
            seeds=tuple(int(s) for s in raw.pop("seeds", (1, 2, 3, 4, 5))),
            out_dir=Path(raw.pop("out_dir", f"runs/{FILE_TASK_NAME[kind]}")),
            reward_variant=str(raw.pop("reward_variant", default_variant)),
            sweep_n_grid=int(raw.pop("sweep_n_grid", 1801)),
            heuristic_seed=int(raw.pop("heuristic_seed", 0)),
            workers=int(raw.pop("workers", 1)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    cfg.weights = _replace(cfg.weights, raw.pop("weights", None), "weights")
    for name in ("pso", "bo", "cmaes", *RL_METHODS):
        setattr(cfg, name, _replace(getattr(cfg, name), raw.pop(name, None), name))
    episodes = raw.pop("episodes", None)
    if raw:
        raise ConfigError(f"unknown top-level config keys: {sorted(raw)}")
    if episodes is not None:
        cfg = _set_episodes(cfg, episodes)
    return validate(cfg)


def _set_episodes(cfg: ExperimentConfig, episodes) -> ExperimentConfig:
    if int(episodes) < 1:
        raise ConfigError("episodes must be >= 1")
    return cfg.with_episodes(int(episodes))


def load_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {p}: {e}") from None
    return raw or {}


def build_config(task: str | None = None, path: str | Path | None = None, *, methods=None, seeds=None,
                 episodes: int | None = None, out: str | Path | None = None,
                 workers: int | None = None) -> ExperimentConfig:
    """Assemble a config from defaults, an optional YAML file and CLI flags
    (flags win)."""
    cfg = config_from_mapping(load_file(path) if path is not None else {}, task)
    if methods is not None:
        cfg.methods = tuple(methods)
    if seeds is not None:
        cfg.seeds = tuple(int(s) for s in seeds)
    if out is not None:
        cfg.out_dir = Path(out)
    if workers is not None:
        cfg.workers = int(workers)
    if episodes is not None:
        cfg = _set_episodes(cfg, episodes)
    return validate(cfg)
