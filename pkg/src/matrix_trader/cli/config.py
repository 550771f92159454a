"""Experiment configuration: a sectioned INI file with strict keys.

Sections: [dataset], [env], [policy], [algo], [run]. Every key has the
default documented in the owning module; unknown sections or keys are
rejected with a single error naming all of them. `write_resolved`
materializes every default so the file round-trips to an identical
config.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from matrix_trader.algo.a2c import A2cConfig
from matrix_trader.algo.ppo import PpoConfig
from matrix_trader.env import EnvConfig
from matrix_trader.features import FeatureLayout
from matrix_trader.nets.policies import CnnSpec, MlpSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpecConfig:
    kind: str = "synthetic"  # "path" | "synthetic"
    path: str = ""
    seed: int = 0
    days: int = 400
    tickers: int = 30
    regime: str = "random-walk"
    split_fraction: float | None = None


@dataclass(frozen=True)
class PolicySpecConfig:
    kind: str = "cnn"  # "cnn" | "mlp"
    channels: tuple[int, int] = (32, 64)
    dense: int = 512
    kernel: int = 3
    pool: int = 2
    hidden: tuple[int, int] = (64, 64)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "out"
    normalize: bool = True
    n_envs: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpecConfig = DatasetSpecConfig()
    env: EnvConfig = EnvConfig()
    policy: PolicySpecConfig = PolicySpecConfig()
    algo: PpoConfig | A2cConfig = PpoConfig()
    run: RunConfig = RunConfig()


_DATASET_KEYS = {
    "path": {"kind", "path", "split_fraction"},
    "synthetic": {"kind", "seed", "days", "tickers", "regime", "split_fraction"},
}
_ENV_KEYS = {
    "initial_balance", "hmax", "cost_rate", "reward_scale",
    "turbulence_lookback", "window",
}
_POLICY_KEYS = {"kind", "channels", "dense", "kernel", "pool", "hidden"}
_ALGO_COMMON = {"kind", "gamma", "lam", "horizon", "value_coef", "entropy_coef",
                "lr", "total_steps"}
_ALGO_KEYS = {
    "ppo": _ALGO_COMMON | {"clip_ratio", "epochs", "minibatch_size", "max_grad_norm"},
    "a2c": _ALGO_COMMON | {"rms_alpha", "rms_eps"},
}
_RUN_KEYS = {"seed", "out", "normalize", "n_envs"}
_SECTIONS = ("dataset", "env", "policy", "algo", "run")


class _Section:
    """One INI section with typed getters that collect error messages."""

    def __init__(self, name: str, raw: dict[str, str], errors: list[str]):
        self.name = name
        self.raw = raw
        self.errors = errors

    def _get(self, key: str, default):
        if key not in self.raw:
            return default
        return self.raw[key]

    def str_(self, key: str, default: str, choices=None) -> str:
        val = str(self._get(key, default)).strip()
        if choices and val not in choices:
            self.errors.append(
                f"{self.name}.{key}: expected one of {sorted(choices)}, got {val!r}"
            )
            return default
        return val

    def int_(self, key: str, default: int) -> int:
        raw = self._get(key, default)
        if isinstance(raw, int):
            return raw
        try:
            return int(raw.strip())
        except ValueError:
            self.errors.append(f"{self.name}.{key}: invalid integer {raw!r}")
            return default

    def float_(self, key: str, default: float) -> float:
        raw = self._get(key, default)
        if isinstance(raw, float):
            return raw
        try:
            return float(raw.strip())
        except ValueError:
            self.errors.append(f"{self.name}.{key}: invalid number {raw!r}")
            return default

    def bool_(self, key: str, default: bool) -> bool:
        raw = self._get(key, default)
        if isinstance(raw, bool):
            return raw
        val = raw.strip().lower()
        if val in ("1", "true", "yes", "on"):
            return True
        if val in ("0", "false", "no", "off"):
            return False
        self.errors.append(f"{self.name}.{key}: invalid boolean {raw!r}")
        return default

    def int_pair(self, key: str, default: tuple[int, int]) -> tuple[int, int]:
        raw = self._get(key, default)
        if isinstance(raw, tuple):
            return raw
        parts = [p.strip() for p in raw.split(",")]
        try:
            values = tuple(int(p) for p in parts)
        except ValueError:
            self.errors.append(f"{self.name}.{key}: invalid integer list {raw!r}")
            return default
        if len(values) != 2:
            self.errors.append(
                f"{self.name}.{key}: expected two comma-separated integers, got {raw!r}"
            )
            return default
        return values

    def fraction_or_none(self, key: str, default=None):
        raw = self._get(key, default)
        if raw is None:
            return None
        if isinstance(raw, float):
            return raw
        val = raw.strip().lower()
        if val == "none":
            return None
        try:
            frac = float(val)
        except ValueError:
            self.errors.append(
                f"{self.name}.{key}: expected a fraction or 'none', got {raw!r}"
            )
            return None
        if not 0.0 < frac < 1.0:
            self.errors.append(
                f"{self.name}.{key}: fraction must be in (0, 1), got {raw!r}"
            )
            return None
        return frac


def _read_ini(path: Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    sections = _read_ini(path)

    offenders: list[str] = []
    errors: list[str] = []
    for name in sections:
        if name not in _SECTIONS:
            offenders.append(f"[{name}] (unknown section)")

    def section(name: str) -> _Section:
        return _Section(name, sections.get(name, {}), errors)

    ds = section("dataset")
    ds_kind = ds.str_("kind", "synthetic", choices=set(_DATASET_KEYS))
    _collect_unknown(sections, "dataset", _DATASET_KEYS[ds_kind], offenders)
    dataset = DatasetSpecConfig(
        kind=ds_kind,
        path=ds.str_("path", ""),
        seed=ds.int_("seed", 0),
        days=ds.int_("days", 400),
        tickers=ds.int_("tickers", 30),
        regime=ds.str_("regime", "random-walk"),
        split_fraction=ds.fraction_or_none("split_fraction"),
    )
    if ds_kind == "path" and not dataset.path:
        errors.append("dataset.path: required when dataset.kind = path")

    env_s = section("env")
    _collect_unknown(sections, "env", _ENV_KEYS, offenders)
    defaults = EnvConfig()
    try:
        env = EnvConfig(
            initial_balance=env_s.float_("initial_balance", defaults.initial_balance),
            hmax=env_s.int_("hmax", defaults.hmax),
            cost_rate=env_s.float_("cost_rate", defaults.cost_rate),
            reward_scale=env_s.float_("reward_scale", defaults.reward_scale),
            turbulence_lookback=env_s.int_("turbulence_lookback",
                                           defaults.turbulence_lookback),
            window=env_s.int_("window", defaults.window),
        )
    except ValueError as exc:
        errors.append(f"env: {exc}")
        env = defaults

    pol = section("policy")
    _collect_unknown(sections, "policy", _POLICY_KEYS, offenders)
    policy = PolicySpecConfig(
        kind=pol.str_("kind", "cnn", choices={"cnn", "mlp"}),
        channels=pol.int_pair("channels", (32, 64)),
        dense=pol.int_("dense", 512),
        kernel=pol.int_("kernel", 3),
        pool=pol.int_("pool", 2),
        hidden=pol.int_pair("hidden", (64, 64)),
    )

    alg = section("algo")
    algo_kind = alg.str_("kind", "ppo", choices=set(_ALGO_KEYS))
    _collect_unknown(sections, "algo", _ALGO_KEYS[algo_kind], offenders)
    try:
        if algo_kind == "ppo":
            d = PpoConfig()
            algo: PpoConfig | A2cConfig = PpoConfig(
                clip_ratio=alg.float_("clip_ratio", d.clip_ratio),
                gamma=alg.float_("gamma", d.gamma),
                lam=alg.float_("lam", d.lam),
                epochs=alg.int_("epochs", d.epochs),
                minibatch_size=alg.int_("minibatch_size", d.minibatch_size),
                value_coef=alg.float_("value_coef", d.value_coef),
                entropy_coef=alg.float_("entropy_coef", d.entropy_coef),
                lr=alg.float_("lr", d.lr),
                horizon=alg.int_("horizon", d.horizon),
                max_grad_norm=alg.float_("max_grad_norm", d.max_grad_norm),
                total_steps=alg.int_("total_steps", d.total_steps),
            )
        else:
            d = A2cConfig()
            algo = A2cConfig(
                gamma=alg.float_("gamma", d.gamma),
                lam=alg.float_("lam", d.lam),
                horizon=alg.int_("horizon", d.horizon),
                value_coef=alg.float_("value_coef", d.value_coef),
                entropy_coef=alg.float_("entropy_coef", d.entropy_coef),
                lr=alg.float_("lr", d.lr),
                rms_alpha=alg.float_("rms_alpha", d.rms_alpha),
                rms_eps=alg.float_("rms_eps", d.rms_eps),
                total_steps=alg.int_("total_steps", d.total_steps),
            )
    except ValueError as exc:
        errors.append(f"algo: {exc}")
        algo = PpoConfig()

    run_s = section("run")
    _collect_unknown(sections, "run", _RUN_KEYS, offenders)
    run = RunConfig(
        seed=run_s.int_("seed", 0),
        out=run_s.str_("out", "out"),
        normalize=run_s.bool_("normalize", True),
        n_envs=run_s.int_("n_envs", 1),
    )

    if offenders:
        errors.insert(0, "unknown config keys: " + ", ".join(offenders))
    if errors:
        raise ConfigError(f"{path}: " + "; ".join(errors))
    return ExperimentConfig(dataset=dataset, env=env, policy=policy,
                            algo=algo, run=run)


def _collect_unknown(sections: dict, name: str, allowed: set[str],
                     offenders: list[str]) -> None:
    for key in sections.get(name, {}):
        if key not in allowed:
            offenders.append(f"{name}.{key}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def write_resolved(cfg: ExperimentConfig, path: str | Path) -> None:
    """Write the config with every default materialized."""
    lines: list[str] = []

    lines.append("[dataset]")
    lines.append(f"kind = {cfg.dataset.kind}")
    if cfg.dataset.kind == "path":
        lines.append(f"path = {cfg.dataset.path}")
    else:
        for key in ("seed", "days", "tickers", "regime"):
            lines.append(f"{key} = {_fmt(getattr(cfg.dataset, key))}")
    lines.append(f"split_fraction = {_fmt(cfg.dataset.split_fraction)}")
    lines.append("")

    lines.append("[env]")
    for key in ("initial_balance", "hmax", "cost_rate", "reward_scale",
                "turbulence_lookback", "window"):
        lines.append(f"{key} = {_fmt(getattr(cfg.env, key))}")
    lines.append("")

    lines.append("[policy]")
    for key in ("kind", "channels", "dense", "kernel", "pool", "hidden"):
        lines.append(f"{key} = {_fmt(getattr(cfg.policy, key))}")
    lines.append("")

    lines.append("[algo]")
    lines.append(f"kind = {cfg.algo.kind}")
    for f in dataclasses.fields(cfg.algo):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.algo, f.name))}")
    lines.append("")

    lines.append("[run]")
    for key in ("seed", "out", "normalize", "n_envs"):
        lines.append(f"{key} = {_fmt(getattr(cfg.run, key))}")
    lines.append("")

    Path(path).write_text("\n".join(lines), encoding="utf-8")


def build_policy_spec(policy: PolicySpecConfig, kind: str, window: int,
                      n_assets: int) -> CnnSpec | MlpSpec:
    """Concrete architecture for a dataset: width and action count come
    from the feature layout, the rest from the config."""
    layout = FeatureLayout(n_assets)
    if kind == "cnn":
        return CnnSpec(
            window=window,
            width=layout.width,
            n_actions=n_assets,
            channels=policy.channels,
            dense=policy.dense,
            kernel=policy.kernel,
            pool=policy.pool,
        )
    if kind == "mlp":
        return MlpSpec(
            width=layout.width,
            n_actions=n_assets,
            hidden=policy.hidden,
        )
    raise ConfigError(f"unknown policy kind {kind!r}")
