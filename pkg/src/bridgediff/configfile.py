"""Flat ``key = value`` run configuration files.

UTF-8 text, one assignment per line, ``#`` starts a comment, blank lines
ignored. Unknown keys are rejected so typos fail loudly. The same format
feeds ``--set key=value`` command-line overrides, applied after the file.
"""

from __future__ import annotations

from pathlib import Path

from .data import (
    PairedDataset,
    gen_binary_patterns,
    gen_joint_gaussian,
    gen_two_moons_paired,
    load as load_dataset,
)
from .oracle import JointGaussianSpec
from .training import TrainConfig


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise UsageError(f"expected a boolean, got {raw!r}")


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list, got {raw!r}") from exc


_SCHEMA = {
    "T": int,
    "s": float,
    "seed": int,
    "batch_size": int,
    "max_steps": int,
    "hidden": _parse_int_tuple,
    "embed_dim": int,
    "lr": float,
    "min_lr": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "ema_decay": float,
    "ema_update_interval": int,
    "ema_start_step": int,
    "plateau_factor": float,
    "plateau_patience": int,
    "plateau_cooldown": int,
    "plateau_threshold": float,
    "checkpoint_interval": int,
    "validation_interval": int,
    "val_fraction": float,
    "weighted_loss": _parse_bool,
    "normalize_inputs": _parse_bool,
    "dataset": str,
    "generator": str,
}

_GEN_SCHEMA = {
    "gen_n": int,
    "gen_dim": int,
    "gen_mean0": float,
    "gen_meany": float,
    "gen_var0": float,
    "gen_vary": float,
    "gen_corr": float,
    "gen_noise_sd": float,
    "gen_side": int,
    "gen_flip_prob": float,
}


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    return parse_kv_text(path.read_text(encoding="utf-8"), origin=str(path))


def apply_overrides(raw: dict[str, str], overrides: list[str]) -> dict[str, str]:
    merged = dict(raw)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"override must be key=value, got {item!r}")
        merged[key.strip()] = value.strip()
    return merged


def build_train_config(raw: dict[str, str]) -> TrainConfig:
    """Validate raw key/value strings into a TrainConfig."""
    values: dict = {}
    gen_params: dict = {}
    for key, value in raw.items():
        if key in _SCHEMA:
            try:
                values[key] = _SCHEMA[key](value)
            except (ValueError, TypeError) as exc:
                raise UsageError(f"bad value for {key!r}: {value!r}") from exc
        elif key in _GEN_SCHEMA:
            try:
                gen_params[key[4:]] = _GEN_SCHEMA[key](value)
            except (ValueError, TypeError) as exc:
                raise UsageError(f"bad value for {key!r}: {value!r}") from exc
        else:
            raise UsageError(f"unknown config key {key!r}")
    if "seed" not in values:
        raise UsageError("config must set 'seed'")
    values["gen_params"] = gen_params
    try:
        return TrainConfig(**values)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def resolve_dataset(config: TrainConfig) -> PairedDataset:
    """Load the configured dataset file or run the configured generator."""
    if config.dataset and config.generator:
        raise UsageError("set either 'dataset' or 'generator', not both")
    if config.dataset:
        path = Path(config.dataset)
        if not path.exists():
            raise UsageError(f"'dataset' points to a missing file: {path}")
        try:
            return load_dataset(path)
        except ValueError as exc:
            raise UsageError(f"could not load dataset {path}: {exc}") from exc
    if not config.generator:
        raise UsageError("config must set either 'dataset' or 'generator'")
    allowed = {
        "joint_gaussian": {"n", "dim", "mean0", "meany", "var0", "vary", "corr"},
        "two_moons": {"n", "noise_sd"},
        "binary_patterns": {"n", "side", "flip_prob"},
    }
    if config.generator not in allowed:
        raise UsageError(
            f"unknown generator {config.generator!r}; known: {sorted(allowed)}"
        )
    p = dict(config.gen_params)
    extra = set(p) - allowed[config.generator]
    if extra:
        raise UsageError(
            f"generator {config.generator!r} does not take gen_{sorted(extra)[0]}"
        )
    try:
        if config.generator == "joint_gaussian":
            spec = JointGaussianSpec(
                mean0=p.get("mean0", 0.0),
                meany=p.get("meany", 0.0),
                var0=p.get("var0", 1.0),
                vary=p.get("vary", 1.0),
                corr=p.get("corr", 0.0),
            )
            return gen_joint_gaussian(
                spec, dim=p.get("dim", 1), n=p.get("n", 10000), seed=config.seed
            )
        if config.generator == "two_moons":
            return gen_two_moons_paired(
                n=p.get("n", 10000), noise_sd=p.get("noise_sd", 0.05), seed=config.seed
            )
        return gen_binary_patterns(
            n=p.get("n", 10000), side=p.get("side", 4),
            flip_prob=p.get("flip_prob", 0.0), seed=config.seed,
        )
    except ValueError as exc:
        raise UsageError(f"generator {config.generator!r}: {exc}") from exc
