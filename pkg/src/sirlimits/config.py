"""Declarative experiment configurations for the command-line driver.

A configuration is a JSON document with an ``experiment`` name plus the
blocks that experiment needs. Validation is strict: unknown keys anywhere are
rejected, so typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .simulate import NoiseModel
from .sir import InitialCondition, SirParams

EXPERIMENTS = (
    "simulate",
    "sweep-directions",
    "error-fit",
    "fit",
    "ensemble",
    "power",
    "power-empirical",
    "epsilon-invert",
    "nyc-table",
)

_COMMON_KEYS = {"experiment", "seed", "threads"}

_EXPERIMENT_KEYS = {
    "simulate": {"params", "population", "horizon", "steps_per_day", "noise", "p", "T"},
    "sweep-directions": {"params", "population", "epsilon", "n_angles", "horizon", "steps_per_day"},
    "error-fit": {"params", "population", "epsilon", "horizon", "steps_per_day"},
    "fit": {"observations", "population", "p", "noise", "sigma_inferred", "steps_per_day", "n_starts"},
    "ensemble": {"params", "population", "noise", "p", "T", "replicates",
                 "fit_steps_per_day", "n_starts"},
    "power": {"params", "population", "noise", "alpha", "T", "p", "omegas",
              "epsilons", "sigmas", "steps_per_day"},
    "power-empirical": {"params", "population", "noise", "alpha", "T", "p", "omegas",
                        "epsilons", "sigmas", "steps_per_day", "replicates"},
    "epsilon-invert": {"targets"},
    "nyc-table": {"data", "population", "p_values", "n_starts", "steps_per_day"},
}

_REQUIRED_KEYS = {
    "simulate": {"params", "population", "horizon", "noise", "p", "T"},
    "sweep-directions": {"params", "population", "epsilon", "horizon"},
    "error-fit": {"params", "population", "epsilon", "horizon"},
    "fit": {"observations", "population", "p"},
    "ensemble": {"params", "population", "noise", "p", "T", "replicates"},
    "power": {"params", "population", "noise", "alpha", "T", "p", "omegas", "epsilons"},
    "power-empirical": {"params", "population", "noise", "alpha", "T", "p", "omegas",
                        "epsilons", "replicates"},
    "epsilon-invert": {"targets"},
    "nyc-table": {"p_values"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated configuration: the experiment name plus its raw blocks."""

    experiment: str
    raw: dict
    seed: int
    threads: int

    def get(self, key, default=None):
        return self.raw.get(key, default)


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def parse_params(block) -> SirParams:
    if not isinstance(block, dict):
        raise ConfigError("params must be an object with beta and gamma")
    _check_keys(block, {"beta", "gamma"}, "params")
    try:
        return SirParams(float(block["beta"]), float(block["gamma"]))
    except KeyError as exc:
        raise ConfigError(f"params is missing {exc}") from exc


def parse_noise(block) -> NoiseModel:
    if not isinstance(block, dict):
        raise ConfigError("noise must be an object with a kind")
    _check_keys(block, {"kind", "sigma", "sigma_t"}, "noise")
    kind = block.get("kind")
    if kind == "known_sequence":
        if "sigma_t" not in block:
            raise ConfigError("known_sequence noise needs sigma_t")
        return NoiseModel.known(np.asarray(block["sigma_t"], dtype=float))
    if kind in ("case1", "case2"):
        sigma = block.get("sigma")
        return NoiseModel(kind=kind, sigma=None if sigma is None else float(sigma))
    raise ConfigError(f"noise kind must be known_sequence, case1, or case2, got {kind!r}")


def parse_init(config: ExperimentConfig) -> InitialCondition:
    population = config.get("population")
    if population is None:
        raise ConfigError("population is required")
    return InitialCondition.from_population(int(population))


def validate_config(raw: dict, experiment: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    name = raw.get("experiment", experiment)
    if name is None:
        raise ConfigError("configuration needs an 'experiment' name")
    if experiment is not None and name != experiment:
        raise ConfigError(
            f"config is for experiment {name!r} but {experiment!r} was requested"
        )
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    _check_keys(raw, _EXPERIMENT_KEYS[name] | _COMMON_KEYS, "configuration")
    missing = _REQUIRED_KEYS[name] - set(raw)
    if missing:
        raise ConfigError(f"{name} config is missing: {', '.join(sorted(missing))}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed > 2**64 - 1:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")

    if name == "ensemble" and int(raw.get("replicates", 0)) < 1:
        raise ConfigError("ensemble needs replicates >= 1")
    if name == "power-empirical" and int(raw.get("replicates", 0)) < 100:
        raise ConfigError("power-empirical needs replicates >= 100")
    if name in ("power", "power-empirical") and raw.get("sigmas") is not None:
        noise_block = raw.get("noise") or {}
        if noise_block.get("kind") == "known_sequence":
            raise ConfigError("a sigmas sweep needs case1 or case2 noise, not known_sequence")
    if name == "epsilon-invert":
        targets = raw.get("targets")
        if not isinstance(targets, list) or not targets:
            raise ConfigError("epsilon-invert needs a non-empty list of targets")
        for idx, target in enumerate(targets):
            _check_keys(target, {"target_type2", "alpha", "sigma", "p", "T", "delta"},
                        f"targets[{idx}]")

    return ExperimentConfig(experiment=name, raw=raw, seed=seed, threads=threads)


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return validate_config(raw, experiment)
