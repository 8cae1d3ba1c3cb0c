"""Noisy daily observations of an epidemic trajectory.

Observations follow Y_t = p * delta_t + xi_t with xi_t ~ N(0, sigma_t^2),
where delta_t is the expected new-infection count on day t and p the
reporting rate. Three variance structures are supported:

* known_sequence -- explicit per-day standard deviations;
* case1          -- sigma_t = N * sigma, proportional to population;
* case2          -- sigma_t = N * sigma * i_t, proportional to infections.

Gaussian draws come from the counter-based Philox generator keyed by the
series seed, so replicate r / day t is independent of iteration order and
identical output is guaranteed for identical seeds, across runs and worker
counts. Observations are deliberately left unrounded and may be negative:
the likelihood machinery treats Y_t as continuous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError, InsufficientDataError
from .sir import Trajectory, incidence

_KINDS = ("known_sequence", "case1", "case2")


@dataclass(frozen=True)
class NoiseModel:
    """Variance specification for the observation model."""

    kind: str
    sigma: float | None = None
    sigma_t: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"noise kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == "known_sequence":
            if self.sigma_t is None:
                raise ValueError("known_sequence noise needs an explicit sigma_t array")
            arr = np.asarray(self.sigma_t, dtype=float)
            if np.any(arr < 0.0):
                raise ValueError("known_sequence standard deviations must be >= 0")
            object.__setattr__(self, "sigma_t", arr)
        elif self.kind == "case1":
            if self.sigma is None or not 0.0 < self.sigma < 1.0:
                raise ValueError(f"case1 needs sigma in (0, 1), got {self.sigma}")
        else:
            # sigma may stay None for case2 when the scale is left to inference
            if self.sigma is not None and not self.sigma > 0.0:
                raise ValueError(f"case2 needs sigma > 0, got {self.sigma}")

    @classmethod
    def known(cls, sigma_t) -> "NoiseModel":
        return cls(kind="known_sequence", sigma_t=np.asarray(sigma_t, dtype=float))

    @classmethod
    def case1(cls, sigma: float) -> "NoiseModel":
        return cls(kind="case1", sigma=float(sigma))

    @classmethod
    def case2(cls, sigma: float) -> "NoiseModel":
        return cls(kind="case2", sigma=float(sigma))


def sigma_sequence(noise: NoiseModel, traj: Trajectory, T: int | None = None) -> np.ndarray:
    """Per-day standard deviations sigma_1..sigma_T for the given trajectory."""
    horizon = traj.horizon
    if T is None:
        T = horizon
    if T < 1 or T > horizon:
        raise InsufficientDataError(f"T must lie in [1, {horizon}], got {T}")
    n = traj.init.population
    if noise.kind == "known_sequence":
        if len(noise.sigma_t) < T:
            raise InsufficientDataError(
                f"known_sequence provides {len(noise.sigma_t)} days, need {T}"
            )
        return np.asarray(noise.sigma_t[:T], dtype=float)
    if noise.kind == "case1":
        return np.full(T, n * noise.sigma)
    if noise.sigma is None:
        raise DegenerateVarianceError("case2 noise has no sigma; it was left to inference")
    it = traj.i[1 : T + 1]
    if np.any(it <= 0.0):
        bad = int(np.flatnonzero(it <= 0.0)[0]) + 1
        raise DegenerateVarianceError(f"case2 needs i_t > 0; i_{bad} = {it[bad - 1]}")
    return n * noise.sigma * it


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def replicate_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-replicate seed, independent of execution order."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


@dataclass(frozen=True)
class ObservationSeries:
    """Observed counts Y_1..Y_T plus everything needed to reproduce them."""

    values: np.ndarray
    reporting_rate: float
    noise: NoiseModel
    seed: int
    sigma_t: np.ndarray
    population: int

    def __len__(self) -> int:
        return len(self.values)

    def to_csv(self, path, sidecar_path=None) -> None:
        write_observations_csv(self, path, sidecar_path)


def observe(traj: Trajectory, noise: NoiseModel, p: float, T: int, seed: int) -> ObservationSeries:
    """Draw one noisy series of daily observations from a trajectory."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"reporting rate must lie in (0, 1], got {p}")
    if T > traj.horizon:
        raise InsufficientDataError(
            f"T = {T} exceeds the trajectory horizon of {traj.horizon} days"
        )
    sig = sigma_sequence(noise, traj, T)
    mean = p * incidence(traj).values[:T]
    z = _generator(int(seed)).standard_normal(T)
    return ObservationSeries(
        values=mean + sig * z,
        reporting_rate=p,
        noise=noise,
        seed=int(seed),
        sigma_t=sig,
        population=traj.init.population,
    )


def observe_batch(traj: Trajectory, noise: NoiseModel, p: float, T: int,
                  seed: int, replicates: int) -> np.ndarray:
    """Matrix of ``replicates`` observation rows; row r uses replicate_seed(seed, r).

    Equivalent to stacking observe() calls with those seeds, kept separate so
    Monte Carlo loops avoid per-replicate object overhead.
    """
    if T > traj.horizon:
        raise InsufficientDataError(
            f"T = {T} exceeds the trajectory horizon of {traj.horizon} days"
        )
    sig = sigma_sequence(noise, traj, T)
    mean = p * incidence(traj).values[:T]
    out = np.empty((replicates, T))
    for r in range(replicates):
        gen = np.random.Generator(np.random.Philox(replicate_seed(seed, r)))
        out[r] = mean + sig * gen.standard_normal(T)
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_observations_csv(obs: ObservationSeries, path, sidecar_path=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,y\n")
        for t, y in enumerate(obs.values, start=1):
            fh.write(f"{t},{_fmt(y)}\n")
    if sidecar_path is not None:
        meta = {
            "reporting_rate": obs.reporting_rate,
            "noise_kind": obs.noise.kind,
            "sigma": obs.noise.sigma,
            "population": obs.population,
            "seed": obs.seed,
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
