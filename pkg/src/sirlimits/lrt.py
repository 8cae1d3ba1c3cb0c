"""Likelihood-ratio testing between nearby SIR parameter values.

The simple test compares theta_0 against its perturbation theta_eps(omega)
from daily observations Y_1..Y_T. Under Gaussian noise with a fixed variance
sequence the likelihood-ratio statistic is Gaussian under both hypotheses and
everything reduces to the signal-to-noise functional

    V_T = sum_t p^2 * (delta_eps_t - delta0_t)^2 / sigma_t^2,

giving an exact type II error 1 - Phi(Phi^{-1}(alpha) + sqrt(V_T)) for the
level-alpha most powerful test. Replacing the incidences by their frozen-s
closed forms yields two computable approximations whose worst case over
directions sits near omega = pi/4 and 5*pi/4; with infection-proportional
noise the pi/4 value collapses to a formula free of the population size and
of the SIR rates, and inverts in closed form for the detectable perturbation
size at a target power.

Exact formulas use numerically integrated incidences; the closed-form
approximations use the frozen-s incidences, including the pre-peak
substitute i_t = exp(delta * t) * i0 inside infection-proportional noise.
The noise sequence sigma_t is always materialized from the null-parameter
trajectory, and the same sequence drives both hypotheses and the Monte Carlo
simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndistinguishableHypothesesError,
    InsufficientDataError,
    NoDetectablePerturbationError,
    PerturbationTooLargeError,
)
from .gaussian import norm_cdf, norm_ppf
from .perturb import Perturbation
from .simulate import NoiseModel, ObservationSeries, replicate_seed, sigma_sequence
from .sir import (
    InitialCondition,
    SirParams,
    incidence,
    integrate_exact,
    peak_time_for,
)


@dataclass(frozen=True)
class TestSpec:
    """A fully specified simple hypothesis test on daily observations."""

    __test__ = False  # not a pytest class, despite the name

    null_params: SirParams
    pert: Perturbation
    alpha: float
    T: int
    p: float
    noise: NoiseModel
    init: InitialCondition
    steps_per_day: int = 50

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"reporting rate must lie in (0, 1], got {self.p}")
        if self.pert.base != self.null_params:
            raise ValueError("perturbation must be anchored at the null parameters")
        t_star = peak_time_for(self.null_params, self.init, self.steps_per_day)
        if self.T >= t_star:
            raise ValueError(
                f"T = {self.T} must precede the null peak time {t_star:.2f}"
            )
        object.__setattr__(self, "_t_star", t_star)

    @property
    def t_star(self) -> float:
        return self._t_star

    def alternative_params(self) -> SirParams:
        return self.pert.perturbed()


def _materialize(spec: TestSpec):
    """Null/alternative incidences and the sigma_t sequence (from the null)."""
    null_traj = integrate_exact(spec.null_params, spec.init, spec.T, spec.steps_per_day)
    alt_traj = integrate_exact(spec.alternative_params(), spec.init, spec.T, spec.steps_per_day)
    sigma = sigma_sequence(spec.noise, null_traj, spec.T)
    return incidence(null_traj).values, incidence(alt_traj).values, sigma


def v_statistic(spec: TestSpec) -> float:
    """Signal-to-noise functional V_T from exact incidences."""
    d0, de, sigma = _materialize(spec)
    return float(np.sum((spec.p * (de - d0)) ** 2 / sigma**2))


@dataclass(frozen=True)
class LrtDecision:
    log_lr: float
    threshold: float
    reject: bool


def lrt_threshold(spec: TestSpec) -> float:
    """log eta calibrated so the type I error equals alpha exactly."""
    v = v_statistic(spec)
    if v <= 0.0:
        raise IndistinguishableHypothesesError(
            "V_T = 0: the hypotheses produce identical observation distributions"
        )
    root = math.sqrt(v)
    return -norm_ppf(spec.alpha) * root - 0.5 * v


def lrt_decide(obs: ObservationSeries, spec: TestSpec) -> LrtDecision:
    """Evaluate the log likelihood ratio of the observations and decide."""
    y = np.asarray(obs.values, dtype=float)
    if len(y) < spec.T:
        raise InsufficientDataError(
            f"observations cover {len(y)} days, need T = {spec.T}"
        )
    y = y[: spec.T]
    d0, de, sigma = _materialize(spec)
    log_lr = float(
        np.sum(((y - spec.p * d0) ** 2 - (y - spec.p * de) ** 2) / (2.0 * sigma**2))
    )
    threshold = lrt_threshold(spec)
    return LrtDecision(log_lr=log_lr, threshold=threshold, reject=log_lr >= threshold)


def type2_exact(spec: TestSpec) -> float:
    """Exact Gaussian type II error of the level-alpha LRT."""
    v = v_statistic(spec)
    if v <= 0.0:
        raise IndistinguishableHypothesesError(
            "V_T = 0: the hypotheses produce identical observation distributions"
        )
    return 1.0 - norm_cdf(norm_ppf(spec.alpha) + math.sqrt(v))


def _approx_weights(spec: TestSpec, days: np.ndarray) -> tuple[np.ndarray, float]:
    """Terms of the closed-form argument: per-day weights w_t and a prefactor c
    so that the Phi argument is Phi^{-1}(alpha) + c * sqrt(sum w_t * bracket_t^2).

    For infection-proportional noise the substitute sigma_t = N*sigma*i0*e^{delta t}
    cancels the growth and the population algebraically, leaving w_t = 1 and
    c = p/sigma; doing the cancellation here keeps the value genuinely
    independent of N and i0 instead of merely approximately so.
    """
    n = spec.init.population
    noise = spec.noise
    delta = spec.null_params.delta()
    if noise.kind == "known_sequence":
        sigma = np.asarray(noise.sigma_t[: spec.T], dtype=float)
        return np.exp(2.0 * delta * days) / sigma**2, spec.p * n * spec.init.i0
    if noise.kind == "case1":
        return np.exp(2.0 * delta * days), spec.p * spec.init.i0 / noise.sigma
    return np.ones_like(days), spec.p / noise.sigma


def _approx_bracket(spec: TestSpec, days: np.ndarray, variant: str) -> np.ndarray:
    beta = spec.null_params.beta
    delta = spec.null_params.delta()
    eps = spec.pert.epsilon
    omega = spec.pert.omega
    f = math.cos(omega) - math.sin(omega)
    beta_e = beta + eps * math.cos(omega)
    delta_e = delta + eps * f
    if delta_e <= 0.0:
        raise PerturbationTooLargeError(
            f"perturbed delta is {delta_e:.6g} <= 0 at omega = {omega:.6g}"
        )
    shift = np.exp(eps * f * days)
    if variant == "first":
        return beta_e * ((1.0 - math.exp(-delta_e)) / delta_e) * shift - beta * (
            (1.0 - math.exp(-delta)) / delta
        )
    if variant == "second":
        return beta_e * shift - beta
    raise ValueError(f"variant must be 'first' or 'second', got {variant!r}")


def type2_approx(spec: TestSpec, variant: str = "first") -> float:
    """Closed-form type II error based on the frozen-s incidences.

    ``variant="first"`` keeps the exact one-day increment factors of the
    closed-form incidence; ``variant="second"`` further approximates them
    away, which makes the pi/4 case collapse to the fully explicit formula.
    """
    days = np.arange(1.0, spec.T + 1.0)
    weights, prefactor = _approx_weights(spec, days)
    bracket = _approx_bracket(spec, days, variant)
    arg = norm_ppf(spec.alpha) + prefactor * math.sqrt(float(np.sum(weights * bracket**2)))
    return 1.0 - norm_cdf(arg)


def case2_pi4_type2(alpha: float, epsilon: float, sigma: float, p: float, T: int) -> float:
    """Fully explicit slope-one-direction type II error under
    infection-proportional noise: free of N, beta, and gamma."""
    return 1.0 - norm_cdf(norm_ppf(alpha) + p * epsilon * math.sqrt(T) / (sigma * math.sqrt(2.0)))


def worst_case_direction(null_params: SirParams, init: InitialCondition,
                         epsilon: float, alpha: float, T: int, p: float,
                         noise: NoiseModel, n_angles: int = 150,
                         omegas=None, variant: str = "first",
                         steps_per_day: int = 50) -> tuple[float, float]:
    """Direction maximizing the closed-form type II error over an angle grid.

    Angles whose perturbed delta would be non-positive are skipped; they are
    maximally distinguishable and cannot attain the supremum.
    """
    if omegas is None:
        omegas = np.linspace(0.0, 2.0 * math.pi, int(n_angles), endpoint=False)
    omegas = np.asarray(omegas, dtype=float)
    best_omega = None
    best_value = -math.inf
    for omega in omegas:
        try:
            spec = TestSpec(
                null_params=null_params,
                pert=Perturbation(null_params, epsilon, float(omega)),
                alpha=alpha, T=T, p=p, noise=noise, init=init,
                steps_per_day=steps_per_day,
            )
            value = type2_approx(spec, variant)
        except PerturbationTooLargeError:
            continue
        if value > best_value:
            best_value = value
            best_omega = float(omega)
    if best_omega is None:
        raise PerturbationTooLargeError("no grid angle admits a valid perturbation")
    return best_omega, best_value


def epsilon_for_power(target_type2: float, alpha: float, sigma: float,
                      p: float, T: int, delta: float) -> float:
    """Perturbation size whose slope-one test has the target type II error.

    Inverts the first closed form at omega = pi/4 under infection-proportional
    noise. Targets at or above 1 - alpha are unattainable (any valid test
    already achieves that much), so they are rejected.
    """
    if not 0.0 < target_type2 < 1.0 or not 0.0 < alpha < 1.0:
        raise ValueError("target_type2 and alpha must lie in (0, 1)")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if target_type2 >= 1.0 - alpha:
        raise NoDetectablePerturbationError(
            f"target type II {target_type2} >= 1 - alpha = {1.0 - alpha}: implied epsilon <= 0"
        )
    numer = (norm_ppf(1.0 - target_type2) - norm_ppf(alpha)) * sigma * delta * math.exp(delta) * math.sqrt(2.0)
    denom = (math.exp(delta) - 1.0) * p * math.sqrt(T)
    return numer / denom


@dataclass(frozen=True)
class GammaTestResult:
    """Power of the recovery-rate test at known growth rate delta.

    Testing gamma_0 against gamma_0 + eps_hat on the slope-one line is the
    same as the two-parameter test with epsilon = |eps_hat| * sqrt(2) at
    omega = pi/4 (eps_hat > 0) or 5*pi/4 (eps_hat < 0).
    """

    type2: float
    epsilon: float
    omega: float


def gamma_test_power(epsilon_hat: float, alpha: float, sigma: float,
                     p: float, T: int) -> GammaTestResult:
    if epsilon_hat == 0.0:
        raise IndistinguishableHypothesesError("epsilon_hat = 0 leaves nothing to test")
    type2 = 1.0 - norm_cdf(norm_ppf(alpha) + p * abs(epsilon_hat) * math.sqrt(T) / sigma)
    omega = math.pi / 4.0 if epsilon_hat > 0.0 else 5.0 * math.pi / 4.0
    return GammaTestResult(type2=type2, epsilon=abs(epsilon_hat) * math.sqrt(2.0), omega=omega)


@dataclass(frozen=True)
class EmpiricalRate:
    """A Monte Carlo error-rate estimate with its binomial standard error."""

    value: float
    stderr: float
    replicates: int


def _simulate_log_lr(spec: TestSpec, replicates: int, seed: int, under_alternative: bool):
    d0, de, sigma = _materialize(spec)
    mean = spec.p * (de if under_alternative else d0)
    w = spec.p * (de - d0) / sigma**2
    const = float(np.sum(((mean - spec.p * d0) ** 2 - (mean - spec.p * de) ** 2) / (2.0 * sigma**2)))
    v = float(np.sum((spec.p * (de - d0)) ** 2 / sigma**2))
    if v <= 0.0:
        raise IndistinguishableHypothesesError("V_T = 0: hypotheses are indistinguishable")
    out = np.empty(replicates)
    for r in range(replicates):
        gen = np.random.Generator(np.random.Philox(replicate_seed(seed, r)))
        xi = sigma * gen.standard_normal(spec.T)
        out[r] = const + float(np.dot(w, xi))
    threshold = -norm_ppf(spec.alpha) * math.sqrt(v) - 0.5 * v
    return out, threshold


def empirical_type2(spec: TestSpec, replicates: int, seed: int) -> EmpiricalRate:
    """Monte Carlo type II error: data under the alternative, LRT at level alpha."""
    if replicates < 100:
        raise ValueError(f"need at least 100 replicates, got {replicates}")
    log_lr, threshold = _simulate_log_lr(spec, replicates, seed, under_alternative=True)
    fails = float(np.mean(log_lr < threshold))
    return EmpiricalRate(
        value=fails,
        stderr=math.sqrt(max(fails * (1.0 - fails), 1e-12) / replicates),
        replicates=replicates,
    )


def empirical_type1(spec: TestSpec, replicates: int, seed: int) -> EmpiricalRate:
    """Monte Carlo type I error: data under the null, LRT at level alpha."""
    if replicates < 100:
        raise ValueError(f"need at least 100 replicates, got {replicates}")
    log_lr, threshold = _simulate_log_lr(spec, replicates, seed, under_alternative=False)
    rejects = float(np.mean(log_lr >= threshold))
    return EmpiricalRate(
        value=rejects,
        stderr=math.sqrt(max(rejects * (1.0 - rejects), 1e-12) / replicates),
        replicates=replicates,
    )


@dataclass(frozen=True)
class PowerResult:
    """All type II error views of one test specification."""

    type2_exact: float
    type2_approx1: float
    type2_approx2: float
    v_T: float
    type2_empirical: float | None = None
    empirical_stderr: float | None = None


def power_summary(spec: TestSpec, replicates: int | None = None,
                  seed: int = 0) -> PowerResult:
    emp = stderr = None
    if replicates is not None:
        rate = empirical_type2(spec, replicates, seed)
        emp, stderr = rate.value, rate.stderr
    return PowerResult(
        type2_exact=type2_exact(spec),
        type2_approx1=type2_approx(spec, "first"),
        type2_approx2=type2_approx(spec, "second"),
        v_T=v_statistic(spec),
        type2_empirical=emp,
        empirical_stderr=stderr,
    )


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def write_power_csv(rows, path) -> None:
    """rows: iterables of (omega, epsilon, sigma, PowerResult)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "omega,epsilon,sigma,type2_exact,type2_approx1,type2_approx2,"
            "type2_empirical,stderr\n"
        )
        for omega, epsilon, sigma, res in rows:
            fh.write(
                f"{_fmt(omega)},{_fmt(epsilon)},{_fmt(sigma)},{_fmt(res.type2_exact)},"
                f"{_fmt(res.type2_approx1)},{_fmt(res.type2_approx2)},"
                f"{_fmt(res.type2_empirical)},{_fmt(res.empirical_stderr)}\n"
            )
