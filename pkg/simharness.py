"""
Monte-Carlo harness: data generators, replicate RNG streams and experiment runners.

Every replicate draws from its own Philox (counter-based) stream keyed by
(seed, run_index) through numpy's SeedSequence, so serial and parallel runs
produce identical results and any replicate can be regenerated in isolation.

Generators draw one uniform per variate: Normal and Laplace variates use the
inverse CDF, the extremal null laws are inverse-CDF mixtures of atoms and
uniforms. Beta variates come from numpy's Gamma-ratio sampler.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special
from tqdm import tqdm

from eprocess import (
    DEFAULT_C,
    DEFAULT_CAP,
    DEFAULT_GRID,
    Agrapa,
    BettingStrategy,
    EGree,
    EMixture,
    Grapa,
    run_eprocess,
)
from evidence import Hypothesis, MeanVarSpec, ShapeClass, TwoSided, p_value
from pcombine import e_batch, fisher_combine, p_batch, simes_combine

logger = logging.getLogger(__name__)

# Keeps inverse CDFs finite when the uniform draw is exactly 0
U_EPS = 2.0**-54

RESULT_COLUMNS = ("method", "shape", "generator", "param", "n", "runs", "threshold", "rate", "se")


def replicate_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent Philox stream for one replicate."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(sequence))


def _uniforms(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.clip(rng.random(n), U_EPS, 1.0 - U_EPS)


def _fmt(value: float) -> str:
    return format(value, ".12g")


@dataclass(frozen=True)
class NL:
    """Normal at odd positions, Laplace at even positions, common mean and variance."""

    nu: float
    eta2: float

    def __post_init__(self):
        if not self.eta2 > 0:
            raise ValueError(f"NL variance must be positive, got {self.eta2}")

    name = "nl"

    @property
    def param(self) -> str:
        return f"{_fmt(self.nu)},{_fmt(self.eta2)}"

    @property
    def mean(self) -> float:
        return self.nu

    @property
    def variance(self) -> float:
        return self.eta2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return gen_nl(self.nu, self.eta2, n, rng)


@dataclass(frozen=True)
class BetaMV:
    """Beta law parameterised by its mean and variance."""

    nu: float
    sigma2: float

    def __post_init__(self):
        beta_params(self.nu, self.sigma2)

    name = "beta"

    @property
    def param(self) -> str:
        return f"{_fmt(self.nu)},{_fmt(self.sigma2)}"

    @property
    def mean(self) -> float:
        return self.nu

    @property
    def variance(self) -> float:
        return self.sigma2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        a, b = beta_params(self.nu, self.sigma2)
        return rng.beta(a, b, size=n)


@dataclass(frozen=True)
class ExtremalPlain:
    """Two atoms attaining Cantelli's bound at level alpha (mean 0, variance 1)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    name = "extremal-plain"

    @property
    def param(self) -> str:
        return _fmt(self.alpha)

    mean = 0.0
    variance = 1.0

    @property
    def atoms(self) -> Tuple[float, float]:
        a = self.alpha
        return math.sqrt((1.0 - a) / a), -math.sqrt(a / (1.0 - a))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        high, low = self.atoms
        return np.where(_uniforms(n, rng) < self.alpha, high, low)


@dataclass(frozen=True)
class ExtremalSymmetric:
    """Atoms at +-(2 alpha)^(-1/2) with mass alpha each and at 0 with mass 1 - 2 alpha."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2], got {self.alpha}")

    name = "extremal-symmetric"

    @property
    def param(self) -> str:
        return _fmt(self.alpha)

    mean = 0.0
    variance = 1.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        s = (2.0 * self.alpha) ** -0.5
        u = _uniforms(n, rng)
        return np.where(u < self.alpha, s, np.where(u < 2.0 * self.alpha, -s, 0.0))


@dataclass(frozen=True)
class ExtremalUnimodal:
    """
    Atom at -a with mass p plus a uniform density on [-a, b] (mean 0, variance 1).

    Zero mean forces b = a (1 + p) / (1 - p); the uniform part has second moment
    (a^2 - a b + b^2) / 3, so unit variance gives p = (3 - a^2) / (3 (1 + a^2)).
    As a -> 0 the e-value mean E[X_+^2] = (1 - p) b^3 / (3 (a + b)) approaches 1.
    """

    a: float

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")

    name = "extremal-unimodal"

    @property
    def param(self) -> str:
        return _fmt(self.a)

    mean = 0.0
    variance = 1.0

    @property
    def shape_params(self) -> Tuple[float, float]:
        a2 = self.a * self.a
        p = (3.0 - a2) / (3.0 * (1.0 + a2))
        return p, self.a * (1.0 + p) / (1.0 - p)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p, b = self.shape_params
        u = _uniforms(n, rng)
        spread = -self.a + (b + self.a) * (u - p) / (1.0 - p)
        return np.where(u < p, -self.a, spread)


@dataclass(frozen=True)
class ExtremalUS:
    """Atom at 0 with mass 1 - 2p plus a uniform on [-b, b], b = sqrt(3) (2p)^(-1/2)."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 0.5:
            raise ValueError(f"p must lie in (0, 1/2], got {self.p}")

    name = "extremal-us"

    @property
    def param(self) -> str:
        return _fmt(self.p)

    mean = 0.0
    variance = 1.0

    @property
    def half_width(self) -> float:
        return math.sqrt(3.0) * (2.0 * self.p) ** -0.5

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        b = self.half_width
        u = _uniforms(n, rng)
        mass = 2.0 * self.p
        return np.where(u < mass, -b + 2.0 * b * u / mass, 0.0)


@dataclass(frozen=True)
class RegimeShift:
    """Draws from pre for the first break_index points and from post afterwards."""

    pre: "Generator"
    post: "Generator"
    break_index: int

    def __post_init__(self):
        if self.break_index < 0:
            raise ValueError(f"break_index must be nonnegative, got {self.break_index}")

    name = "regime"

    @property
    def param(self) -> str:
        return f"{self.break_index}:{self.pre.name}({self.pre.param})>{self.post.name}({self.post.param})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        head = min(self.break_index, n)
        return np.concatenate([self.pre.sample(head, rng), self.post.sample(n - head, rng)])


Generator = Union[NL, BetaMV, ExtremalPlain, ExtremalSymmetric, ExtremalUnimodal, ExtremalUS, RegimeShift]

EXTREMAL_KINDS = (ExtremalPlain, ExtremalSymmetric, ExtremalUnimodal, ExtremalUS)


def gen_nl(nu: float, eta2: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Alternating Normal(nu, eta2) / Laplace(nu, eta2) sequence, starting with Normal."""
    if not eta2 > 0:
        raise ValueError(f"eta2 must be positive, got {eta2}")
    eta = math.sqrt(eta2)
    u = _uniforms(n, rng)
    normal = nu + eta * special.ndtri(u)
    # Laplace scale b = eta / sqrt(2) gives variance 2 b^2 = eta^2
    centred = u - 0.5
    laplace = nu - (eta / math.sqrt(2.0)) * np.sign(centred) * np.log1p(-2.0 * np.abs(centred))
    return np.where(np.arange(n) % 2 == 0, normal, laplace)


def beta_params(nu: float, sigma2: float) -> Tuple[float, float]:
    """Standard (alpha, beta) of the Beta law with mean nu and variance sigma2."""
    if not 0.0 < nu < 1.0:
        raise ValueError(f"Beta mean must lie in (0, 1), got {nu}")
    if not 0.0 < sigma2 < nu * (1.0 - nu):
        raise ValueError(f"Beta variance must lie in (0, nu(1-nu)) = (0, {nu * (1 - nu)}), got {sigma2}")
    alpha = nu * (nu - nu * nu - sigma2) / sigma2
    beta = (nu * nu + sigma2 - nu) * (nu - 1.0) / sigma2
    return alpha, beta


def gen_extremal(kind: Generator, n: int, rng: np.random.Generator) -> np.ndarray:
    if not isinstance(kind, EXTREMAL_KINDS):
        raise ValueError(f"{type(kind).__name__} is not an extremal null law")
    return kind.sample(n, rng)


def parse_generator(text: str) -> Generator:
    """
    Parse a generator spec such as ``nl:0.5,2`` or ``extremal-us:0.25``.

    Raises:
        ValueError: For unknown names or malformed parameters
    """
    name, _, params = text.strip().partition(":")
    try:
        values = [float(v) for v in params.split(",")] if params else []
    except ValueError:
        raise ValueError(f"malformed generator parameters in {text!r}") from None

    builders = {
        "nl": (NL, 2),
        "beta": (BetaMV, 2),
        "extremal-plain": (ExtremalPlain, 1),
        "extremal-symmetric": (ExtremalSymmetric, 1),
        "extremal-unimodal": (ExtremalUnimodal, 1),
        "extremal-us": (ExtremalUS, 1),
    }
    if name.lower() not in builders:
        raise ValueError(f"unknown generator {name!r}; expected one of {', '.join(builders)}")
    cls, arity = builders[name.lower()]
    if len(values) != arity:
        raise ValueError(f"generator {name!r} takes {arity} parameter(s), got {len(values)}")
    return cls(*values)


class Method(str, Enum):
    EMIXTURE = "emixture"
    EGREE = "egree"
    PFISHER = "pfisher"
    PSIMES = "psimes"
    EBATCH = "ebatch"
    PBATCH = "pbatch"
    GRAPA = "grapa"
    AGRAPA = "agrapa"
    EGREE_2S = "egree2s"
    EMIXTURE_2S = "emixture2s"

    @property
    def is_eprocess(self) -> bool:
        return self not in (Method.PFISHER, Method.PSIMES, Method.EBATCH, Method.PBATCH)


class DecisionRule(str, Enum):
    """When an e-process replicate counts as a rejection."""

    # sup_t M_t >= threshold, valid at any stopping time
    RUNNING_MAX = "running-max"
    # M_n >= threshold at the fixed horizon n
    FINAL = "final"


@dataclass(frozen=True)
class SimConfig:
    generator: Generator
    n: int
    runs: int
    threshold: float
    seed: int
    method: Method
    hypothesis: Hypothesis
    grid: Tuple[float, ...] = DEFAULT_GRID
    cap: float = DEFAULT_CAP
    c: float = DEFAULT_C
    grapa_one_sided: bool = False
    decision: DecisionRule = DecisionRule.RUNNING_MAX

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if not self.threshold > 1:
            raise ValueError(f"threshold must exceed 1, got {self.threshold}")
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "decision", DecisionRule(self.decision))


@dataclass(frozen=True)
class ExperimentResult:
    rejection_rate: float
    standard_error: float
    avg_log_trajectory: Optional[Tuple[float, ...]] = None


@dataclass
class RunOutcome:
    rejected: bool
    # wealth path M_1..M_n for e-process methods
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)


def strategy_for(config: SimConfig) -> BettingStrategy:
    method = config.method
    if method in (Method.EMIXTURE, Method.EMIXTURE_2S):
        return EMixture(grid=config.grid)
    if method in (Method.EGREE, Method.EGREE_2S):
        return EGree(cap=config.cap)
    if method is Method.GRAPA:
        return Grapa(c=config.c, exact=True, one_sided=config.grapa_one_sided)
    if method is Method.AGRAPA:
        return Agrapa(c=config.c, one_sided=config.grapa_one_sided)
    raise ValueError(f"{method.value} is not an e-process method")


def hypothesis_for(config: SimConfig) -> Hypothesis:
    """Two-sided methods test E[X] = mu unless an interval is already configured."""
    hypothesis = config.hypothesis
    if config.method in (Method.EGREE_2S, Method.EMIXTURE_2S):
        if hypothesis.is_two_sided:
            return hypothesis
        mu = hypothesis.spec.mu
        return Hypothesis(hypothesis.spec, ShapeClass.PLAIN, TwoSided(mu, mu))
    if hypothesis.is_two_sided and config.method in (Method.GRAPA, Method.AGRAPA):
        return Hypothesis(hypothesis.spec, hypothesis.shape)
    return hypothesis


def simulate_run(config: SimConfig, run_index: int) -> RunOutcome:
    """Generate one replicate and apply the configured decision rule."""
    rng = replicate_rng(config.seed, run_index)
    xs = config.generator.sample(config.n, rng)
    method = config.method
    hypothesis = hypothesis_for(config)
    spec, shape = hypothesis.spec, hypothesis.shape

    if method.is_eprocess:
        state = run_eprocess(xs, hypothesis, strategy_for(config))
        trajectory = np.asarray(state.trajectory)
        wealth = trajectory[-1] if config.decision is DecisionRule.FINAL else trajectory.max()
        return RunOutcome(rejected=bool(wealth >= config.threshold), trajectory=trajectory)

    alpha = 1.0 / config.threshold
    if method is Method.EBATCH:
        return RunOutcome(rejected=e_batch(xs, spec, shape) >= config.threshold)
    if method is Method.PBATCH:
        return RunOutcome(rejected=p_batch(xs, spec, shape) <= alpha)

    ps = [p_value(z, shape) for z in (xs - spec.mu) / spec.sigma]
    combined = fisher_combine(ps) if method is Method.PFISHER else simes_combine(ps)
    return RunOutcome(rejected=combined <= alpha)


def _run_batch(config: SimConfig, indices: Sequence[int]) -> List[RunOutcome]:
    return [simulate_run(config, i) for i in indices]


def simulate_runs(
    config: SimConfig, jobs: int = 1, progress: bool = False, batch_size: int = 50
) -> List[RunOutcome]:
    """Run all replicates, in run-index order regardless of how they were scheduled."""
    logger.info(
        "simulating %s on %s(%s): n=%d runs=%d jobs=%d",
        config.method.value,
        config.generator.name,
        config.generator.param,
        config.n,
        config.runs,
        jobs,
    )
    if jobs <= 1:
        indices = range(config.runs)
        if progress:
            indices = tqdm(indices, desc=config.method.value, unit="runs")
        return [simulate_run(config, i) for i in indices]

    batches = [
        list(range(start, min(start + batch_size, config.runs)))
        for start in range(0, config.runs, batch_size)
    ]
    outcomes: List[Optional[RunOutcome]] = [None] * config.runs

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        futures = {executor.submit(_run_batch, config, batch): batch for batch in batches}
        with tqdm(total=config.runs, desc=config.method.value, unit="runs", disable=not progress) as pbar:
            for future in as_completed(futures):
                batch = futures[future]
                for index, outcome in zip(batch, future.result()):
                    outcomes[index] = outcome
                pbar.update(len(batch))

    return outcomes


def _summarise(outcomes: Sequence[RunOutcome]) -> Tuple[float, float]:
    runs = len(outcomes)
    rate = sum(o.rejected for o in outcomes) / runs
    return rate, math.sqrt(rate * (1.0 - rate) / runs)


def run_rejection_experiment(config: SimConfig, jobs: int = 1, progress: bool = False) -> ExperimentResult:
    """
    Fraction of replicates rejecting the null.

    E-process methods reject when max_t M_t >= threshold, or when the final
    wealth M_n does under DecisionRule.FINAL. E-batch rejects when its e-value
    reaches the threshold, p-methods when the combined p-value is at most
    1 / threshold.
    """
    outcomes = simulate_runs(config, jobs=jobs, progress=progress)
    rate, se = _summarise(outcomes)
    return ExperimentResult(rejection_rate=rate, standard_error=se)


def run_avg_log_trajectory(config: SimConfig, jobs: int = 1, progress: bool = False) -> ExperimentResult:
    """Monte-Carlo mean of log M_t for t = 1..n, alongside the rejection rate."""
    if not config.method.is_eprocess:
        raise ValueError(f"{config.method.value} does not produce an e-process trajectory")
    outcomes = simulate_runs(config, jobs=jobs, progress=progress)
    rate, se = _summarise(outcomes)
    with np.errstate(divide="ignore"):
        logs = np.log(np.vstack([o.trajectory for o in outcomes]))
    return ExperimentResult(
        rejection_rate=rate,
        standard_error=se,
        avg_log_trajectory=tuple(float(v) for v in logs.mean(axis=0)),
    )


def run_power_curve(
    config: SimConfig, generators: Sequence[Generator], jobs: int = 1, progress: bool = False
) -> List[Tuple[Generator, ExperimentResult]]:
    """Rejection rates of one method across a sweep of alternatives."""
    results = []
    for generator in generators:
        swept = SimConfig(**{**vars(config), "generator": generator})
        results.append((generator, run_rejection_experiment(swept, jobs=jobs, progress=progress)))
    return results


def result_row(config: SimConfig, result: ExperimentResult) -> dict:
    return {
        "method": config.method.value,
        "shape": config.hypothesis.shape.value,
        "generator": config.generator.name,
        "param": config.generator.param,
        "n": config.n,
        "runs": config.runs,
        "threshold": config.threshold,
        "rate": result.rejection_rate,
        "se": result.standard_error,
    }
