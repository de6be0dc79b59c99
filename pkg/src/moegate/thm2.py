"""One-bit gating over a binary symmetric channel.

Each Monte Carlo dataset is scored against a finite grid of candidate
crossover probabilities; a tempered posterior over the grid picks one
candidate ``p_W``. Its population risk is ``p_W`` and its gating rate is
``ln 2 - h(p_W)``, so the closed-form distortion-rate curve gives
``D(R_g)`` directly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._seeding import task_rng
from ._validation import DomainError
from .info import LN2, binary_entropy
from .rd import bsc_distortion_rate
from .thm1 import info_sw_exact

CSV_HEADER = (
    "p_true", "mean_pop_risk", "mean_rate_nats", "mean_D_at_rate", "mean_info_sw_nats",
    "mean_bound", "violation_flag",
)
SAMPLES_HEADER = ("p_true", "mc_index", "w_index", "p_w", "rate_nats", "d_at_rate")
BOUND_ORDERS = ("mean-of-d", "d-of-mean")
MC_SIGMAS = 3.0


def default_p_grid() -> tuple[float, ...]:
    return tuple(round(0.05 * i, 10) for i in range(1, 10))


def _check_open_half(values, name):
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError(f"{name} is empty")
    for v in values:
        if not 0.0 < v < 0.5:
            raise ValueError(f"{name} entries must lie strictly inside (0, 0.5), got {v}")
    return values


@dataclass(frozen=True)
class BscConfig:
    p_true_grid: tuple[float, ...] = field(default_factory=default_p_grid)
    candidate_ps: tuple[float, ...] = field(default_factory=default_p_grid)
    m: int = 200
    n_mc: int = 400
    beta: float = 1.0
    root_seed: int = 42
    bound_order: str = "mean-of-d"

    def __post_init__(self):
        object.__setattr__(self, "p_true_grid", _check_open_half(self.p_true_grid, "p_true_grid"))
        object.__setattr__(self, "candidate_ps", _check_open_half(self.candidate_ps, "candidate_ps"))
        if self.m < 1 or self.n_mc < 1:
            raise ValueError("m and n_mc must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")
        if self.bound_order not in BOUND_ORDERS:
            raise ValueError(f"bound_order must be one of {BOUND_ORDERS}")


@dataclass(frozen=True)
class BscDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int8)
        y = np.asarray(self.y, dtype=np.int8)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D and of equal length")
        if not (np.all((x == 0) | (x == 1)) and np.all((y == 0) | (y == 1))):
            raise ValueError("BSC samples must be bits")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n_flips(self) -> int:
        return int(np.count_nonzero(self.x != self.y))


@dataclass(frozen=True)
class BscSample:
    p_true: float
    mc_index: int
    w_index: int
    p_w: float
    rate: float
    d_at_rate: float
    posterior: np.ndarray = field(repr=False)


@dataclass
class Thm2Row:
    p_true: float
    mean_pop_risk: float
    mean_rate_nats: float
    mean_D_at_rate: float
    mean_info_sw: float
    mean_bound: float
    risk_se: float = 0.0
    samples: list[BscSample] = field(default_factory=list, repr=False)

    @property
    def violation(self) -> bool:
        return self.mean_pop_risk > self.mean_bound + MC_SIGMAS * self.risk_se

    def as_csv_row(self):
        return (
            self.p_true, self.mean_pop_risk, self.mean_rate_nats, self.mean_D_at_rate,
            self.mean_info_sw, self.mean_bound, self.violation,
        )


def generate_bsc_dataset(p_true: float, m: int, rng: np.random.Generator) -> BscDataset:
    """Fair input bits ``x`` and outputs ``y = x xor z`` with ``z ~ Bernoulli(p_true)``."""
    if not 0.0 < p_true < 0.5:
        raise DomainError(f"p_true must lie in (0, 0.5), got {p_true!r}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    x = rng.integers(0, 2, size=m, dtype=np.int8)
    z = (rng.random(m) < p_true).astype(np.int8)
    return BscDataset(x, x ^ z)


def bsc_loglik(data: BscDataset, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"crossover probability must be in (0, 1), got {p!r}")
    k = data.n_flips
    return k * math.log(p) + (len(data) - k) * math.log1p(-p)


def tempered_posterior(logliks, beta: float = 1.0) -> np.ndarray:
    """``q(r) ~ exp(beta * loglik_r)``, normalised after max-subtraction."""
    ll = np.asarray(logliks, dtype=float)
    if ll.ndim != 1 or ll.size == 0:
        raise ValueError("logliks must be a non-empty vector")
    if not beta >= 0:
        raise DomainError(f"beta must be non-negative, got {beta!r}")
    if np.any(np.isnan(ll)) or np.any(ll == np.inf):
        raise ValueError("logliks must be finite or -inf")
    if np.all(ll == -np.inf):
        raise ValueError("every candidate has zero likelihood")
    if beta == 0:
        return np.full(ll.size, 1.0 / ll.size)
    return softmax(beta * (ll - ll.max()))


def gating_rate_bsc(p: float) -> float:
    """``ln 2 - h(p)`` for a one-bit gate that flips its input w.p. ``p``."""
    if not 0.0 <= p <= 0.5:
        raise DomainError(f"p must lie in [0, 0.5], got {p!r}")
    return max(LN2 - binary_entropy(p), 0.0)


class TemperedPosteriorLearner(BaseEstimator):
    """Selects a BSC crossover probability from a finite grid.

    ``fit(x, y)`` stores the per-candidate log-likelihoods and the tempered
    posterior; ``sample`` draws a candidate index from it.
    """

    def __init__(self, candidate_ps: Sequence[float] = default_p_grid(), beta: float = 1.0):
        self.candidate_ps = candidate_ps
        self.beta = beta

    def fit(self, x, y):
        data = BscDataset(x, y)
        self.loglik_ = np.array([bsc_loglik(data, p) for p in self.candidate_ps])
        self.posterior_ = tempered_posterior(self.loglik_, self.beta)
        return self

    def sample(self, rng: np.random.Generator) -> int:
        check_is_fitted(self, "posterior_")
        idx = int(np.searchsorted(np.cumsum(self.posterior_), rng.random(), side="right"))
        return min(idx, self.posterior_.size - 1)


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _mc_task(config: BscConfig, p_index: int, mc_index: int) -> BscSample:
    p_true = config.p_true_grid[p_index]
    rng = task_rng(config.root_seed, p_index, mc_index)
    data = generate_bsc_dataset(p_true, config.m, rng)
    learner = TemperedPosteriorLearner(config.candidate_ps, config.beta).fit(data.x, data.y)
    w = learner.sample(rng)
    p_w = config.candidate_ps[w]
    rate = gating_rate_bsc(p_w)
    return BscSample(p_true, mc_index, w, p_w, rate, bsc_distortion_rate(rate), learner.posterior_)


def _aggregate(config: BscConfig, samples: list[BscSample]) -> Thm2Row:
    risks = [s.p_w for s in samples]
    mean_rate = _mean(s.rate for s in samples)
    if config.bound_order == "mean-of-d":
        mean_d = _mean(s.d_at_rate for s in samples)
    else:
        mean_d = bsc_distortion_rate(mean_rate)
    info = info_sw_exact([s.posterior for s in samples])
    se = float(np.std(risks, ddof=1) / math.sqrt(len(risks))) if len(risks) > 1 else 0.0
    return Thm2Row(
        p_true=samples[0].p_true,
        mean_pop_risk=_mean(risks),
        mean_rate_nats=mean_rate,
        mean_D_at_rate=mean_d,
        mean_info_sw=info,
        mean_bound=mean_d + math.sqrt(2.0 * info / config.m),
        risk_se=se,
        samples=samples,
    )


def run_thm2(config: BscConfig = BscConfig(), n_jobs: int = 1) -> list[Thm2Row]:
    """One row per ``p_true``; per-dataset draws are kept on ``Thm2Row.samples``."""
    tasks = [(i, j) for i in range(len(config.p_true_grid)) for j in range(config.n_mc)]

    def run(task):
        return _mc_task(config, *task)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            samples = list(pool.map(run, tasks))
    else:
        samples = [run(t) for t in tasks]
    rows = []
    for i in range(len(config.p_true_grid)):
        rows.append(_aggregate(config, samples[i * config.n_mc:(i + 1) * config.n_mc]))
    return sorted(rows, key=lambda r: r.p_true)


def thm2_csv(rows: Sequence[Thm2Row]) -> str:
    from .io import rows_to_csv

    return rows_to_csv(CSV_HEADER, (r.as_csv_row() for r in rows))


def thm2_samples_csv(rows: Sequence[Thm2Row]) -> str:
    from .io import rows_to_csv

    return rows_to_csv(
        SAMPLES_HEADER,
        ((s.p_true, s.mc_index, s.w_index, s.p_w, s.rate, s.d_at_rate)
         for r in rows for s in r.samples),
    )
