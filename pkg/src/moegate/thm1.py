"""Generalization gap of an alpha-mixture learner over a finite MoE bank.

With probability ``1 - alpha`` the learner returns a uniformly random
candidate, otherwise an empirical-risk minimiser. Sweeping ``alpha`` moves
I(S;W) from zero upward; the measured gap |E[R] - E[R_S]| is compared with
``sqrt(2 I(S;W) / m)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._seeding import task_rng
from ._validation import as_prob_vector, check_unit_interval
from .info import entropy
from .moe import LabeledDataset, MoEModel, generate_dataset, sample_model_from_prior

CSV_HEADER = (
    "alpha", "info_sw_nats", "bound_term", "gap", "mean_pop_risk", "mean_emp_risk",
    "violation_flag",
)
ERM_TIE_ATOL = 1e-12
MC_SIGMAS = 3.0

# stream ids under the root seed
_TRUE, _BANK, _TEST, _DATA = 0, 1, 2, 3


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(round(0.05 * i, 10) for i in range(21))


@dataclass(frozen=True)
class CandidateBank:
    models: tuple[MoEModel, ...]

    def __post_init__(self):
        models = tuple(self.models)
        if len(models) < 2:
            raise ValueError("a candidate bank needs at least two models")
        shapes = {(mdl.dim, mdl.n_experts) for mdl in models}
        if len(shapes) != 1:
            raise ValueError(f"candidates disagree on (d, n): {sorted(shapes)}")
        object.__setattr__(self, "models", models)

    def __len__(self) -> int:
        return len(self.models)

    def __getitem__(self, k) -> MoEModel:
        return self.models[k]

    def pointwise_risks(self, X, y) -> np.ndarray:
        """Gate-averaged loss of each candidate on each example, shape ``(K, m)``."""
        return np.stack([mdl.pointwise_risk(X, y) for mdl in self.models])

    def empirical_risks(self, data: LabeledDataset) -> np.ndarray:
        return self.pointwise_risks(data.X, data.y).mean(axis=1)


def draw_bank(size: int, d: int, n: int, root_seed: int) -> CandidateBank:
    return CandidateBank(
        tuple(sample_model_from_prior(d, n, task_rng(root_seed, _BANK, k)) for k in range(size))
    )


@dataclass(frozen=True)
class Thm1Config:
    d: int = 3
    n_experts: int = 10
    bank_size: int = 30
    m: int = 5
    n_datasets: int = 100
    test_size: int = 1000
    alpha_grid: tuple[float, ...] = field(default_factory=default_alpha_grid)
    root_seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        for name in ("d", "n_experts", "m", "n_datasets", "test_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.bank_size < 2:
            raise ValueError("bank_size must be at least 2")
        if not self.alpha_grid:
            raise ValueError("alpha_grid is empty")
        for a in self.alpha_grid:
            check_unit_interval(a, "alpha")


@dataclass
class Thm1Row:
    alpha: float
    info_sw: float
    bound_term: float
    gap: float
    mean_pop_risk: float
    mean_emp_risk: float
    gap_se: float = 0.0

    @property
    def violation(self) -> bool:
        return self.gap > self.bound_term + MC_SIGMAS * self.gap_se + 1e-9

    def as_csv_row(self):
        return (
            self.alpha, self.info_sw, self.bound_term, self.gap,
            self.mean_pop_risk, self.mean_emp_risk, self.violation,
        )


def erm_indices(bank: CandidateBank | Sequence[MoEModel], data: LabeledDataset) -> tuple[int, ...]:
    """All candidates whose empirical risk ties the minimum (within 1e-12)."""
    if not isinstance(bank, CandidateBank):
        risks = np.array([np.mean(mdl.pointwise_risk(data.X, data.y)) for mdl in bank])
    else:
        risks = bank.empirical_risks(data)
    return erm_from_risks(risks)


def erm_from_risks(risks) -> tuple[int, ...]:
    risks = np.asarray(risks, dtype=float)
    if risks.size == 0:
        raise ValueError("empty candidate bank")
    return tuple(int(i) for i in np.flatnonzero(risks <= risks.min() + ERM_TIE_ATOL))


def alpha_mixture_posterior(bank_size: int, erm, alpha: float) -> np.ndarray:
    """``(1 - alpha)/K`` everywhere plus ``alpha`` split evenly over the ERM set."""
    alpha = check_unit_interval(alpha, "alpha")
    erm = sorted(set(int(i) for i in erm))
    if not erm:
        raise ValueError("ERM set is empty")
    if erm[0] < 0 or erm[-1] >= bank_size:
        raise IndexError(f"ERM indices {erm} out of range for a bank of {bank_size}")
    q = np.full(bank_size, (1.0 - alpha) / bank_size)
    q[erm] += alpha / len(erm)
    return q


def info_sw_exact(posteriors) -> float:
    """I(S;W) for datasets drawn uniformly from the given posterior list.

    ``H(mean posterior) - mean H(posterior)``; identical posteriors give
    exactly zero.
    """
    Q = np.asarray(posteriors, dtype=float)
    if Q.ndim != 2 or Q.shape[0] == 0:
        raise ValueError("expected a non-empty list of equal-length posteriors")
    for q in Q:
        as_prob_vector(q)
    if np.all(Q == Q[0]):
        return 0.0
    marginal = Q.mean(axis=0)
    cond = math.fsum(entropy(q) for q in Q) / Q.shape[0]
    return min(max(entropy(marginal / marginal.sum()) - cond, 0.0), math.log(Q.shape[1]))


def sample_learner_outputs(posteriors, rng: np.random.Generator) -> np.ndarray:
    """One candidate index per posterior row."""
    Q = np.asarray(posteriors, dtype=float)
    u = rng.random(Q.shape[0])
    idx = (u[:, None] >= np.cumsum(Q, axis=1)).sum(axis=1)
    return np.minimum(idx, Q.shape[1] - 1)


class AlphaMixtureLearner(BaseEstimator):
    """Randomised selector over a fixed candidate bank.

    ``fit`` computes the posterior over candidates for one training sample;
    ``predict_proba`` averages the candidates' predictions under it.
    """

    def __init__(self, bank: CandidateBank | None = None, alpha: float = 1.0):
        self.bank = bank
        self.alpha = alpha

    def fit(self, X, y):
        if self.bank is None:
            raise ValueError("AlphaMixtureLearner needs a candidate bank")
        data = LabeledDataset(X, y)
        self.empirical_risks_ = self.bank.empirical_risks(data)
        self.erm_ = erm_from_risks(self.empirical_risks_)
        self.posterior_ = alpha_mixture_posterior(len(self.bank), self.erm_, self.alpha)
        return self

    def sample(self, rng: np.random.Generator) -> int:
        check_is_fitted(self, "posterior_")
        return int(sample_learner_outputs(self.posterior_[None, :], rng)[0])

    def predict_proba(self, X):
        check_is_fitted(self, "posterior_")
        return sum(w * mdl.predict_proba(X) for w, mdl in zip(self.posterior_, self.bank.models))

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def score(self, X, y):
        """Posterior-averaged accuracy (one minus the expected 0-1 risk)."""
        check_is_fitted(self, "posterior_")
        data = LabeledDataset(X, y)
        return 1.0 - float(self.posterior_ @ self.bank.empirical_risks(data))


@dataclass
class _Thm1Setup:
    true_model: MoEModel
    bank: CandidateBank
    test_losses: np.ndarray  # (K, test_size)
    train_risks: np.ndarray  # (n_datasets, K)
    erm_sets: list[tuple[int, ...]]


def _setup(config: Thm1Config, n_jobs: int = 1) -> _Thm1Setup:
    root = config.root_seed
    true_model = sample_model_from_prior(config.d, config.n_experts, task_rng(root, _TRUE))
    bank = draw_bank(config.bank_size, config.d, config.n_experts, root)
    test = generate_dataset(true_model, config.test_size, task_rng(root, _TEST))
    test_losses = bank.pointwise_risks(test.X, test.y)

    def train_task(i):
        data = generate_dataset(true_model, config.m, task_rng(root, _DATA, i))
        return bank.empirical_risks(data)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            train = list(pool.map(train_task, range(config.n_datasets)))
    else:
        train = [train_task(i) for i in range(config.n_datasets)]
    train_risks = np.stack(train)
    return _Thm1Setup(true_model, bank, test_losses, train_risks,
                      [erm_from_risks(r) for r in train_risks])


def _row(setup: _Thm1Setup, alpha: float, m: int) -> Thm1Row:
    K = len(setup.bank)
    Q = np.stack([alpha_mixture_posterior(K, erm, alpha) for erm in setup.erm_sets])
    info = info_sw_exact(Q)
    pop_risk = setup.test_losses.mean(axis=1)  # R(w) estimated on the test set
    pop = Q @ pop_risk
    emp = np.einsum("ik,ik->i", Q, setup.train_risks)
    diff = pop - emp
    n = Q.shape[0]
    # dataset-to-dataset spread plus the finite test set behind R(w)
    per_test_example = Q.mean(axis=0) @ setup.test_losses
    var = 0.0
    if n > 1:
        var += np.var(diff, ddof=1) / n
    if per_test_example.size > 1:
        var += np.var(per_test_example, ddof=1) / per_test_example.size
    mean_pop = math.fsum(pop) / n
    mean_emp = math.fsum(emp) / n
    return Thm1Row(
        alpha=alpha,
        info_sw=info,
        bound_term=math.sqrt(2.0 * info / m),
        gap=abs(mean_pop - mean_emp),
        mean_pop_risk=mean_pop,
        mean_emp_risk=mean_emp,
        gap_se=math.sqrt(var),
    )


def run_thm1(config: Thm1Config = Thm1Config(), n_jobs: int = 1) -> list[Thm1Row]:
    """Sweep the alpha grid; datasets, bank and test set are shared by all rows.

    Risks are averaged under each dataset's exact posterior rather than a
    single sampled candidate.
    """
    setup = _setup(config, n_jobs)
    return [_row(setup, a, config.m) for a in sorted(config.alpha_grid)]


def thm1_csv(rows: Sequence[Thm1Row]) -> str:
    from .io import rows_to_csv

    return rows_to_csv(CSV_HEADER, (r.as_csv_row() for r in rows))
