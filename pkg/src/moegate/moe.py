"""Softmax-gated mixture of linear-threshold experts.

The gate is a discrete memoryless channel from inputs to expert indices;
risks integrate over that channel exactly instead of sampling routes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import softmax

from ._validation import check_features

LossFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def zero_one_loss(pred: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (pred != y).astype(float)


@dataclass(frozen=True)
class GateParams:
    weights: np.ndarray  # (n, d)
    biases: np.ndarray  # (n,)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        b = np.array(self.biases, dtype=float, ndmin=1)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError(f"gate weights {w.shape} and biases {b.shape} disagree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("gate parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def n_experts(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ExpertBank:
    """``n`` linear-threshold classifiers, ``h_g(x) = 1[w_g . x + b_g > 0]``."""

    weights: np.ndarray  # (n, d)
    biases: np.ndarray  # (n,)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        b = np.array(self.biases, dtype=float, ndmin=1)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError(f"expert weights {w.shape} and biases {b.shape} disagree")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def predict(self, X) -> np.ndarray:
        """Labels of every expert on every row of ``X``, shape ``(m, n)``."""
        X = check_features(X, self.weights.shape[1])
        return (X @ self.weights.T + self.biases > 0).astype(np.int64)


@dataclass(frozen=True)
class MoEModel:
    gate: GateParams
    bank: ExpertBank
    loss: LossFn = field(default=zero_one_loss, compare=False, repr=False)

    def __post_init__(self):
        if self.gate.n_experts != len(self.bank):
            raise ValueError(
                f"gate routes to {self.gate.n_experts} experts but the bank has {len(self.bank)}"
            )
        if self.gate.dim != self.bank.weights.shape[1]:
            raise ValueError("gate and experts disagree on the input dimension")

    @property
    def n_experts(self) -> int:
        return self.gate.n_experts

    @property
    def dim(self) -> int:
        return self.gate.dim

    def gate_probs(self, X) -> np.ndarray:
        """Routing distribution per row, shape ``(m, n)``."""
        X = check_features(X, self.dim)
        return softmax(X @ self.gate.weights.T + self.gate.biases, axis=1)

    def expert_losses(self, X, y) -> np.ndarray:
        """``loss(h_g(x_j), y_j)`` for every example and expert, shape ``(m, n)``."""
        preds = self.bank.predict(X)
        return self.loss(preds, np.asarray(y)[:, None])

    def pointwise_risk(self, X, y) -> np.ndarray:
        """Gate-averaged loss of each example."""
        return np.sum(self.gate_probs(X) * self.expert_losses(X, y), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        X = check_features(X, self.dim)
        p1 = np.sum(self.gate_probs(X) * self.bank.predict(X), axis=1)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray  # (m, d)
    y: np.ndarray  # (m,) in {0, 1}

    def __post_init__(self):
        X = check_features(self.X)
        y = np.asarray(self.y, dtype=np.int64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.shape[0]


def gate_probs(model: MoEModel, x) -> np.ndarray:
    """Routing distribution for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("gate_probs takes one input vector; use MoEModel.gate_probs for batches")
    return model.gate_probs(x)[0]


def _inverse_cdf(probs: np.ndarray, u) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    if probs.ndim == 1:
        idx = np.searchsorted(cdf, u, side="right")
    else:
        idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_route(model: MoEModel, x, rng: np.random.Generator) -> int:
    return int(_inverse_cdf(gate_probs(model, x), rng.random()))


def sample_routes(model: MoEModel, X, rng: np.random.Generator) -> np.ndarray:
    probs = model.gate_probs(X)
    return _inverse_cdf(probs, rng.random(probs.shape[0]))


def empirical_risk(model: MoEModel, data: LabeledDataset) -> float:
    """Gate-averaged mean loss on ``data`` (exact in the routing randomness)."""
    if len(data) == 0:
        raise ValueError("empirical risk of an empty dataset")
    return float(np.mean(model.pointwise_risk(data.X, data.y)))


def population_risk_estimate(model: MoEModel, test: LabeledDataset) -> float:
    if len(test) == 0:
        raise ValueError("population risk needs a non-empty test set")
    return empirical_risk(model, test)


def gating_rate_plugin(model: MoEModel, inputs) -> float:
    """Plug-in estimate of I(X;T) from gate probabilities on a batch of inputs.

    Averages ``sum_g p_g(x) ln(p_g(x) / pi_g)`` over the inputs, where
    ``pi`` is the batch mean of the gate outputs. On a finite support listed
    once per symbol this is the exact rate under the uniform input law.
    """
    X = np.asarray(inputs, dtype=float)
    if X.size == 0:
        raise ValueError("gating rate needs at least one input")
    probs = model.gate_probs(X)
    if np.all(probs == probs[0]):
        return 0.0
    pi = probs.mean(axis=0)
    terms = probs * (np.log(probs) - np.log(pi))
    rate = float(np.sum(terms) / probs.shape[0])
    return min(max(rate, 0.0), float(np.log(model.n_experts)))


def sample_model_from_prior(d: int, n: int, rng: np.random.Generator) -> MoEModel:
    """All gate and expert parameters i.i.d. standard normal."""
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    gate = GateParams(rng.standard_normal((n, d)), rng.standard_normal(n))
    bank = ExpertBank(rng.standard_normal((n, d)), rng.standard_normal(n))
    return MoEModel(gate, bank)


def generate_dataset(true_model: MoEModel, m: int, rng: np.random.Generator) -> LabeledDataset:
    """Gaussian inputs labelled by one sampled expert of ``true_model`` each."""
    if m <= 0:
        raise ValueError(f"dataset size must be positive, got {m}")
    X = rng.standard_normal((m, true_model.dim))
    routes = sample_routes(true_model, X, rng)
    y = true_model.bank.predict(X)[np.arange(m), routes]
    return LabeledDataset(X, y)
