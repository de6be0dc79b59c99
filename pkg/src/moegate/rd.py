"""Rate-distortion design of the gating channel.

The core solver is a Blahut-Arimoto iteration on the Lagrangian
``E[d(X, T)] + lam * I(X; T)``, carried out in the log domain so that very
small multipliers (nearly free rate) do not underflow. The estimator wrapper
:class:`BlahutArimotoGate` exposes the same solver through the usual
``fit`` / ``predict_proba`` interface.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import expit, logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, as_distortion, as_prob_vector
from .info import LN2, channel_mutual_information, inv_binary_entropy
from .moe import ExpertBank, zero_one_loss

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
CURVE_SLACK = 1e-6


class RateAboveCapacityWarning(UserWarning):
    pass


class CurveMonotonicityError(RuntimeError):
    pass


@dataclass(frozen=True)
class RDInstance:
    """Source law over a finite input alphabet and a per-expert loss table."""

    source: np.ndarray  # (|X|,)
    distortion: np.ndarray  # (|X|, n)

    def __post_init__(self):
        src = as_prob_vector(self.source)
        dist = as_distortion(self.distortion, src.size)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "distortion", dist)

    @property
    def n_experts(self) -> int:
        return self.distortion.shape[1]

    def expected_distortion(self, channel) -> float:
        return float(np.sum(self.source[:, None] * np.asarray(channel) * self.distortion))


@dataclass
class RDPoint:
    rate: float
    distortion: float
    lam: float
    channel: np.ndarray
    converged: bool = True
    iterations: int = 0
    lagrangian_path: list[float] = field(default_factory=list, repr=False)

    @property
    def lagrangian(self) -> float:
        return self.distortion + self.lam * self.rate


@dataclass
class RDCurve:
    points: list[RDPoint]

    CSV_HEADER = ("lambda", "rate_nats", "distortion", "converged", "iterations")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    def to_csv(self, extra_columns: dict[str, Sequence[float]] | None = None) -> str:
        from .io import fmt

        extra_columns = extra_columns or {}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*self.CSV_HEADER, *extra_columns])
        for i, pt in enumerate(self.points):
            writer.writerow(
                [fmt(pt.lam), fmt(pt.rate), fmt(pt.distortion), int(pt.converged), pt.iterations]
                + [fmt(col[i]) for col in extra_columns.values()]
            )
        return buf.getvalue()


def _ba_iterate(source, distortion, lam, tol, max_iter, extrapolate=True):
    n_in, n_out = distortion.shape
    with np.errstate(divide="ignore"):
        log_src = np.log(source)
    scaled = distortion / lam
    live_rows = source > 0

    def rows_from(log_q):
        # dead reproduction letters (q = 0) stay dead: -inf logits
        logits = log_q[None, :] - scaled
        log_p = logits - logsumexp(logits, axis=1, keepdims=True)
        log_p[~live_rows] = log_q - logsumexp(log_q)
        return log_p

    def marginal(log_p):
        return logsumexp(log_src[:, None] + log_p, axis=0)

    def lagrangian(log_p, log_q):
        p = np.exp(log_p)
        w = source[:, None] * p
        mask = w > 0
        info = float(np.sum(w[mask] * (log_p - log_q[None, :])[mask]))
        return float(np.sum(w * distortion)) + lam * max(info, 0.0)

    log_p = np.full((n_in, n_out), -math.log(n_out))
    log_m = marginal(log_p)
    path = [lagrangian(log_p, log_m)]
    tilt = None  # marginal that generated the current rows
    step = 1.0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        cand_p = rows_from(log_m)
        cand_m = marginal(cand_p)
        cand_l = lagrangian(cand_p, cand_m)
        if extrapolate and tilt is not None:
            # over-relaxed move of the tilt along the plain BA direction,
            # kept only if it beats the plain step
            live = np.isfinite(log_m)
            trial = np.full(n_out, -np.inf)
            trial[live] = tilt[live] + 2.0 * step * (log_m[live] - tilt[live])
            trial -= logsumexp(trial)
            trial_p = rows_from(trial)
            trial_m = marginal(trial_p)
            trial_l = lagrangian(trial_p, trial_m)
            if trial_l <= cand_l:
                step = min(2.0 * step, 2.0**40)
                tilt, log_p, log_m = trial, trial_p, trial_m
                path.append(trial_l)
            else:
                step = 1.0
                tilt, log_p, log_m = log_m, cand_p, cand_m
                path.append(cand_l)
        else:
            tilt, log_p, log_m = log_m, cand_p, cand_m
            path.append(cand_l)
        if path[-2] - path[-1] < tol:
            converged = True
            break
    return np.exp(log_p), converged, it, path


def ba_lagrangian_solve(
    inst: RDInstance,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    extrapolate: bool = True,
) -> RDPoint:
    """Minimise ``E[d] + lam * I(X;T)`` over gating channels.

    Starts from the uniform channel, then alternates the output-marginal
    update with the tilted row update ``P(t|x) ~ q(t) exp(-d(x,t)/lam)``.
    Stops when a sweep lowers the Lagrangian by less than ``tol``; hitting
    ``max_iter`` first returns the point with ``converged=False``.

    With ``extrapolate`` each sweep also tries an over-relaxed marginal
    (step size doubling while it keeps winning) and keeps whichever of the
    two candidates has the lower Lagrangian. Plain iterations move the
    marginal by only ``O(1/lam)`` per sweep, which stalls for large ``lam``.
    """
    if not lam > 0 or not math.isfinite(lam):
        raise DomainError(f"Lagrange multiplier must be positive and finite, got {lam!r}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    channel, converged, iters, path = _ba_iterate(
        inst.source, inst.distortion, float(lam), tol, max_iter, extrapolate
    )
    channel = channel / channel.sum(axis=1, keepdims=True)
    return RDPoint(
        rate=channel_mutual_information(inst.source, channel),
        distortion=inst.expected_distortion(channel),
        lam=float(lam),
        channel=channel,
        converged=converged,
        iterations=iters,
        lagrangian_path=path,
    )


def trace_rd_curve(
    inst: RDInstance,
    lambdas: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    n_jobs: int = 1,
) -> RDCurve:
    """Solve at every multiplier and return the points sorted by rate."""
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 2:
        raise ValueError("tracing a curve needs at least two multipliers")
    if any(not v > 0 for v in lambdas):
        raise DomainError("all multipliers must be positive")

    def solve(lam):
        return ba_lagrangian_solve(inst, lam, tol=tol, max_iter=max_iter)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            points = list(pool.map(solve, lambdas))
    else:
        points = [solve(v) for v in lambdas]
    points.sort(key=lambda p: (p.rate, -p.distortion))
    d = np.array([p.distortion for p in points])
    rises = np.diff(d)
    if np.any(rises > CURVE_SLACK):
        k = int(np.argmax(rises))
        raise CurveMonotonicityError(
            f"distortion rises by {rises[k]:.3g} between rates "
            f"{points[k].rate:.6g} and {points[k + 1].rate:.6g}"
        )
    return RDCurve(points)


def geometric_lambda_grid(lo: float = 1e-3, hi: float = 1e3, num: int = 50) -> np.ndarray:
    return np.geomspace(lo, hi, num)


def binary_hamming_instance() -> RDInstance:
    """Fair bit source with Hamming loss; its curve is ``h^-1(ln 2 - R)``."""
    return RDInstance(np.array([0.5, 0.5]), 1.0 - np.eye(2))


def bsc_distortion_rate(rate: float) -> float:
    """Distortion-rate function of a fair bit under Hamming loss, in nats."""
    if rate < -1e-12 or not math.isfinite(rate):
        raise DomainError(f"rate must lie in [0, ln 2], got {rate!r}")
    if rate > LN2 + 1e-12:
        warnings.warn(
            f"rate {rate:.6g} exceeds ln 2; distortion clamped to 0",
            RateAboveCapacityWarning,
            stacklevel=2,
        )
        return 0.0
    return inv_binary_entropy(LN2 - min(max(rate, 0.0), LN2))


def distortion_matrix_from_experts(
    bank: ExpertBank,
    inputs,
    labeler,
    loss: Callable[[np.ndarray, np.ndarray], np.ndarray] = zero_one_loss,
    source=None,
) -> RDInstance:
    """Expected loss of each expert on each input under a conditional label law.

    ``labeler`` is either a callable returning ``P(Y = . | x)`` over
    ``{0, 1}`` for one input, or an ``(N, 2)`` array of those rows. The
    source defaults to the uniform (empirical) law on ``inputs``.
    """
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("need at least one input")
    if X.shape[1] != bank.weights.shape[1]:
        raise ValueError(
            f"inputs have dimension {X.shape[1]}, experts expect {bank.weights.shape[1]}"
        )
    if callable(labeler):
        label_law = np.array([as_prob_vector(labeler(x)) for x in X])
    else:
        label_law = np.array([as_prob_vector(row) for row in np.asarray(labeler, dtype=float)])
    if label_law.shape[0] != X.shape[0]:
        raise ValueError(f"{label_law.shape[0]} label laws for {X.shape[0]} inputs")
    preds = bank.predict(X)  # (N, n)
    dist = np.zeros(preds.shape)
    for label in range(label_law.shape[1]):
        dist += label_law[:, [label]] * loss(preds, np.full_like(preds, label))
    if source is None:
        source = np.full(X.shape[0], 1.0 / X.shape[0])
    return RDInstance(source, dist)


def thm2_bound(d_at_rate: float, delta_m: float, info_sw: float, m: int) -> float:
    """Risk bound ``D(R_g) + delta_m + sqrt(2 I(S;W) / m)``."""
    if min(d_at_rate, delta_m, info_sw) < 0:
        raise DomainError("bound terms must be non-negative")
    if m < 1:
        raise DomainError(f"sample size must be >= 1, got {m}")
    return d_at_rate + delta_m + math.sqrt(2.0 * info_sw / m)


class CapacityCheck(NamedTuple):
    within: bool
    gap: float


def capacity_check(achieved_rate: float, capacity: float) -> CapacityCheck:
    return CapacityCheck(achieved_rate <= capacity + 1e-9, capacity - achieved_rate)


def randomized_response_channel(epsilon: float, k: int = 2) -> np.ndarray:
    """k-ary randomized response: keep the symbol w.p. ``e^eps / (e^eps + k - 1)``."""
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be non-negative, got {epsilon!r}")
    if k < 2:
        raise DomainError("randomized response needs at least two symbols")
    # logistic form keeps both entries accurate for large epsilon
    shift = math.log(k - 1)
    keep = float(expit(epsilon - shift))
    other = float(expit(shift - epsilon)) / (k - 1)
    ch = np.full((k, k), other)
    np.fill_diagonal(ch, keep)
    return ch


class BlahutArimotoGate(BaseEstimator):
    """Rate-regularised gating channel fitted by Blahut-Arimoto.

    Parameters
    ----------
    lam : float
        Price of one nat of gating rate.
    tol, max_iter :
        Stopping rule on the decrease of the Lagrangian per sweep.

    Attributes
    ----------
    channel_ : ndarray of shape (n_inputs, n_experts)
    marginal_ : ndarray of shape (n_experts,)
    rate_, distortion_ : float
    converged_ : bool
    n_iter_ : int
    """

    def __init__(self, lam: float = 1.0, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, distortion, source=None):
        d = as_distortion(distortion)
        if source is None:
            source = np.full(d.shape[0], 1.0 / d.shape[0])
        inst = RDInstance(source, d)
        pt = ba_lagrangian_solve(inst, self.lam, tol=self.tol, max_iter=self.max_iter)
        if not pt.converged:
            warnings.warn(
                f"Blahut-Arimoto stopped after {pt.iterations} sweeps without converging",
                RuntimeWarning,
                stacklevel=2,
            )
        self.channel_ = pt.channel
        self.marginal_ = inst.source @ pt.channel
        self.rate_ = pt.rate
        self.distortion_ = pt.distortion
        self.converged_ = pt.converged
        self.n_iter_ = pt.iterations
        self.lagrangian_path_ = np.array(pt.lagrangian_path)
        return self

    def predict_proba(self, X):
        """Routing law for input symbols ``X`` (integer indices into the source alphabet)."""
        check_is_fitted(self, "channel_")
        return self.channel_[np.asarray(X, dtype=np.int64)]

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=-1)

    def to_point(self) -> RDPoint:
        check_is_fitted(self, "channel_")
        return RDPoint(
            self.rate_, self.distortion_, float(self.lam), self.channel_,
            self.converged_, self.n_iter_, list(self.lagrangian_path_),
        )
