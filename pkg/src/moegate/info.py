"""Exact information measures over finite alphabets.

Everything here works in nats. Inputs are plain array-likes; validation
clamps tiny negative round-off to zero and rejects anything that is not a
probability vector / joint table within ``SIMPLEX_ATOL``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import xlogy

from ._validation import DomainError, as_channel, as_joint, as_prob_vector

LN2 = math.log(2.0)

_INV_H_MAX_ITER = 200


def entropy(p) -> float:
    """Shannon entropy ``-sum p ln p`` with ``0 ln 0 = 0``."""
    p = as_prob_vector(p)
    h = -float(np.sum(xlogy(p, p)))
    return min(max(h, 0.0), math.log(p.size)) if p.size > 1 else 0.0


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary_entropy needs p in [0, 1], got {p!r}")
    return -float(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def inv_binary_entropy(h_val: float) -> float:
    """Inverse of the binary entropy on the branch ``[0, 1/2]``.

    Plain bisection: the derivative of ``h`` vanishes at 1/2 so Newton is
    unreliable exactly where the distortion-rate curve needs it. The loop
    runs until the bracket stops shrinking, which pins ``p`` to the last
    representable digit rather than only matching ``h`` to 1e-10.
    """
    if not -1e-12 <= h_val <= LN2 + 1e-12:
        raise DomainError(f"inv_binary_entropy needs h in [0, ln 2], got {h_val!r}")
    h_val = min(max(h_val, 0.0), LN2)
    if h_val == 0.0:
        return 0.0
    if h_val == LN2:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(_INV_H_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if binary_entropy(mid) < h_val:
            lo = mid
        else:
            hi = mid
    # pick whichever end of the final bracket is closer in h
    if abs(binary_entropy(lo) - h_val) <= abs(binary_entropy(hi) - h_val):
        return lo
    return hi


def mutual_information(joint) -> float:
    """I(A;B) of a two-way joint table, rows indexing A and columns B."""
    joint = as_joint(joint)
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    outer = np.outer(pa, pb)
    mask = joint > 0
    mi = float(np.sum(joint[mask] * (np.log(joint[mask]) - np.log(outer[mask]))))
    return max(mi, 0.0)


def joint_from_channel(input_dist, channel) -> np.ndarray:
    p = as_prob_vector(input_dist)
    ch = as_channel(channel)
    if ch.shape[0] != p.size:
        raise ValueError(
            f"input has {p.size} symbols but channel has {ch.shape[0]} rows"
        )
    return p[:, None] * ch


def channel_mutual_information(input_dist, channel) -> float:
    """I(X;T) for ``X ~ input_dist`` sent through the row-stochastic ``channel``."""
    return mutual_information(joint_from_channel(input_dist, channel))


def dpi_gap(joint_swl) -> tuple[float, float]:
    """Return ``(I(S;W), I(S;L))`` for a three-way table indexed ``[s, w, l]``.

    The caller is responsible for building a joint that factorizes along
    ``S -> W -> L``; under that chain the second value never exceeds the
    first.
    """
    table = np.asarray(joint_swl, dtype=float)
    if table.ndim != 3:
        raise ValueError(f"expected a 3-way table, got shape {table.shape}")
    flat = as_joint(table.reshape(table.shape[0], -1)).reshape(table.shape)
    return mutual_information(flat.sum(axis=2)), mutual_information(flat.sum(axis=1))
