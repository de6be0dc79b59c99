"""Randomised consistency checks of the information primitives.

Each case is generated from its own seed ``(root_seed, check_id, case)`` so a
failure report names a reproducible instance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import info
from ._seeding import task_rng


@dataclass
class CheckFailure:
    check: str
    case: int
    seed: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.check} case {self.case} (seed {self.seed}): {self.detail}"


def random_simplex(rng, k: int) -> np.ndarray:
    return rng.dirichlet(np.ones(k))


def random_markov_joint(rng, max_size: int = 5) -> np.ndarray:
    """A joint ``P(s) P(w|s) P(l|w)`` on alphabets of size 1..max_size, indexed ``[s, w, l]``."""
    ns, nw, nl = rng.integers(1, max_size + 1, size=3)
    ps = random_simplex(rng, ns)
    pw_s = rng.dirichlet(np.ones(nw), size=ns)
    pl_w = rng.dirichlet(np.ones(nl), size=nw)
    return ps[:, None, None] * pw_s[:, :, None] * pl_w[None, :, :]


def _dpi(rng) -> str | None:
    joint = random_markov_joint(rng)
    i_sw, i_sl = info.dpi_gap(joint)
    if i_sl > i_sw + 1e-12:
        return f"I(S;L)={i_sl!r} > I(S;W)={i_sw!r}"
    return None


def _entropy_identities(rng) -> str | None:
    k = int(rng.integers(2, 9))
    if abs(info.entropy(np.full(k, 1.0 / k)) - math.log(k)) > 1e-12:
        return f"H(uniform {k}) != ln {k}"
    p = random_simplex(rng, k)
    h = info.entropy(p)
    if not -1e-15 <= h <= math.log(k) + 1e-12:
        return f"H={h!r} outside [0, ln {k}]"
    if abs(info.entropy(rng.permutation(p)) - h) > 1e-12:
        return "entropy not permutation invariant"
    joint = rng.dirichlet(np.ones(k * 3)).reshape(k, 3)
    chain = (info.entropy(joint.sum(1)) + info.entropy(joint.sum(0))
             - info.entropy(joint.ravel()))
    if abs(chain - info.mutual_information(joint)) > 1e-10:
        return f"H(A)+H(B)-H(A,B)={chain!r} != I(A;B)={info.mutual_information(joint)!r}"
    return None


def _inverse_round_trip(rng) -> str | None:
    p = float(rng.uniform(0.0, 0.5))
    back = info.inv_binary_entropy(info.binary_entropy(p))
    if abs(back - p) > 1e-9:
        return f"h^-1(h({p!r})) = {back!r}"
    return None


CHECKS = {
    "dpi": (_dpi, 1000),
    "entropy-identities": (_entropy_identities, 200),
    "inverse-binary-entropy": (_inverse_round_trip, 200),
}


def run_selfcheck(root_seed: int = 42, scale: int = 1) -> list[CheckFailure]:
    """Run every check; returns failures in the order they were found."""
    failures = []
    for check_id, (name, (fn, n_cases)) in enumerate(CHECKS.items()):
        for case in range(n_cases * scale):
            seed = (root_seed, check_id, case)
            try:
                detail = fn(task_rng(*seed))
            except Exception as exc:  # a crash is a failed case too
                detail = f"{type(exc).__name__}: {exc}"
            if detail is not None:
                failures.append(CheckFailure(name, case, seed, detail))
    return failures
