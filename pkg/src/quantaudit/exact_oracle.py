"""Exact membership-inference security for discrete ERM at tiny scale.

For a finite sample space (M atoms) and a finite codebook of K parameter
choices with a known loss table, the selected model is the empirical-loss
argmin over the observed dataset.  Enumerating all datasets of size n gives
the exact joint law of (selected model, first sample); security is then

    mis = 1 - TV(joint, marginal x sample distribution).

Two enumeration routes are shipped and cross-checked: ordered sequences
(the reference) and multinomial count classes with exact coefficients
(the fast path).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .exceptions import (
    EnumerationTooLargeError,
    InvalidArgumentError,
    InvalidSpecError,
)

ENUMERATION_GUARD = 10 ** 7
PROB_SUM_TOL = 1e-10


@dataclass
class DiscreteTask:
    """Finite task: atom probabilities plus a (codebook x atom) loss table."""

    sample_probs: np.ndarray
    loss_table: np.ndarray
    names: Optional[list[str]] = None

    def __post_init__(self) -> None:
        self.sample_probs = np.asarray(self.sample_probs, dtype=np.float64)
        self.loss_table = np.asarray(self.loss_table, dtype=np.float64)
        if self.sample_probs.ndim != 1 or self.sample_probs.size < 1:
            raise InvalidSpecError("sample_probs must be a non-empty vector")
        if (self.sample_probs < 0).any():
            raise InvalidSpecError("sample_probs must be nonnegative")
        if abs(self.sample_probs.sum() - 1.0) > 1e-12:
            raise InvalidSpecError("sample_probs must sum to 1 within 1e-12")
        if self.loss_table.ndim != 2 or self.loss_table.shape[1] != self.sample_probs.size:
            raise InvalidSpecError("loss_table must be (K, M) with M matching sample_probs")
        if not np.isfinite(self.loss_table).all():
            raise InvalidSpecError("loss_table entries must be finite")

    @property
    def n_models(self) -> int:
        return self.loss_table.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.loss_table.shape[1]

    def to_json(self) -> str:
        return json.dumps({
            "sample_probs": self.sample_probs.tolist(),
            "loss_table": self.loss_table.tolist(),
            "names": self.names,
        })

    @classmethod
    def from_json(cls, text: str) -> "DiscreteTask":
        doc = json.loads(text)
        return cls(sample_probs=np.asarray(doc["sample_probs"]),
                   loss_table=np.asarray(doc["loss_table"]),
                   names=doc.get("names"))


@dataclass
class ExactMisResult:
    """Exact security of size-n training on a discrete task."""

    n: int
    erm_dist: np.ndarray    # law of the selected model, shape (K,)
    joint: np.ndarray       # law of (selected model, first sample), shape (K, M)
    mis: float
    tv: float


def erm_select(counts: np.ndarray, loss_table: np.ndarray) -> int:
    """Index minimizing the empirical loss; ties resolve to the lowest index."""
    counts = np.asarray(counts)
    if counts.sum() < 1:
        raise InvalidArgumentError("counts must describe at least one sample")
    if (counts < 0).any():
        raise InvalidArgumentError("counts must be nonnegative")
    loss_table = np.asarray(loss_table, dtype=np.float64)
    if loss_table.shape[1] != counts.size:
        raise InvalidArgumentError("counts length must match loss_table columns")
    return int(np.argmin(loss_table @ counts.astype(np.float64)))


class _KahanArray:
    """Compensated elementwise accumulation into a float64 array."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._carry = np.zeros(shape)

    def add_at(self, index, value: float) -> None:
        y = value - self._carry[index]
        t = self.total[index] + y
        self._carry[index] = (t - self.total[index]) - y
        self.total[index] = t


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance: half the L1 distance between distributions."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise InvalidArgumentError("distributions must share a support size")
    for name, vec in (("p", p), ("q", q)):
        if abs(vec.sum() - 1.0) > PROB_SUM_TOL:
            raise InvalidArgumentError(f"{name} must sum to 1 within {PROB_SUM_TOL}")
        if (vec < -1e-12).any():
            raise InvalidArgumentError(f"{name} must be nonnegative")
    return 0.5 * float(np.abs(p - q).sum())


def _check_guard(task: DiscreteTask, n: int) -> None:
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if task.n_atoms ** n > ENUMERATION_GUARD:
        raise EnumerationTooLargeError(
            f"M^n = {task.n_atoms}^{n} exceeds the {ENUMERATION_GUARD} enumeration guard"
        )


def _count_vectors(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All compositions of ``total`` into ``parts`` nonnegative integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _count_vectors(total - first, parts - 1):
            yield (first, *rest)


def _multinomial_coefficient(n: int, counts: Sequence[int]) -> int:
    coef = math.factorial(n)
    for c in counts:
        coef //= math.factorial(c)
    return coef


def _finalize(task: DiscreteTask, n: int, erm_dist: np.ndarray,
              joint: np.ndarray) -> ExactMisResult:
    product = np.outer(erm_dist, task.sample_probs)
    tv = tv_distance(joint.ravel(), product.ravel())
    return ExactMisResult(n=n, erm_dist=erm_dist, joint=joint, mis=1.0 - tv, tv=tv)


def _exact_mis_ordered(task: DiscreteTask, n: int) -> ExactMisResult:
    K, M = task.n_models, task.n_atoms
    erm_acc = _KahanArray(K)
    joint_acc = _KahanArray((K, M))
    probs = task.sample_probs
    counts = np.zeros(M, dtype=np.int64)
    for tup in itertools.product(range(M), repeat=n):
        prob = 1.0
        counts[:] = 0
        for atom in tup:
            prob *= probs[atom]
            counts[atom] += 1
        k = erm_select(counts, task.loss_table)
        erm_acc.add_at(k, prob)
        joint_acc.add_at((k, tup[0]), prob)
    return _finalize(task, n, erm_acc.total, joint_acc.total)


def _exact_mis_multinomial(task: DiscreteTask, n: int) -> ExactMisResult:
    K, M = task.n_models, task.n_atoms
    probs = task.sample_probs
    erm_acc = _KahanArray(K)
    for counts in _count_vectors(n, M):
        arr = np.asarray(counts, dtype=np.int64)
        prob = _multinomial_coefficient(n, counts) * float(np.prod(probs ** arr))
        erm_acc.add_at(erm_select(arr, task.loss_table), prob)

    joint_acc = _KahanArray((K, M))
    if n == 1:
        for m in range(M):
            arr = np.zeros(M, dtype=np.int64)
            arr[m] = 1
            joint_acc.add_at((erm_select(arr, task.loss_table), m), probs[m])
    else:
        for rest in _count_vectors(n - 1, M):
            arr = np.asarray(rest, dtype=np.int64)
            prob_rest = _multinomial_coefficient(n - 1, rest) * float(np.prod(probs ** arr))
            for m in range(M):
                arr[m] += 1
                k = erm_select(arr, task.loss_table)
                arr[m] -= 1
                joint_acc.add_at((k, m), probs[m] * prob_rest)
    return _finalize(task, n, erm_acc.total, joint_acc.total)


def exact_mis(task: DiscreteTask, n: int, method: str = "multinomial") -> ExactMisResult:
    """Exact security via full enumeration; guard: M^n <= 10^7.

    ``method`` picks the enumeration route: "multinomial" (count classes
    with exact coefficients, the fast default) or "ordered" (all ordered
    sample sequences, the independent reference path).
    """
    _check_guard(task, n)
    if method == "ordered":
        return _exact_mis_ordered(task, n)
    if method == "multinomial":
        return _exact_mis_multinomial(task, n)
    raise InvalidArgumentError(f"unknown method {method!r}")


def rate_curve(
    task: DiscreteTask, n_values: Sequence[int], method: str = "multinomial"
) -> list[tuple[int, float, float]]:
    """(n, mis, -log(1 - mis)/n) per requested n; the rate is +inf at mis == 1."""
    out = []
    for n in n_values:
        result = exact_mis(task, n, method=method)
        insecurity = 1.0 - result.mis
        rate = math.inf if insecurity <= 0.0 else -math.log(insecurity) / n
        out.append((n, result.mis, rate))
    return out
