"""Synthetic Gaussian-mixture classification benchmark.

Labeled datasets are drawn from a mixture of isotropic Gaussians in high
dimension; each cluster carries a fixed binary label.  All generators are
pure functions of their inputs plus a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .exceptions import InvalidArgumentError, InvalidSpecError

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"
TASK_KINDS = (TASK_CLASSIFICATION, TASK_REGRESSION)


@dataclass(frozen=True)
class MixtureSpec:
    """A labeled Gaussian-mixture distribution over R^dim.

    ``centers`` has shape (k_modes, dim); ``labels`` holds one binary label
    per cluster.  ``sigma`` is the isotropic per-coordinate noise std.
    """

    dim: int
    k_modes: int
    sigma: float
    centers: np.ndarray
    labels: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        centers = np.asarray(self.centers, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "labels", labels)
        if self.dim < 1:
            raise InvalidSpecError("dim must be >= 1")
        if self.sigma <= 0:
            raise InvalidSpecError("sigma must be positive")
        if centers.shape != (self.k_modes, self.dim):
            raise InvalidSpecError(
                f"centers shape {centers.shape} != (k_modes={self.k_modes}, dim={self.dim})"
            )
        if labels.shape != (self.k_modes,):
            raise InvalidSpecError("labels must have one entry per cluster")
        if not np.isin(labels, (0, 1)).all():
            raise InvalidSpecError("labels must be binary")
        if self.k_modes >= 2 and len(np.unique(labels)) < 2:
            raise InvalidSpecError("both labels 0 and 1 must occur when k_modes >= 2")

    def to_json(self) -> str:
        doc = {
            "dim": self.dim,
            "k_modes": self.k_modes,
            "sigma": self.sigma,
            "centers": self.centers.tolist(),
            "labels": self.labels.tolist(),
            "seed": self.seed,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MixtureSpec":
        doc = json.loads(text)
        return cls(
            dim=doc["dim"],
            k_modes=doc["k_modes"],
            sigma=doc["sigma"],
            centers=np.asarray(doc["centers"], dtype=np.float64),
            labels=np.asarray(doc["labels"], dtype=np.int64),
            seed=doc["seed"],
        )


@dataclass
class Dataset:
    """A finite sample: feature rows ``xs`` and targets ``ys``."""

    xs: np.ndarray
    ys: np.ndarray
    task_kind: str = TASK_CLASSIFICATION

    def __post_init__(self) -> None:
        self.xs = np.asarray(self.xs, dtype=np.float64)
        self.ys = np.asarray(self.ys, dtype=np.float64)
        if self.xs.ndim != 2 and self.xs.size:
            self.xs = self.xs.reshape(len(self.xs), -1)
        elif self.xs.ndim != 2:
            self.xs = self.xs.reshape(len(self.xs), 0)
        if len(self.xs) != len(self.ys):
            raise InvalidSpecError("xs and ys must have equal length")
        if self.task_kind not in TASK_KINDS:
            raise InvalidSpecError(f"unknown task_kind {self.task_kind!r}")
        if self.task_kind == TASK_CLASSIFICATION and len(self.ys):
            if not np.isin(self.ys, (0.0, 1.0)).all():
                raise InvalidSpecError("classification targets must be 0/1")

    def __len__(self) -> int:
        return len(self.xs)

    def __iter__(self) -> Iterator[tuple[np.ndarray, float]]:
        for x, y in zip(self.xs, self.ys):
            yield x, float(y)


def make_mixture_spec(
    dim: int,
    k_modes: int,
    sigma: float,
    center_scale: float = 5.0,
    seed: int = 0,
) -> MixtureSpec:
    """Draw a mixture spec: Gaussian cluster centers, round-robin labels.

    Centers are i.i.d. spherical Gaussian with per-coordinate std
    ``center_scale``; cluster k gets label k mod 2.  Deterministic in seed.
    """
    if dim < 1:
        raise InvalidSpecError("dim must be >= 1")
    if k_modes < 2:
        raise InvalidSpecError(
            "k_modes must be >= 2: a single-label dataset cannot define a "
            "classification boundary"
        )
    if sigma <= 0:
        raise InvalidSpecError("sigma must be positive")
    if center_scale <= 0:
        raise InvalidSpecError("center_scale must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(k_modes, dim))
    labels = np.arange(k_modes, dtype=np.int64) % 2
    return MixtureSpec(dim=dim, k_modes=k_modes, sigma=sigma, centers=centers,
                       labels=labels, seed=seed)


def sample_dataset(spec: MixtureSpec, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. samples: uniform cluster choice, then isotropic noise."""
    if n < 0:
        raise InvalidArgumentError("n must be non-negative")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, spec.k_modes, size=n)
    noise = rng.standard_normal((n, spec.dim))
    xs = spec.centers[idx] + spec.sigma * noise
    ys = spec.labels[idx].astype(np.float64)
    return Dataset(xs=xs, ys=ys, task_kind=TASK_CLASSIFICATION)


def augment_features(x: np.ndarray) -> np.ndarray:
    """Concatenate element-wise squared features: x -> (x, x*x).

    Works on a single vector or row-wise on a 2-D batch.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([x, x * x], axis=-1)


def augment_dataset(dataset: Dataset) -> Dataset:
    """Row-wise feature augmentation of a whole dataset."""
    return Dataset(xs=augment_features(dataset.xs), ys=dataset.ys,
                   task_kind=dataset.task_kind)


def split(dataset: Dataset, val_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffled disjoint (train, val) split; val gets floor(val_fraction * n)."""
    if not 0 <= val_fraction < 1:
        raise InvalidArgumentError("val_fraction must lie in [0, 1)")
    n = len(dataset)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(np.floor(val_fraction * n))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    make = lambda idx: Dataset(xs=dataset.xs[idx], ys=dataset.ys[idx],
                               task_kind=dataset.task_kind)
    return make(train_idx), make(val_idx)


def dataset_to_jsonl(dataset: Dataset) -> str:
    """One JSON record {"x": [...], "y": ...} per line."""
    lines = [
        json.dumps({"x": x.tolist(), "y": y})
        for x, y in dataset
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def dataset_from_jsonl(text: str, task_kind: str = TASK_CLASSIFICATION) -> Dataset:
    xs, ys = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        xs.append(rec["x"])
        ys.append(rec["y"])
    if not xs:
        return Dataset(xs=np.zeros((0, 0)), ys=np.zeros(0), task_kind=task_kind)
    return Dataset(xs=np.asarray(xs, dtype=np.float64),
                   ys=np.asarray(ys, dtype=np.float64), task_kind=task_kind)


def save_dataset(dataset: Dataset, path: Path) -> None:
    Path(path).write_text(dataset_to_jsonl(dataset))


def load_dataset(path: Path, task_kind: str = TASK_CLASSIFICATION) -> Dataset:
    return dataset_from_jsonl(Path(path).read_text(), task_kind=task_kind)
