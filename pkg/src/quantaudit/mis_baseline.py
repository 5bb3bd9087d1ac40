"""Baseline security estimation via a learned membership discriminator.

A pool of target models is trained on mutually disjoint datasets; each
model is quantized and paired with an equally sized disjoint negative set.
A feed-forward discriminator then learns to tell training samples from
fresh ones given (input features, flattened quantized parameters, loss of
the quantized model on the sample).  Its held-out accuracy upper-bounds
the best attack's accuracy estimate, giving

    mis = 2 * (1 - max(accuracy, 1/2)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .datasets import Dataset, TASK_CLASSIFICATION, sample_dataset, augment_features, MixtureSpec
from .estimators import DenseNetClassifier
from .exceptions import InvalidArgumentError
from .nets import ModelParams, TrainConfig, per_sample_losses, train
from .quantizers import QuantizerSpec, quantize
from .utils import derive_seed


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Architecture and optimizer of the membership discriminator."""

    hidden_dims: tuple[int, ...] = (256, 256)
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = 0
    standardize: bool = True


@dataclass
class PoolEntry:
    """One target model with its training set and paired negative set."""

    params: ModelParams  # quantized final parameters
    train_X: np.ndarray
    train_y: np.ndarray
    neg_X: np.ndarray
    neg_y: np.ndarray


@dataclass
class ModelPool:
    """Independent target models for discriminator training/evaluation."""

    entries: list[PoolEntry]
    quantizer: QuantizerSpec
    task_kind: str = TASK_CLASSIFICATION

    def __post_init__(self) -> None:
        for i, entry in enumerate(self.entries):
            if len(entry.train_X) != len(entry.neg_X):
                raise InvalidArgumentError(
                    f"entry {i}: negative set size must equal training set size"
                )


@dataclass
class DiscExample:
    """One discriminator example: features = (x, flat params, loss)."""

    features: np.ndarray
    label: int  # member = 1, non-member = 0
    entry_index: int


@dataclass
class MisEstimate:
    """Discriminator accuracy converted to a security estimate."""

    accuracy: float
    mis: float
    n_eval: int


def pool_from_models(
    models: Sequence[ModelParams],
    train_sets: Sequence[tuple[np.ndarray, np.ndarray]],
    neg_sets: Sequence[tuple[np.ndarray, np.ndarray]],
    quantizer: QuantizerSpec,
    task_kind: str = TASK_CLASSIFICATION,
) -> ModelPool:
    """Quantize already-trained single-layer models into a pool."""
    if not (len(models) == len(train_sets) == len(neg_sets)):
        raise InvalidArgumentError("models, train sets and negative sets must align")
    entries = []
    for model, (tx, ty), (nx, ny) in zip(models, train_sets, neg_sets):
        if model.arch.hidden_dims:
            raise InvalidArgumentError(
                "baseline pools are restricted to single-layer target models: "
                "flattened-parameter features are not permutation invariant"
            )
        q = quantize(model.flat, quantizer)
        entries.append(PoolEntry(
            params=ModelParams(arch=model.arch, flat=q.values),
            train_X=np.asarray(tx, dtype=np.float64),
            train_y=np.asarray(ty, dtype=np.float64),
            neg_X=np.asarray(nx, dtype=np.float64),
            neg_y=np.asarray(ny, dtype=np.float64),
        ))
    return ModelPool(entries=entries, quantizer=quantizer, task_kind=task_kind)


def build_pool(
    spec: MixtureSpec,
    n_models: int,
    n_per_set: int,
    config: TrainConfig,
    quantizer: QuantizerSpec,
    master_seed: int,
    augment: bool = True,
) -> ModelPool:
    """Sample 2*n_models disjoint datasets, train one model per training set,
    quantize each final model, attach the paired negative set."""
    if n_models < 2:
        raise InvalidArgumentError("need at least 2 models to split train/eval pools")
    if n_per_set < 1:
        raise InvalidArgumentError("n_per_set must be >= 1")
    big = sample_dataset(spec, 2 * n_models * n_per_set,
                         seed=derive_seed(master_seed, "pool-data"))
    xs = augment_features(big.xs) if augment else big.xs
    ys = big.ys

    models, train_sets, neg_sets = [], [], []
    for i in range(n_models):
        lo = 2 * i * n_per_set
        t = slice(lo, lo + n_per_set)
        g = slice(lo + n_per_set, lo + 2 * n_per_set)
        train_set = Dataset(xs=xs[t], ys=ys[t], task_kind=config.task_kind)
        trajectory = train(train_set, config,
                           init_seed=derive_seed(master_seed, "pool-init", i),
                           keep_checkpoints=False)
        models.append(trajectory.final_params)
        train_sets.append((xs[t], ys[t]))
        neg_sets.append((xs[g], ys[g]))
    return pool_from_models(models, train_sets, neg_sets, quantizer,
                            task_kind=config.task_kind)


def audit_pool_overlap(pool: ModelPool) -> int:
    """Number of duplicate sample rows across all train/negative sets."""
    rows = []
    for entry in pool.entries:
        for X, y in ((entry.train_X, entry.train_y), (entry.neg_X, entry.neg_y)):
            for x, target in zip(X, y):
                rows.append(x.tobytes() + np.float64(target).tobytes())
    return len(rows) - len(set(rows))


def build_pairs(pool: ModelPool) -> list[DiscExample]:
    """Member/non-member examples for every entry; balanced by construction."""
    examples: list[DiscExample] = []
    for idx, entry in enumerate(pool.entries):
        flat = entry.params.flat
        for X, y, label in ((entry.train_X, entry.train_y, 1),
                            (entry.neg_X, entry.neg_y, 0)):
            losses = per_sample_losses(entry.params, X, y, pool.task_kind)
            block = np.hstack([X, np.tile(flat, (len(X), 1)), losses[:, None]])
            examples.extend(
                DiscExample(features=row, label=label, entry_index=idx)
                for row in block
            )
    return examples


def examples_to_arrays(examples: Sequence[DiscExample]) -> tuple[np.ndarray, np.ndarray]:
    if not examples:
        raise InvalidArgumentError("example list is empty")
    Z = np.vstack([ex.features for ex in examples])
    labels = np.asarray([ex.label for ex in examples], dtype=np.float64)
    return Z, labels


def split_examples_by_entry(
    examples: Sequence[DiscExample], eval_entries: Sequence[int]
) -> tuple[list[DiscExample], list[DiscExample]]:
    """Model-level split: held-out entries never contribute training examples."""
    eval_set = set(eval_entries)
    train_ex = [ex for ex in examples if ex.entry_index not in eval_set]
    eval_ex = [ex for ex in examples if ex.entry_index in eval_set]
    return train_ex, eval_ex


@dataclass
class Discriminator:
    """Fitted membership classifier plus its feature standardization."""

    clf: DenseNetClassifier
    feature_mean: np.ndarray
    feature_scale: np.ndarray

    def _transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.feature_mean) / self.feature_scale

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.clf.predict(self._transform(features))

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return self.clf.predict_proba(self._transform(features))[:, 1]


def train_discriminator(
    examples: Sequence[DiscExample],
    disc_config: Optional[DiscriminatorConfig] = None,
) -> Discriminator:
    """Fit the feed-forward discriminator on member/non-member examples."""
    disc_config = disc_config or DiscriminatorConfig()
    Z, labels = examples_to_arrays(examples)
    if len(np.unique(labels)) < 2:
        raise InvalidArgumentError("discriminator needs both labels present")
    if disc_config.standardize:
        mean = Z.mean(axis=0)
        scale = Z.std(axis=0)
        scale[scale == 0.0] = 1.0
    else:
        mean = np.zeros(Z.shape[1])
        scale = np.ones(Z.shape[1])
    clf = DenseNetClassifier(
        hidden_dims=disc_config.hidden_dims,
        epochs=disc_config.epochs,
        learning_rate=disc_config.learning_rate,
        random_state=disc_config.seed,
    )
    clf.fit((Z - mean) / scale, labels)
    return Discriminator(clf=clf, feature_mean=mean, feature_scale=scale)


def estimate_mis(g_psi, eval_examples: Sequence[DiscExample]) -> MisEstimate:
    """Held-out accuracy of the discriminator, clamped at chance, to security."""
    Z, labels = examples_to_arrays(eval_examples)
    preds = np.asarray(g_psi.predict(Z), dtype=np.float64)
    accuracy = float(np.mean(preds == labels))
    mis = 2.0 * (1.0 - max(accuracy, 0.5))
    return MisEstimate(accuracy=accuracy, mis=mis, n_eval=len(labels))
