"""Minimal dense networks on flat float64 parameter vectors.

Models are 1-2 dense layers with a single scalar output (logit for
classification, value for regression).  Parameters live in one flat vector
so post-training quantizers and checkpoint recording stay trivial; layer
weights are exposed as views into that vector.  Training is full-batch
Adam with a checkpoint after every epoch, fully deterministic given seeds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import Dataset, TASK_CLASSIFICATION, TASK_KINDS
from .exceptions import InvalidArgumentError, InvalidSpecError, ShapeError

ACT_NONE = "none"
ACT_RELU = "relu"
SIGMOID_CLAMP = 1e-12  # keeps BCE finite at saturated logits


@dataclass(frozen=True)
class NetArchitecture:
    """Layer sizes of a dense net with scalar output."""

    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    use_bias: bool = True
    activation: str = ACT_RELU

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.input_dim < 1:
            raise InvalidSpecError("input_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise InvalidSpecError("hidden dims must be >= 1")
        if self.activation not in (ACT_NONE, ACT_RELU):
            raise InvalidSpecError("activation must be 'none' or 'relu'")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """[(out, in)] per layer, last layer has out == 1."""
        dims = (self.input_dim, *self.hidden_dims, 1)
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def n_params(self) -> int:
        return sum(o * i + (o if self.use_bias else 0) for o, i in self.layer_shapes)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "use_bias": self.use_bias,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetArchitecture":
        return cls(
            input_dim=doc["input_dim"],
            hidden_dims=tuple(doc["hidden_dims"]),
            use_bias=doc["use_bias"],
            activation=doc["activation"],
        )


@dataclass
class ModelParams:
    """A parameter assignment for an architecture, stored flat."""

    arch: NetArchitecture
    flat: np.ndarray

    def __post_init__(self) -> None:
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.arch.n_params,):
            raise ShapeError(
                f"flat vector has {self.flat.shape}, arch needs ({self.arch.n_params},)"
            )

    @property
    def out_dim(self) -> int:
        return 1

    @property
    def layers(self) -> list[tuple[np.ndarray, Optional[np.ndarray]]]:
        """(weight, bias) views into the flat vector, one pair per layer."""
        out = []
        offset = 0
        for o, i in self.arch.layer_shapes:
            w = self.flat[offset:offset + o * i].reshape(o, i)
            offset += o * i
            b = None
            if self.arch.use_bias:
                b = self.flat[offset:offset + o]
                offset += o
            out.append((w, b))
        return out

    def flatten(self) -> np.ndarray:
        return self.flat.copy()

    @classmethod
    def unflatten(cls, flat: np.ndarray, arch: NetArchitecture) -> "ModelParams":
        return cls(arch=arch, flat=np.asarray(flat, dtype=np.float64).copy())


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch Adam training hyperparameters.

    ``init_scale`` multiplies the default centered-uniform weight range
    (init_scale / sqrt(fan_in)); biases always start at zero.
    """

    epochs: int
    learning_rate: float
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    task_kind: str = TASK_CLASSIFICATION
    batch_mode: str = "full_batch"
    init_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidSpecError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidSpecError("learning_rate must be positive")
        for beta in (self.adam_beta1, self.adam_beta2):
            if not 0 < beta < 1:
                raise InvalidSpecError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise InvalidSpecError("adam_eps must be positive")
        if self.task_kind not in TASK_KINDS:
            raise InvalidSpecError(f"unknown task_kind {self.task_kind!r}")
        if self.batch_mode != "full_batch":
            raise InvalidSpecError("only full_batch training is supported")
        if self.init_scale <= 0:
            raise InvalidSpecError("init_scale must be positive")


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    step: int
    m: np.ndarray
    v: np.ndarray


def init_adam_state(n_params: int) -> AdamState:
    return AdamState(step=0, m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    opt_state: AdamState,
    config: TrainConfig,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on flat vectors; pure in all inputs."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ShapeError("grads shape must match params shape")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = opt_state.step + 1
    m = b1 * opt_state.m + (1.0 - b1) * grads
    v = b2 * opt_state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new_params = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new_params, AdamState(step=t, m=m, v=v)


def _check_task(task_kind: str) -> None:
    if task_kind not in TASK_KINDS:
        raise InvalidArgumentError(f"unknown task_kind {task_kind!r}")


def _forward_full(params: ModelParams, X: np.ndarray) -> tuple[np.ndarray, list, list]:
    """Forward pass returning (outputs, activations, pre-activations)."""
    a = X
    activations = [a]
    zs = []
    layers = params.layers
    for idx, (w, b) in enumerate(layers):
        z = a @ w.T
        if b is not None:
            z = z + b
        zs.append(z)
        if idx < len(layers) - 1 and params.arch.activation == ACT_RELU:
            a = np.maximum(z, 0.0)
        else:
            a = z
        activations.append(a)
    return a[:, 0], activations, zs


def forward_batch(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Scalar model output per row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.arch.input_dim:
        raise ShapeError(
            f"X has shape {X.shape}, model expects (*, {params.arch.input_dim})"
        )
    out, _, _ = _forward_full(params, X)
    return out


def forward(params: ModelParams, x: np.ndarray) -> float:
    """Scalar output (logit or regression value) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.arch.input_dim:
        raise ShapeError(
            f"x has shape {x.shape}, model expects ({params.arch.input_dim},)"
        )
    return float(forward_batch(params, x[None, :])[0])


def sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


def bce_from_probs(probs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    p = np.clip(probs, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    return -(ys * np.log(p) + (1.0 - ys) * np.log1p(-p))


def per_sample_losses(
    params: ModelParams, X: np.ndarray, ys: np.ndarray, task_kind: str
) -> np.ndarray:
    """Loss of the model on each sample, in row order."""
    _check_task(task_kind)
    ys = np.asarray(ys, dtype=np.float64)
    out = forward_batch(params, X)
    if task_kind == TASK_CLASSIFICATION:
        if ys.size and not np.isin(ys, (0.0, 1.0)).all():
            raise InvalidArgumentError("classification targets must be 0/1")
        return bce_from_probs(sigmoid(out), ys)
    return (out - ys) ** 2


def per_sample_loss(params: ModelParams, z: tuple, task_kind: str) -> float:
    """Loss on a single (x, y) pair: clamped BCE or squared error."""
    x, y = z
    x = np.asarray(x, dtype=np.float64)
    return float(per_sample_losses(params, x[None, :], np.asarray([y]), task_kind)[0])


def _output_grad(out: np.ndarray, ys: np.ndarray, task_kind: str) -> np.ndarray:
    n = len(ys)
    if task_kind == TASK_CLASSIFICATION:
        return (sigmoid(out) - ys) / n
    return 2.0 * (out - ys) / n


def canonical_order(X: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Content-based deterministic sample order (digest sort).

    Reordering a dataset leaves the sorted sequence (hence every full-batch
    reduction over it) bitwise unchanged.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    keys = np.empty(len(X), dtype=np.uint64)
    for i in range(len(X)):
        h = hashlib.blake2b(X[i].tobytes(), digest_size=8)
        h.update(ys[i].tobytes())
        keys[i] = int.from_bytes(h.digest(), "little")
    return np.argsort(keys, kind="stable")


def _gradient_arrays(
    params: ModelParams, X: np.ndarray, ys: np.ndarray, task_kind: str
) -> np.ndarray:
    """Mean loss gradient, assuming rows are already in canonical order."""
    out, activations, zs = _forward_full(params, X)
    delta = _output_grad(out, ys, task_kind)[:, None]
    layers = params.layers
    grads: list[np.ndarray] = []
    for idx in range(len(layers) - 1, -1, -1):
        w, b = layers[idx]
        a_prev = activations[idx]
        g_w = delta.T @ a_prev
        grads.append(g_w.ravel() if b is None else np.concatenate([g_w.ravel(), delta.sum(axis=0)]))
        if idx > 0:
            delta = delta @ w
            if params.arch.activation == ACT_RELU:
                delta = delta * (zs[idx - 1] > 0.0)
    return np.concatenate(grads[::-1])


def gradient(params: ModelParams, dataset: Dataset, task_kind: str) -> np.ndarray:
    """Full-batch mean gradient of the per-sample loss, as a flat vector.

    Samples are reduced in canonical (content-sorted) order so the result
    is invariant to how the dataset happens to be ordered.
    """
    _check_task(task_kind)
    if len(dataset) == 0:
        raise InvalidArgumentError("gradient of an empty dataset is undefined")
    order = canonical_order(dataset.xs, dataset.ys)
    return _gradient_arrays(params, dataset.xs[order], dataset.ys[order], task_kind)


def init_params(arch: NetArchitecture, seed: int) -> ModelParams:
    """Centered-uniform weight init scaled by 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(arch.n_params)
    offset = 0
    for o, i in arch.layer_shapes:
        scale = 1.0 / np.sqrt(i)
        flat[offset:offset + o * i] = rng.uniform(-scale, scale, size=o * i)
        offset += o * i
        if arch.use_bias:
            offset += o  # biases stay zero
    return ModelParams(arch=arch, flat=flat)


@dataclass
class Trajectory:
    """Per-epoch parameter checkpoints of one training run."""

    arch: NetArchitecture
    checkpoints: Optional[np.ndarray]  # (epochs, n_params) or None
    final_flat: np.ndarray
    init_seed: int = 0

    def __len__(self) -> int:
        return 0 if self.checkpoints is None else len(self.checkpoints)

    @property
    def final_params(self) -> ModelParams:
        return ModelParams(arch=self.arch, flat=self.final_flat)

    def checkpoint_params(self, epoch_index: int) -> ModelParams:
        if self.checkpoints is None:
            raise InvalidArgumentError("trajectory was trained without checkpoints")
        return ModelParams(arch=self.arch, flat=self.checkpoints[epoch_index])

    def __iter__(self):
        for i in range(len(self)):
            yield self.checkpoint_params(i)


def train(
    train_set: Dataset,
    config: TrainConfig,
    init_seed: Optional[int] = None,
    arch: Optional[NetArchitecture] = None,
    keep_checkpoints: bool = True,
) -> Trajectory:
    """Full-batch Adam training with a checkpoint recorded after every epoch.

    ``arch`` defaults to a bias-ful single dense layer on the training
    features.  ``init_seed`` defaults to ``config.seed``.
    """
    if len(train_set) == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    if train_set.task_kind != config.task_kind:
        raise InvalidArgumentError(
            f"dataset task {train_set.task_kind!r} != config task {config.task_kind!r}"
        )
    if arch is None:
        arch = NetArchitecture(input_dim=train_set.xs.shape[1])
    if init_seed is None:
        init_seed = config.seed

    order = canonical_order(train_set.xs, train_set.ys)
    X = np.ascontiguousarray(train_set.xs[order])
    ys = np.ascontiguousarray(train_set.ys[order])

    params = init_params(arch, init_seed)
    flat = params.flat
    state = init_adam_state(arch.n_params)
    checkpoints = np.empty((config.epochs, arch.n_params)) if keep_checkpoints else None
    model = ModelParams(arch=arch, flat=flat)
    for epoch in range(config.epochs):
        grads = _gradient_arrays(model, X, ys, config.task_kind)
        flat, state = adam_step(flat, grads, state, config)
        model = ModelParams(arch=arch, flat=flat)
        if checkpoints is not None:
            checkpoints[epoch] = flat
    return Trajectory(arch=arch, checkpoints=checkpoints, final_flat=flat,
                      init_seed=init_seed)


def classification_accuracy(params: ModelParams, X: np.ndarray, ys: np.ndarray) -> float:
    """0.5-threshold accuracy of the sigmoid classifier."""
    logits = forward_batch(params, X)
    preds = (logits >= 0.0).astype(np.float64)
    return float(np.mean(preds == np.asarray(ys, dtype=np.float64)))


def params_to_json(params: ModelParams) -> str:
    """Flat parameter vector plus shape descriptor, as one JSON document."""
    return json.dumps({"arch": params.arch.to_dict(), "flat": params.flat.tolist()})


def params_from_json(text: str) -> ModelParams:
    doc = json.loads(text)
    arch = NetArchitecture.from_dict(doc["arch"])
    return ModelParams(arch=arch, flat=np.asarray(doc["flat"], dtype=np.float64))


def save_trajectory(trajectory: Trajectory, path: Path) -> None:
    """One JSON file per run: shape descriptor plus all flat checkpoints."""
    doc = {
        "arch": trajectory.arch.to_dict(),
        "init_seed": trajectory.init_seed,
        "final": trajectory.final_flat.tolist(),
        "checkpoints": None if trajectory.checkpoints is None
        else trajectory.checkpoints.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_trajectory(path: Path) -> Trajectory:
    doc = json.loads(Path(path).read_text())
    arch = NetArchitecture.from_dict(doc["arch"])
    ckpts = doc["checkpoints"]
    return Trajectory(
        arch=arch,
        checkpoints=None if ckpts is None else np.asarray(ckpts, dtype=np.float64),
        final_flat=np.asarray(doc["final"], dtype=np.float64),
        init_seed=doc["init_seed"],
    )
