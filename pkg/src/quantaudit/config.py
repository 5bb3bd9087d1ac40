"""Experiment configuration: schema, YAML loading, validation, seed derivation.

A single YAML document drives the whole pipeline: the mixture grid, the
training recipe, the quantizer list, run counts, optional baseline and
oracle stages, and the output directory.  Every run's seed derives from
(master_seed, config digest, run labels), so re-running a config is
bit-reproducible and parallel-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .exceptions import ConfigError
from .mis_baseline import DiscriminatorConfig
from .nets import TrainConfig
from .quantizers import QuantizerSpec
from .utils import json_digest

DEFAULT_CENTER_SCALE = 1.0
DEFAULT_STABILITY_SIZES = (5, 10, 20, 30)


@dataclass(frozen=True)
class MixtureConfig:
    """One cell of the mixture grid."""

    index: int
    dim: int
    k_modes: int
    sigma: float
    center_scale: float

    @property
    def label(self) -> str:
        return f"mix{self.index}"


@dataclass(frozen=True)
class OracleTaskConfig:
    name: str
    sample_probs: tuple[float, ...]
    loss_table: tuple[tuple[float, ...], ...]
    n_values: tuple[int, ...]


@dataclass(frozen=True)
class BaselineConfig:
    n_eval_entries: int = 6
    discriminator: DiscriminatorConfig = DiscriminatorConfig()


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment end to end."""

    dims: list[int]
    k_modes: list[int]
    sigmas: list[float]
    quantizers: list[QuantizerSpec]
    train: TrainConfig
    k_run: int
    n_samples: int
    val_fraction: float
    output_dir: str
    master_seed: int = 0
    center_scale: float = DEFAULT_CENTER_SCALE
    parallel: int = 1
    save_records: bool = True
    stability_subset_sizes: list[int] = field(
        default_factory=lambda: list(DEFAULT_STABILITY_SIZES))
    stability_resamples: int = 100
    baseline: Optional[BaselineConfig] = None
    oracle_tasks: list[OracleTaskConfig] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.k_run < 1:
            raise ConfigError("k_run must be >= 1")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in [0, 1)")
        if not self.dims or not self.k_modes or not self.sigmas:
            raise ConfigError("mixture grid must be non-empty")
        if not self.quantizers:
            raise ConfigError("at least one quantizer is required")
        names = [q.display_name for q in self.quantizers]
        if len(set(names)) != len(names):
            raise ConfigError(f"quantizer names must be unique, got {names}")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        if self.stability_resamples < 1:
            raise ConfigError("stability_resamples must be >= 1")

    @property
    def mixtures(self) -> list[MixtureConfig]:
        grid = []
        index = 0
        for dim in self.dims:
            for k in self.k_modes:
                for sigma in self.sigmas:
                    grid.append(MixtureConfig(index=index, dim=dim, k_modes=k,
                                              sigma=sigma, center_scale=self.center_scale))
                    index += 1
        return grid

    @property
    def ranked_quantizers(self) -> list[QuantizerSpec]:
        """Quantizers included in privacy rankings.  Identity is reported as
        the unquantized reference, not ranked, unless it is the only
        configured quantizer."""
        ranked = [q for q in self.quantizers if q.kind != "identity"]
        return ranked if ranked else list(self.quantizers)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "k_modes": list(self.k_modes),
            "sigmas": list(self.sigmas),
            "center_scale": self.center_scale,
            "n_samples": self.n_samples,
            "val_fraction": self.val_fraction,
            "k_run": self.k_run,
            "master_seed": self.master_seed,
            "parallel": self.parallel,
            "save_records": self.save_records,
            "stability_subset_sizes": list(self.stability_subset_sizes),
            "stability_resamples": self.stability_resamples,
            "output_dir": self.output_dir,
            "quantizers": [q.to_dict() for q in self.quantizers],
            "train": {
                "epochs": self.train.epochs,
                "learning_rate": self.train.learning_rate,
                "adam_beta1": self.train.adam_beta1,
                "adam_beta2": self.train.adam_beta2,
                "adam_eps": self.train.adam_eps,
                "task_kind": self.train.task_kind,
            },
            "baseline": None if self.baseline is None else {
                "n_eval_entries": self.baseline.n_eval_entries,
                "discriminator": {
                    "hidden_dims": list(self.baseline.discriminator.hidden_dims),
                    "learning_rate": self.baseline.discriminator.learning_rate,
                    "epochs": self.baseline.discriminator.epochs,
                    "standardize": self.baseline.discriminator.standardize,
                },
            },
            "oracle_tasks": [
                {
                    "name": t.name,
                    "sample_probs": list(t.sample_probs),
                    "loss_table": [list(row) for row in t.loss_table],
                    "n_values": list(t.n_values),
                }
                for t in self.oracle_tasks
            ],
        }

    @property
    def digest(self) -> str:
        """Content digest of everything that affects computed results."""
        doc = self.to_dict()
        # execution details don't change results
        for key in ("output_dir", "parallel", "save_records"):
            doc.pop(key, None)
        return json_digest(doc)


def _require(doc: dict, key: str, context: str = "config"):
    if key not in doc:
        raise ConfigError(f"{context}: missing required key {key!r}")
    return doc[key]


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    known = {
        "dims", "k_modes", "sigmas", "center_scale", "n_samples", "val_fraction",
        "k_run", "master_seed", "parallel", "save_records", "output_dir",
        "quantizers", "train", "baseline", "oracle_tasks",
        "stability_subset_sizes", "stability_resamples",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    train_doc = dict(_require(doc, "train"))
    try:
        train = TrainConfig(
            epochs=int(_require(train_doc, "epochs", "train")),
            learning_rate=float(_require(train_doc, "learning_rate", "train")),
            adam_beta1=float(train_doc.get("adam_beta1", 0.9)),
            adam_beta2=float(train_doc.get("adam_beta2", 0.999)),
            adam_eps=float(train_doc.get("adam_eps", 1e-8)),
            task_kind=train_doc.get("task_kind", "classification"),
        )
    except ValueError as exc:
        raise ConfigError(f"train section invalid: {exc}") from exc

    try:
        quantizers = [QuantizerSpec.from_dict(q) for q in _require(doc, "quantizers")]
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"quantizers section invalid: {exc}") from exc

    baseline = None
    if doc.get("baseline") is not None:
        b = doc["baseline"]
        disc_doc = b.get("discriminator", {})
        try:
            disc = DiscriminatorConfig(
                hidden_dims=tuple(disc_doc.get("hidden_dims", (256, 256))),
                learning_rate=float(disc_doc.get("learning_rate", 1e-3)),
                epochs=int(disc_doc.get("epochs", 200)),
                standardize=bool(disc_doc.get("standardize", True)),
            )
        except ValueError as exc:
            raise ConfigError(f"discriminator section invalid: {exc}") from exc
        baseline = BaselineConfig(
            n_eval_entries=int(b.get("n_eval_entries", 6)),
            discriminator=disc,
        )
        if baseline.n_eval_entries < 1:
            raise ConfigError("baseline.n_eval_entries must be >= 1")

    oracle_tasks = []
    for i, t in enumerate(doc.get("oracle_tasks") or []):
        probs = _require(t, "sample_probs", f"oracle_tasks[{i}]")
        table = _require(t, "loss_table", f"oracle_tasks[{i}]")
        oracle_tasks.append(OracleTaskConfig(
            name=str(t.get("name", f"task{i}")),
            sample_probs=tuple(float(p) for p in probs),
            loss_table=tuple(tuple(float(v) for v in row) for row in table),
            n_values=tuple(int(n) for n in t.get("n_values", (1, 2, 4, 8))),
        ))

    return ExperimentConfig(
        dims=[int(d) for d in _as_list(_require(doc, "dims"))],
        k_modes=[int(k) for k in _as_list(_require(doc, "k_modes"))],
        sigmas=[float(s) for s in _as_list(_require(doc, "sigmas"))],
        center_scale=float(doc.get("center_scale", DEFAULT_CENTER_SCALE)),
        quantizers=quantizers,
        train=train,
        k_run=int(_require(doc, "k_run")),
        n_samples=int(_require(doc, "n_samples")),
        val_fraction=float(_require(doc, "val_fraction")),
        output_dir=str(_require(doc, "output_dir")),
        master_seed=int(doc.get("master_seed", 0)),
        parallel=int(doc.get("parallel", 1)),
        save_records=bool(doc.get("save_records", True)),
        stability_subset_sizes=[int(s) for s in doc.get(
            "stability_subset_sizes", DEFAULT_STABILITY_SIZES)],
        stability_resamples=int(doc.get("stability_resamples", 100)),
        baseline=baseline,
        oracle_tasks=oracle_tasks,
    )


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return config_from_dict(doc)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
