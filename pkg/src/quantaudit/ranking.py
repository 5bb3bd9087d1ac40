"""Quantizer rankings, rank correlations, and resampled stability reports."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.stats
from sklearn.metrics import r2_score, roc_auc_score

from .exceptions import (
    InvalidArgumentError,
    InvalidSpecError,
    UndefinedCorrelationError,
    UndefinedRatioError,
)

METRIC_KINDS = ("r_qn", "mis", "accuracy", "auroc", "r2")


@dataclass
class RunMatrix:
    """Per-run metric values for each quantizer: rows quantizers, cols runs."""

    quantizer_names: list[str]
    values: np.ndarray
    metric_kind: str = "r_qn"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidSpecError("values must be a (quantizers x runs) matrix")
        if len(self.quantizer_names) != self.values.shape[0]:
            raise InvalidSpecError("one row per quantizer name required")
        if np.isnan(self.values).any():
            raise InvalidSpecError("run matrix must not contain NaN")
        if self.metric_kind not in METRIC_KINDS:
            raise InvalidSpecError(f"metric_kind must be one of {METRIC_KINDS}")

    @property
    def n_runs(self) -> int:
        return self.values.shape[1]


@dataclass
class StabilityReport:
    """Resampled ranking stability across run-subset sizes."""

    quantizer_names: list[str]
    subset_sizes: list[int]
    n_resamples: int
    # rank_histograms[size] is (quantizer x rank) counts over resamples
    rank_histograms: dict[int, np.ndarray] = field(default_factory=dict)
    spearman_vs_full: dict[int, np.ndarray] = field(default_factory=dict)
    modal_ranking: dict[int, list[str]] = field(default_factory=dict)
    mean_rank_ranking: dict[int, list[str]] = field(default_factory=dict)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation: Pearson correlation of mean-rank vectors."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidArgumentError("inputs must be equal-length vectors")
    if xs.size < 2:
        raise UndefinedCorrelationError("need at least 2 points")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = scipy.stats.spearmanr(xs, ys).statistic
    if np.isnan(rho):
        raise UndefinedCorrelationError("zero rank variance in an input")
    return float(rho)


def rank_quantizers(matrix: RunMatrix) -> list[str]:
    """Names ordered most-private first: by mean metric descending, ties by name."""
    if matrix.values.shape[0] == 0 or matrix.n_runs == 0:
        raise InvalidArgumentError("run matrix must be non-empty")
    means = matrix.values.mean(axis=1)
    order = sorted(zip(matrix.quantizer_names, means), key=lambda t: (-t[1], t[0]))
    return [name for name, _ in order]


def _ranking_positions(ranking: Sequence[str]) -> dict[str, int]:
    return {name: pos for pos, name in enumerate(ranking)}


def stability_analysis(
    matrix: RunMatrix,
    subset_sizes: Sequence[int],
    n_resamples: int,
    seed: int,
) -> StabilityReport:
    """Rank on random run subsets (without replacement) and summarize.

    Per subset size: a (quantizer x rank) histogram over resamples, the
    Spearman correlation of every resampled ranking against the full-run
    ranking, plus two labeled aggregate rankings (modal rank and mean rank).
    """
    for size in subset_sizes:
        if size < 1 or size > matrix.n_runs:
            raise InvalidArgumentError(
                f"subset size {size} outside [1, {matrix.n_runs}]"
            )
    if n_resamples < 1:
        raise InvalidArgumentError("n_resamples must be >= 1")
    names = matrix.quantizer_names
    q = len(names)
    full_pos = _ranking_positions(rank_quantizers(matrix))
    full_vec = np.array([full_pos[name] for name in names], dtype=np.float64)

    rng = np.random.default_rng(seed)
    report = StabilityReport(quantizer_names=list(names),
                             subset_sizes=list(subset_sizes),
                             n_resamples=n_resamples)
    for size in subset_sizes:
        hist = np.zeros((q, q), dtype=np.int64)
        rhos = np.empty(n_resamples)
        rank_sums = np.zeros(q)
        for i in range(n_resamples):
            cols = rng.choice(matrix.n_runs, size=size, replace=False)
            sub = RunMatrix(names, matrix.values[:, cols], matrix.metric_kind)
            pos = _ranking_positions(rank_quantizers(sub))
            sub_vec = np.array([pos[name] for name in names], dtype=np.float64)
            for j in range(q):
                hist[j, int(sub_vec[j])] += 1
            rank_sums += sub_vec
            rhos[i] = spearman(sub_vec, full_vec)
        report.rank_histograms[size] = hist
        report.spearman_vs_full[size] = rhos
        modal = hist.argmax(axis=1)
        report.modal_ranking[size] = [
            name for name, _ in sorted(zip(names, modal), key=lambda t: (t[1], t[0]))
        ]
        mean_rank = rank_sums / n_resamples
        report.mean_rank_ranking[size] = [
            name for name, _ in sorted(zip(names, mean_rank), key=lambda t: (t[1], t[0]))
        ]
    return report


def relative_performance(quantized_metric: float, original_metric: float) -> float:
    """Quantized-over-original metric ratio."""
    if original_metric == 0:
        raise UndefinedRatioError("original metric is zero")
    return quantized_metric / original_metric


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outranks a random negative (ties half)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise InvalidArgumentError("need both labels present")
    return float(roc_auc_score(labels, scores))


def r_squared(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    """Coefficient of determination against the mean predictor."""
    return float(r2_score(np.asarray(y_true), np.asarray(y_pred)))
