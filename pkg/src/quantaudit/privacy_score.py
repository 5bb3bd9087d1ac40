"""Privacy scoring of a quantizer from one training trajectory.

Every epoch checkpoint is quantized and its per-sample validation losses
recorded.  After deduplicating repeated quantized checkpoints, records are
sorted by mean loss; the score is

    r = delta2^2 / (2 * max_k lambda_k),
    lambda_k = Var(L_k - L_1) * (delta2 / delta_k)^2,

where delta_k is the mean-loss gap of the k-th best record to the best one
and L_k its per-sample loss vector.  Larger r means the quantized training
procedure is asymptotically harder to attack via membership inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datasets import Dataset
from .exceptions import (
    DegenerateTrajectoryError,
    DegenerateVarianceError,
    InvalidArgumentError,
)
from .nets import ModelParams, Trajectory, forward_batch, per_sample_losses, sigmoid, bce_from_probs
from .quantizers import QuantizerSpec, quantize, quantize_rows
from .utils import vector_digest

DEFAULT_EPSILON_GAP = 1e-12


@dataclass
class TrajectoryLossRecord:
    """Quantized per-sample validation losses of one epoch checkpoint."""

    epoch: int
    quantized_params_hash: int
    per_sample_losses: np.ndarray
    mean_loss: float


@dataclass
class REstimate:
    """The privacy score of one (run, quantizer) pair plus its ingredients."""

    r_qn: float
    delta2: float
    lambda_values: np.ndarray
    argmax_k: int  # loss-sorted rank (best record is rank 1)
    n_records_used: int
    run_seed: int = 0


def record_epoch(
    params: ModelParams,
    spec: QuantizerSpec,
    val_set: Dataset,
    epoch: int,
) -> TrajectoryLossRecord:
    """Quantize one checkpoint and evaluate it on every validation sample."""
    if len(val_set) == 0:
        raise InvalidArgumentError("validation set must be non-empty")
    quantized = quantize(params.flat, spec)
    q_params = ModelParams(arch=params.arch, flat=quantized.values)
    losses = per_sample_losses(q_params, val_set.xs, val_set.ys, val_set.task_kind)
    return TrajectoryLossRecord(
        epoch=epoch,
        quantized_params_hash=vector_digest(quantized.values),
        per_sample_losses=losses,
        mean_loss=float(np.mean(losses)),
    )


def probe_trajectory(
    trajectory: Trajectory,
    specs: Sequence[QuantizerSpec],
    val_set: Dataset,
) -> dict[str, list[TrajectoryLossRecord]]:
    """Loss records for every (epoch, quantizer) pair of one trajectory.

    Single-layer models take a vectorized path (one matrix product per
    quantizer across all checkpoints); other architectures fall back to
    per-epoch evaluation.
    """
    if trajectory.checkpoints is None:
        raise InvalidArgumentError("trajectory has no recorded checkpoints")
    if len(val_set) == 0:
        raise InvalidArgumentError("validation set must be non-empty")
    out: dict[str, list[TrajectoryLossRecord]] = {}
    arch = trajectory.arch
    single_layer = len(arch.hidden_dims) == 0
    for spec in specs:
        if single_layer:
            out[spec.display_name] = _probe_single_layer(trajectory, spec, val_set)
        else:
            out[spec.display_name] = [
                record_epoch(trajectory.checkpoint_params(i), spec, val_set, epoch=i)
                for i in range(len(trajectory))
            ]
    return out


def _probe_single_layer(
    trajectory: Trajectory, spec: QuantizerSpec, val_set: Dataset
) -> list[TrajectoryLossRecord]:
    arch = trajectory.arch
    d = arch.input_dim
    quantized = quantize_rows(trajectory.checkpoints, spec)
    outputs = val_set.xs @ quantized[:, :d].T
    if arch.use_bias:
        outputs = outputs + quantized[:, d]
    ys = val_set.ys[:, None]
    if val_set.task_kind == "classification":
        loss_matrix = bce_from_probs(sigmoid(outputs), ys)
    else:
        loss_matrix = (outputs - ys) ** 2
    loss_rows = np.ascontiguousarray(loss_matrix.T)
    records = []
    for epoch in range(len(trajectory)):
        losses = loss_rows[epoch]
        records.append(TrajectoryLossRecord(
            epoch=epoch,
            quantized_params_hash=vector_digest(quantized[epoch]),
            per_sample_losses=losses,
            mean_loss=float(np.mean(losses)),
        ))
    return records


def dedup_records(records: Sequence[TrajectoryLossRecord]) -> list[TrajectoryLossRecord]:
    """Keep the earliest-epoch record per distinct quantized checkpoint.

    Output order follows the first occurrence of each checkpoint in the
    input, so epoch-ordered input stays epoch-ordered.
    """
    best: dict[int, TrajectoryLossRecord] = {}
    for rec in records:
        seen = best.get(rec.quantized_params_hash)
        if seen is None or rec.epoch < seen.epoch:
            best[rec.quantized_params_hash] = rec
    return list(best.values())


@dataclass
class _SortedGaps:
    means: np.ndarray          # sorted means of the used records (best first)
    gaps: np.ndarray           # delta_k for k = 2..K, after gap filtering
    lambdas: np.ndarray        # lambda_k aligned with gaps
    delta2: float


def _prepare(records: Sequence[TrajectoryLossRecord], epsilon_gap: float) -> _SortedGaps:
    if epsilon_gap <= 0:
        raise InvalidArgumentError("epsilon_gap must be positive")
    recs = dedup_records(records)
    if len(recs) < 2:
        raise DegenerateTrajectoryError(
            f"need >= 2 distinct quantized checkpoints, got {len(recs)}"
        )
    n_val = len(recs[0].per_sample_losses)
    if any(len(r.per_sample_losses) != n_val for r in recs):
        raise InvalidArgumentError("per-sample loss vectors differ in length")
    if n_val < 2:
        raise InvalidArgumentError("need >= 2 validation samples for a variance")

    recs = sorted(recs, key=lambda r: (r.mean_loss, r.epoch))
    losses = np.asarray([r.per_sample_losses for r in recs], dtype=np.float64)
    means = np.asarray([r.mean_loss for r in recs], dtype=np.float64)

    gaps = means[1:] - means[0]
    keep = gaps >= epsilon_gap
    if not keep.any():
        raise DegenerateTrajectoryError(
            "all comparators sit within epsilon_gap of the best record"
        )
    gaps = gaps[keep]
    diffs = losses[1:][keep] - losses[0]
    sigma2 = np.var(diffs, axis=1, ddof=1)
    delta2 = float(gaps[0])
    lambdas = sigma2 * (delta2 / gaps) ** 2
    used_means = np.concatenate([[means[0]], means[1:][keep]])
    return _SortedGaps(means=used_means, gaps=gaps, lambdas=lambdas, delta2=delta2)


def compute_r(
    records: Sequence[TrajectoryLossRecord],
    epsilon_gap: float = DEFAULT_EPSILON_GAP,
    run_seed: int = 0,
) -> REstimate:
    """Score one trajectory's records; see the module docstring for the formula."""
    prep = _prepare(records, epsilon_gap)
    lam_max = float(np.max(prep.lambdas))
    if lam_max == 0.0:
        raise DegenerateVarianceError(
            "every retained comparator has zero loss-difference variance"
        )
    argmax_idx = int(np.argmax(prep.lambdas))
    r_qn = prep.delta2 ** 2 / (2.0 * lam_max)
    return REstimate(
        r_qn=r_qn,
        delta2=prep.delta2,
        lambda_values=prep.lambdas,
        argmax_k=argmax_idx + 2,
        n_records_used=len(prep.means),
        run_seed=run_seed,
    )


def lambda_profile(
    records: Sequence[TrajectoryLossRecord],
    epsilon_gap: float = DEFAULT_EPSILON_GAP,
) -> tuple[np.ndarray, np.ndarray, int]:
    """(sorted means, lambda curve, argmax rank) over loss-sorted records."""
    prep = _prepare(records, epsilon_gap)
    if float(np.max(prep.lambdas)) == 0.0:
        raise DegenerateVarianceError(
            "every retained comparator has zero loss-difference variance"
        )
    return prep.means, prep.lambdas, int(np.argmax(prep.lambdas)) + 2


def aggregate_runs(estimates: Sequence[REstimate]) -> tuple[float, float, int]:
    """Mean and sample std of the score across runs."""
    if len(estimates) == 0:
        raise InvalidArgumentError("no estimates to aggregate")
    values = np.asarray([e.r_qn for e in estimates], dtype=np.float64)
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std, len(values)


def summary_row(run_id: str, quantizer: str, estimate: REstimate) -> dict:
    """One run-summary CSV row."""
    return {
        "run_id": run_id,
        "quantizer": quantizer,
        "r_qn": estimate.r_qn,
        "delta2": estimate.delta2,
        "argmax_k": estimate.argmax_k,
        "n_records_used": estimate.n_records_used,
    }


def write_records_jsonl(
    path: Path,
    records: Sequence[TrajectoryLossRecord],
    metadata: Optional[dict] = None,
) -> None:
    """One record per line, preceded by a metadata header line."""
    lines = [json.dumps({"kind": "header", **(metadata or {})})]
    for rec in records:
        lines.append(json.dumps({
            "epoch": rec.epoch,
            "hash": rec.quantized_params_hash,
            "mean_loss": rec.mean_loss,
            "per_sample_losses": np.asarray(rec.per_sample_losses).tolist(),
        }))
    Path(path).write_text("\n".join(lines) + "\n")


def read_records_jsonl(path: Path) -> tuple[list[TrajectoryLossRecord], dict]:
    records: list[TrajectoryLossRecord] = []
    metadata: dict = {}
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            if doc.get("kind") == "header":
                metadata = {k: v for k, v in doc.items() if k != "kind"}
                continue
            records.append(TrajectoryLossRecord(
                epoch=doc["epoch"],
                quantized_params_hash=doc["hash"],
                per_sample_losses=np.asarray(doc["per_sample_losses"], dtype=np.float64),
                mean_loss=doc["mean_loss"],
            ))
    return records, metadata
