"""End-to-end experiment orchestration over an artifact directory.

Stages (each resumable, each writing its own files):

  runs        one training trajectory per (mixture, run): probe every
              quantizer, score it, record accuracies and final parameters
  summarize   collect per-run scores into summary/run_summary.csv
  baseline    train membership discriminators on the pooled run models,
              one per quantizer, and estimate attack accuracy / security
  oracle      exact enumeration curves for configured discrete tasks
  report      rankings, stability tables, scatter and trade-off CSVs

All artifacts are plain JSON/CSV.  Every stage derives its seeds from
(master_seed, config digest, labels), so outputs are a deterministic
function of the config document.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, MixtureConfig, dump_config
from .datasets import Dataset, augment_dataset, make_mixture_spec, sample_dataset, split
from .exact_oracle import DiscreteTask, rate_curve
from .exceptions import (
    ArtifactError,
    DegenerateTrajectoryError,
    DegenerateVarianceError,
    UndefinedCorrelationError,
)
from .mis_baseline import (
    build_pairs,
    estimate_mis,
    pool_from_models,
    split_examples_by_entry,
    train_discriminator,
)
from .nets import (
    ModelParams,
    NetArchitecture,
    TrainConfig,
    classification_accuracy,
    train,
)
from .privacy_score import (
    compute_r,
    probe_trajectory,
    summary_row,
    write_records_jsonl,
)
from .quantizers import QuantizerSpec, quantize
from .ranking import (
    RunMatrix,
    rank_quantizers,
    relative_performance,
    spearman,
    stability_analysis,
)
from .utils import derive_seed, guarded_write_text

RUN_SUMMARY_COLUMNS = ["run_id", "quantizer", "r_qn", "delta2", "argmax_k", "n_records_used"]
BASELINE_COLUMNS = ["quantizer", "accuracy", "mis", "n_eval", "seed"]


def _quantizer_slug(name: str) -> str:
    return name.lower().replace(" ", "_").replace("%", "pct").replace(".", "p")


@dataclass
class RunSeeds:
    data: int
    split: int
    init: int
    negatives: int


def derive_run_seeds(config: ExperimentConfig, mixture: MixtureConfig, run: int) -> RunSeeds:
    base = (config.master_seed, config.digest, mixture.label, run)
    return RunSeeds(
        data=derive_seed(*base, "data"),
        split=derive_seed(*base, "split"),
        init=derive_seed(*base, "init"),
        negatives=derive_seed(*base, "negatives"),
    )


def mixture_spec_seed(config: ExperimentConfig, mixture: MixtureConfig) -> int:
    # centers are shared by all runs of one mixture configuration
    return derive_seed(config.master_seed, config.digest, mixture.label, "centers")


def _run_dataset(config: ExperimentConfig, mixture: MixtureConfig,
                 seeds: RunSeeds) -> tuple[Dataset, Dataset]:
    spec = make_mixture_spec(dim=mixture.dim, k_modes=mixture.k_modes,
                             sigma=mixture.sigma, center_scale=mixture.center_scale,
                             seed=mixture_spec_seed(config, mixture))
    dataset = augment_dataset(sample_dataset(spec, config.n_samples, seeds.data))
    return split(dataset, config.val_fraction, seeds.split)


def execute_run(config: ExperimentConfig, mixture: MixtureConfig, run: int,
                out_dir: Path, persist_records: bool) -> dict:
    """Train one model, probe every quantizer, score, and write the run file."""
    seeds = derive_run_seeds(config, mixture, run)
    train_set, val_set = _run_dataset(config, mixture, seeds)
    trajectory = train(train_set, config.train, init_seed=seeds.init)
    final = trajectory.final_params

    records_by_name = probe_trajectory(trajectory, config.quantizers, val_set)
    run_id = f"{mixture.label}-run{run}"
    estimates = {}
    quantized_train_acc = {}
    for spec in config.quantizers:
        name = spec.display_name
        q = quantize(final.flat, spec)
        q_model = ModelParams(arch=final.arch, flat=q.values)
        quantized_train_acc[name] = classification_accuracy(
            q_model, train_set.xs, train_set.ys)
        records = records_by_name[name]
        if persist_records:
            rec_path = out_dir / "records" / f"{run_id}_{_quantizer_slug(name)}.jsonl"
            rec_path.parent.mkdir(parents=True, exist_ok=True)
            write_records_jsonl(rec_path, records, metadata={
                "quantizer": name,
                "quantizer_spec": spec.to_dict(),
                "run_id": run_id,
                "run_seed": seeds.init,
                "config_digest": config.digest,
                "n_val": len(val_set),
            })
        try:
            est = compute_r(records, run_seed=seeds.init)
            estimates[name] = {
                "r_qn": est.r_qn,
                "delta2": est.delta2,
                "argmax_k": est.argmax_k,
                "n_records_used": est.n_records_used,
            }
        except (DegenerateTrajectoryError, DegenerateVarianceError) as exc:
            estimates[name] = {"error": f"{type(exc).__name__}: {exc}"}

    doc = {
        "run_id": run_id,
        "mixture": {"label": mixture.label, "dim": mixture.dim,
                    "k_modes": mixture.k_modes, "sigma": mixture.sigma,
                    "center_scale": mixture.center_scale},
        "run_index": run,
        "seeds": vars(seeds),
        "init_scheme": "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias",
        "train_accuracy": classification_accuracy(final, train_set.xs, train_set.ys),
        "val_accuracy": classification_accuracy(final, val_set.xs, val_set.ys),
        "quantized_train_accuracy": quantized_train_acc,
        "estimates": estimates,
        "final_params": final.flat.tolist(),
        "arch": final.arch.to_dict(),
        "n_train": len(train_set),
        "n_val": len(val_set),
    }
    path = run_path(out_dir, mixture, run)
    guarded_write_text(path, json.dumps(doc), allow_overwrite=True)
    return doc


def run_path(out_dir: Path, mixture: MixtureConfig, run: int) -> Path:
    return Path(out_dir) / "runs" / f"{mixture.label}_run{run}.json"


def _run_worker(args) -> str:
    config_doc, mixture_index, run, out_dir, persist = args
    from .config import config_from_dict

    config = config_from_dict(config_doc)
    mixture = config.mixtures[mixture_index]
    execute_run(config, mixture, run, Path(out_dir), persist)
    return f"{mixture.label}-run{run}"


def stage_runs(config: ExperimentConfig, out_dir: Path, resume: bool = True) -> int:
    """Execute all (mixture, run) tasks, skipping completed run files."""
    out_dir = Path(out_dir)
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    todo = []
    for mixture in config.mixtures:
        for run in range(config.k_run):
            if resume and run_path(out_dir, mixture, run).exists():
                continue
            todo.append((config.to_dict(), mixture.index, run, str(out_dir),
                         config.save_records))
    if not todo:
        return 0
    if config.parallel > 1:
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            list(pool.map(_run_worker, todo))
    else:
        for item in todo:
            _run_worker(item)
    return len(todo)


def load_run_docs(config: ExperimentConfig, out_dir: Path,
                  mixture: MixtureConfig) -> list[dict]:
    docs = []
    for run in range(config.k_run):
        path = run_path(out_dir, mixture, run)
        if not path.exists():
            raise ArtifactError(f"missing run file {path}; run the training stage first")
        docs.append(json.loads(path.read_text()))
    return docs


def _csv_text(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def stage_summarize(config: ExperimentConfig, out_dir: Path) -> Path:
    """Aggregate per-run estimates into summary/run_summary.csv."""
    out_dir = Path(out_dir)
    rows = []
    for mixture in config.mixtures:
        for doc in load_run_docs(config, out_dir, mixture):
            for spec in config.quantizers:
                name = spec.display_name
                est = doc["estimates"].get(name)
                if est is None or "error" in est:
                    continue
                rows.append({
                    "run_id": doc["run_id"],
                    "quantizer": name,
                    "r_qn": repr(est["r_qn"]),
                    "delta2": repr(est["delta2"]),
                    "argmax_k": est["argmax_k"],
                    "n_records_used": est["n_records_used"],
                })
    path = out_dir / "summary" / "run_summary.csv"
    guarded_write_text(path, _csv_text(RUN_SUMMARY_COLUMNS, rows), allow_overwrite=True)
    return path


def stage_baseline(config: ExperimentConfig, out_dir: Path,
                   resume: bool = True) -> list[Path]:
    """Discriminator security estimates per (mixture, quantizer).

    Reuses the models already trained in the runs stage: every run's final
    model plus its training set joins the pool; negative sets are fresh
    disjoint draws from the same mixture.
    """
    if config.baseline is None:
        return []
    out_dir = Path(out_dir)
    paths = []
    for mixture in config.mixtures:
        path = out_dir / "summary" / f"baseline_mis_{mixture.label}.csv"
        paths.append(path)
        if resume and path.exists():
            continue
        docs = load_run_docs(config, out_dir, mixture)
        if len(docs) < 2:
            raise ArtifactError("baseline needs at least 2 completed runs")
        spec = make_mixture_spec(dim=mixture.dim, k_modes=mixture.k_modes,
                                 sigma=mixture.sigma, center_scale=mixture.center_scale,
                                 seed=mixture_spec_seed(config, mixture))
        models, train_sets, neg_sets = [], [], []
        for doc in docs:
            seeds = RunSeeds(**doc["seeds"])
            train_set, _ = _run_dataset(config, mixture, seeds)
            negatives = augment_dataset(
                sample_dataset(spec, len(train_set), seeds.negatives))
            arch = NetArchitecture.from_dict(doc["arch"])
            models.append(ModelParams(arch=arch,
                                      flat=np.asarray(doc["final_params"])))
            train_sets.append((train_set.xs, train_set.ys))
            neg_sets.append((negatives.xs, negatives.ys))

        n_eval = config.baseline.n_eval_entries
        if n_eval >= len(docs):
            raise ArtifactError(
                f"baseline.n_eval_entries={n_eval} must be < number of runs {len(docs)}")
        eval_rng = np.random.default_rng(
            derive_seed(config.master_seed, config.digest, mixture.label, "baseline-split"))
        eval_entries = sorted(eval_rng.choice(len(docs), size=n_eval, replace=False).tolist())

        rows = []
        for q in config.ranked_quantizers:
            pool = pool_from_models(models, train_sets, neg_sets, q,
                                    task_kind=config.train.task_kind)
            examples = build_pairs(pool)
            train_ex, eval_ex = split_examples_by_entry(examples, eval_entries)
            disc_seed = derive_seed(config.master_seed, config.digest, mixture.label,
                                    "disc", q.display_name)
            disc_cfg = config.baseline.discriminator
            disc = train_discriminator(train_ex, type(disc_cfg)(
                hidden_dims=disc_cfg.hidden_dims,
                learning_rate=disc_cfg.learning_rate,
                epochs=disc_cfg.epochs,
                seed=disc_seed,
                standardize=disc_cfg.standardize,
            ))
            est = estimate_mis(disc, eval_ex)
            rows.append({
                "quantizer": q.display_name,
                "accuracy": repr(est.accuracy),
                "mis": repr(est.mis),
                "n_eval": est.n_eval,
                "seed": disc_seed,
            })
        guarded_write_text(path, _csv_text(BASELINE_COLUMNS, rows), allow_overwrite=True)
    return paths


def stage_oracle(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Exact security curves for the configured discrete tasks."""
    out_dir = Path(out_dir)
    paths = []
    for task_cfg in config.oracle_tasks:
        task = DiscreteTask(sample_probs=np.asarray(task_cfg.sample_probs),
                            loss_table=np.asarray(task_cfg.loss_table))
        curve = rate_curve(task, task_cfg.n_values)
        rows = [{"n": n, "mis": repr(mis), "rate": repr(rate)}
                for n, mis, rate in curve]
        path = out_dir / "oracle" / f"rate_{task_cfg.name}.csv"
        guarded_write_text(path, _csv_text(["n", "mis", "rate"], rows),
                           allow_overwrite=True)
        paths.append(path)
    return paths


def _collect_matrix(config: ExperimentConfig, docs: list[dict]) -> Optional[RunMatrix]:
    """Score matrix over runs where every ranked quantizer has an estimate."""
    names = [q.display_name for q in config.ranked_quantizers]
    cols = []
    for doc in docs:
        col = []
        for name in names:
            est = doc["estimates"].get(name)
            if est is None or "error" in est:
                break
            col.append(est["r_qn"])
        else:
            cols.append(col)
    if not cols:
        return None
    return RunMatrix(names, np.asarray(cols, dtype=np.float64).T, metric_kind="r_qn")


def _collect_means(config: ExperimentConfig, docs: list[dict]) -> tuple[dict, dict]:
    """Mean score per ranked quantizer over whichever runs scored it."""
    names = [q.display_name for q in config.ranked_quantizers]
    values: dict[str, list[float]] = {name: [] for name in names}
    for doc in docs:
        for name in names:
            est = doc["estimates"].get(name)
            if est is not None and "error" not in est:
                values[name].append(est["r_qn"])
    means = {name: float(np.mean(v)) for name, v in values.items() if v}
    counts = {name: len(v) for name, v in values.items()}
    return means, counts


def _read_baseline(path: Path) -> dict[str, dict]:
    rows = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            rows[row["quantizer"]] = {
                "accuracy": float(row["accuracy"]),
                "mis": float(row["mis"]),
                "n_eval": int(row["n_eval"]),
            }
    return rows


def emit_report(config: ExperimentConfig, out_dir: Path) -> dict:
    """Write rankings.json, stability CSVs, scatter.csv, tradeoff.csv."""
    out_dir = Path(out_dir)
    if not (out_dir / "summary" / "run_summary.csv").exists():
        raise ArtifactError(
            f"no summaries under {out_dir}; run the pipeline stages first")

    rankings: dict = {}
    stability_rows = []
    spearman_rows = []
    scatter_rows = []
    tradeoff_rows = []
    for mixture in config.mixtures:
        docs = load_run_docs(config, out_dir, mixture)
        means, counts = _collect_means(config, docs)
        if not means:
            raise ArtifactError(f"no usable runs for {mixture.label}")
        ranked_names = sorted(means)
        ranking = rank_quantizers(RunMatrix(
            ranked_names, np.asarray([[means[n]] for n in ranked_names]),
            metric_kind="r_qn"))

        entry = {
            "mixture": vars(mixture) | {"label": mixture.label},
            "runs_per_quantizer": counts,
            "r_qn_ranking": ranking,
            "r_qn_means": {n: means[n] for n in ranking},
            "train_accuracy_mean": float(np.mean([d["train_accuracy"] for d in docs])),
        }

        matrix = _collect_matrix(config, docs)
        sizes = [s for s in config.stability_subset_sizes
                 if matrix is not None and s <= matrix.n_runs]
        if sizes and matrix is not None and len(matrix.quantizer_names) >= 2:
            entry["n_complete_runs"] = matrix.n_runs
            report = stability_analysis(
                matrix, sizes, config.stability_resamples,
                seed=derive_seed(config.master_seed, config.digest,
                                 mixture.label, "stability"))
            entry["stability"] = {
                str(size): {
                    "spearman_mean": float(np.mean(report.spearman_vs_full[size])),
                    "spearman_std": float(np.std(report.spearman_vs_full[size], ddof=1))
                    if config.stability_resamples > 1 else 0.0,
                    "modal_ranking": report.modal_ranking[size],
                    "mean_rank_ranking": report.mean_rank_ranking[size],
                }
                for size in sizes
            }
            for size in sizes:
                hist = report.rank_histograms[size]
                for qi, name in enumerate(report.quantizer_names):
                    for rank_pos in range(hist.shape[1]):
                        if hist[qi, rank_pos]:
                            stability_rows.append({
                                "mixture": mixture.label,
                                "subset_size": size,
                                "quantizer": name,
                                "rank": rank_pos + 1,
                                "frequency": int(hist[qi, rank_pos]),
                            })
                spearman_rows.append({
                    "mixture": mixture.label,
                    "subset_size": size,
                    "spearman_mean": repr(float(np.mean(report.spearman_vs_full[size]))),
                    "spearman_std": repr(
                        float(np.std(report.spearman_vs_full[size], ddof=1))
                        if config.stability_resamples > 1 else 0.0),
                })

        baseline_path = out_dir / "summary" / f"baseline_mis_{mixture.label}.csv"
        baseline = _read_baseline(baseline_path) if baseline_path.exists() else {}
        if baseline:
            mis_names = [n for n in ranking if n in baseline]
            mis_matrix = RunMatrix(
                mis_names,
                np.asarray([[baseline[n]["mis"]] for n in mis_names]),
                metric_kind="mis")
            mis_ranking = rank_quantizers(mis_matrix)
            entry["mis_ranking"] = mis_ranking
            entry["mis_values"] = {n: baseline[n]["mis"] for n in mis_names}
            if len(mis_names) >= 2:
                try:
                    entry["spearman_r_vs_mis"] = spearman(
                        [means[n] for n in mis_names],
                        [baseline[n]["mis"] for n in mis_names])
                except UndefinedCorrelationError:
                    entry["spearman_r_vs_mis"] = None

        for name in ranking:
            scatter_rows.append({
                "mixture": mixture.label,
                "quantizer": name,
                "r_qn_mean": repr(means[name]),
                "mis": repr(baseline[name]["mis"]) if name in baseline else "",
            })

        identity_accs = [d["quantized_train_accuracy"].get("Identity",
                                                           d["train_accuracy"])
                         for d in docs]
        original = float(np.mean(identity_accs))
        for name in ranking:
            q_acc = float(np.mean(
                [d["quantized_train_accuracy"][name] for d in docs]))
            tradeoff_rows.append({
                "mixture": mixture.label,
                "quantizer": name,
                "r_qn_mean": repr(means[name]),
                "quantized_accuracy": repr(q_acc),
                "original_accuracy": repr(original),
                "relative_performance": repr(relative_performance(q_acc, original)),
            })
        rankings[mixture.label] = entry

    report_dir = out_dir / "report"
    guarded_write_text(report_dir / "rankings.json",
                       json.dumps(rankings, indent=2), allow_overwrite=True)
    guarded_write_text(report_dir / "stability.csv",
                       _csv_text(["mixture", "subset_size", "quantizer", "rank",
                                  "frequency"], stability_rows), allow_overwrite=True)
    guarded_write_text(report_dir / "stability_spearman.csv",
                       _csv_text(["mixture", "subset_size", "spearman_mean",
                                  "spearman_std"], spearman_rows), allow_overwrite=True)
    guarded_write_text(report_dir / "scatter.csv",
                       _csv_text(["mixture", "quantizer", "r_qn_mean", "mis"],
                                 scatter_rows), allow_overwrite=True)
    guarded_write_text(report_dir / "tradeoff.csv",
                       _csv_text(["mixture", "quantizer", "r_qn_mean",
                                  "quantized_accuracy", "original_accuracy",
                                  "relative_performance"], tradeoff_rows),
                       allow_overwrite=True)
    return rankings


def stage_gen_data(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Materialize mixture specs and per-run datasets as JSON artifacts."""
    from .datasets import dataset_to_jsonl

    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    paths = []
    for mixture in config.mixtures:
        spec = make_mixture_spec(dim=mixture.dim, k_modes=mixture.k_modes,
                                 sigma=mixture.sigma, center_scale=mixture.center_scale,
                                 seed=mixture_spec_seed(config, mixture))
        spec_path = data_dir / f"{mixture.label}_spec.json"
        guarded_write_text(spec_path, spec.to_json(), allow_overwrite=True)
        paths.append(spec_path)
        for run in range(config.k_run):
            seeds = derive_run_seeds(config, mixture, run)
            dataset = sample_dataset(spec, config.n_samples, seeds.data)
            path = data_dir / f"{mixture.label}_run{run}.jsonl"
            guarded_write_text(path, dataset_to_jsonl(dataset), allow_overwrite=True)
            paths.append(path)
    return paths


def run_experiment(config: ExperimentConfig, resume: bool = True) -> Path:
    """The full pipeline: runs, summaries, baseline, oracle, report."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    guarded_write_text(out_dir / "config.resolved.yaml", dump_config(config),
                       allow_overwrite=not resume)
    stage_runs(config, out_dir, resume=resume)
    stage_summarize(config, out_dir)
    stage_baseline(config, out_dir, resume=resume)
    stage_oracle(config, out_dir)
    emit_report(config, out_dir)
    return out_dir
