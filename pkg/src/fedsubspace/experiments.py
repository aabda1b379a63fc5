"""Experiment drivers behind the ``sim`` command.

Each driver runs one experiment kind, writes its CSV files and returns the
summary that goes into ``summary.json``. Files are byte-for-byte
reproducible: floats carry 17 significant digits, JSON keys are sorted and
no timestamps are written.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from ._helpers import _format_float, _json_float
from .concentration import (
    averaged_gram_deviation_experiment,
    gram_deviation_experiment,
    head_sampling_event_rate,
)
from .config import ExperimentConfig
from .engine import finetune, run_training
from .enums import ExperimentKind, MonitorLevel, StreamTag, TrainingMethod
from .exceptions import (
    ContainmentViolatedError,
    DegenerateMeanHeadError,
    DimensionError,
    DivergedError,
    InvalidConfigError,
    InvalidSampleSizeError,
    RankError,
    TargetInfeasibleError,
)
from .linalg import principal_angle_distance
from .lowerbound import construct_adversarial, make_b0_containing_product, paired_dgd_experiment
from .models import ROUND_COLUMNS, RoundMetrics
from .monitors import check_global_hypotheses, global_grad_norm
from .problem import (
    diversity_stats,
    gen_ground_truth,
    gen_init,
    gen_new_client,
    head_sampling_threshold,
)
from .rng import derive_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DIVERGED = 2

SUMMARY_FILE = "summary.json"

# raised when the configured instance cannot be built; numeric failures propagate
_CONFIG_ERRORS = (
    InvalidConfigError,
    DimensionError,
    TargetInfeasibleError,
    RankError,
    DegenerateMeanHeadError,
    ContainmentViolatedError,
    InvalidSampleSizeError,
)


# -- output helpers ---------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _json_float(float(value))
    return value


def write_summary(out_dir: Path, summary: dict[str, Any]) -> Path:
    """Write ``summary.json`` with sorted keys and non-finite floats as null."""
    path = out_dir / SUMMARY_FILE
    text = json.dumps(_jsonable(summary), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_rounds(path: Path, metrics: Sequence[RoundMetrics]) -> Path:
    return write_csv(path, ROUND_COLUMNS, (m.to_row() for m in metrics))


# -- train ------------------------------------------------------------------


def run_train(config: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Train once and write one ``rounds.csv`` row per round.

    Rows need observables, so ``monitor = off`` is raised to ``global``.
    """
    sim = config.sim
    if sim.monitor is MonitorLevel.OFF:
        logger.info("train records every round: using monitor=global")
        sim = sim.replace(monitor=MonitorLevel.GLOBAL)
    try:
        result = run_training(sim)
    except DivergedError as exc:
        write_rounds(out_dir / "rounds.csv", exc.partial_metrics)
        raise
    write_rounds(out_dir / "rounds.csv", result.metrics)
    summary: dict[str, Any] = {
        "dist0": result.dist0,
        "E0": result.E0,
        "stats": result.stats.to_dict(),
        "rounds": len(result.metrics),
    }
    if result.metrics:
        final = result.metrics[-1]
        summary["final"] = final.to_dict()
        trajectory = list(result.metrics)
        if result.initial_metrics is not None:
            trajectory.insert(0, result.initial_metrics)
        flags = check_global_hypotheses(trajectory, result.stats, sim)
        summary["hypotheses"] = flags.to_dict()
        local = [m.local_flags for m in result.metrics if m.local_flags is not None]
        if local:
            summary["local_hypotheses_hold"] = all(flag.all_hold() for flag in local)
            summary["local_worst_margin"] = min(flag.worst_margin for flag in local)
    return summary


# -- fine-tuning ------------------------------------------------------------


def run_finetune(config: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Pretrain with FedAvg and D-GD, then fine-tune both on a new client.

    Every trial draws a fresh instance and shares its initialization between
    the two methods; one ``finetune.csv`` row per (trial, method, n, step).
    """
    sim = config.sim.replace(monitor=MonitorLevel.OFF)
    methods = {
        TrainingMethod.FEDAVG: sim,
        TrainingMethod.DGD: sim.as_dgd(),
    }
    finals: dict[tuple[TrainingMethod, int], list[float]] = {
        (method, n): [] for method in methods for n in config.n_values
    }
    rows: list[list[str]] = []
    for trial in range(config.trials):
        trial_seed = derive_seed(sim.seed, StreamTag.TRIAL, trial)
        gt = gen_ground_truth(sim.d, sim.k, sim.M, sim.noise_sigma, trial_seed)
        init = gen_init(gt, sim.alpha, sim.delta0_target, trial_seed)
        new_client = gen_new_client(gt, config.finetune_noise_sigma, trial_seed)
        for method, method_sim in methods.items():
            trained = run_training(
                method_sim.replace(seed=trial_seed),
                ground_truth=gt,
                init_state=init,
            ).final_state
            for n in config.n_values:
                trace = finetune(
                    trained,
                    new_client,
                    config.tau_prime,
                    config.alpha_ft,
                    n,
                    derive_seed(trial_seed, StreamTag.FINETUNE, n),
                )
                finals[(method, n)].append(trace.final_error)
                rows.extend(
                    [str(trial), method.value, str(n), str(step), _format_float(error)]
                    for step, error in enumerate(trace.errors)
                )
        logger.info("fine-tuning trial %d/%d done", trial + 1, config.trials)

    write_csv(out_dir / "finetune.csv", ("trial", "method", "n", "step", "error"), rows)
    per_n: dict[str, Any] = {}
    for n in config.n_values:
        per_n[str(n)] = {
            method.value: {
                "mean_final_error": float(np.mean(finals[(method, n)])),
                "std_final_error": float(np.std(finals[(method, n)])),
            }
            for method in methods
        }
    fedavg_better = all(
        np.mean(finals[(TrainingMethod.FEDAVG, n)]) < np.mean(finals[(TrainingMethod.DGD, n)])
        for n in config.n_values
    )
    return {"per_n": per_n, "fedavg_better_for_all_n": fedavg_better}


# -- lower bound ------------------------------------------------------------


def run_lowerbound(config: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Adversarial pair and paired D-GD runs for each configured ``delta0``."""
    sim = config.sim
    gt = gen_ground_truth(sim.d, sim.k, sim.M, 0.0, sim.seed)
    rows: list[list[str]] = []
    reports: dict[str, Any] = {}
    for delta0 in config.delta0_values:
        b0 = make_b0_containing_product(gt.b_star, gt.heads, delta0, sim.seed)
        pair = construct_adversarial(b0, gt.b_star, gt.heads)
        report = paired_dgd_experiment(pair, gt.heads, sim.alpha, sim.T)
        reports[repr(delta0)] = report.to_dict()
        rows.extend(
            [repr(delta0), str(t), _format_float(star), _format_float(prime)]
            for t, (star, prime) in enumerate(
                zip(report.dist_to_star, report.dist_to_star_prime)
            )
        )
    write_csv(
        out_dir / "lowerbound.csv",
        ("delta0", "t", "dist_star", "dist_star_prime"),
        rows,
    )
    return {"pairs": reports}


# -- concentration ----------------------------------------------------------


def run_concentration(config: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Gram deviation against ``b`` and ``M`` plus the head-subsampling event."""
    sim = config.sim
    single = gram_deviation_experiment(
        sim.d, config.d1, config.d2, config.b_values, config.conc_trials, sim.seed
    )
    averaged = averaged_gram_deviation_experiment(
        sim.d, config.d1, config.d2, config.M_values, config.conc_b, config.conc_trials, sim.seed
    )
    rows: list[list[str]] = []
    for name, curve in (("gram_vs_b", single), ("gram_vs_M", averaged)):
        rows.extend(
            [name, str(size), _format_float(mean), _format_float(q95)]
            for size, mean, q95 in zip(
                curve.sample_sizes, curve.mean_deviation, curve.quantile95
            )
        )
    write_csv(out_dir / "concentration.csv", ("experiment", "size", "mean", "q95"), rows)

    gt = gen_ground_truth(sim.d, sim.k, sim.M, 0.0, sim.seed)
    stats = diversity_stats(gt.heads)
    threshold = head_sampling_threshold(stats, sim.alpha, config.event_T, sim.M)
    m_threshold = min(sim.M, max(1, math.ceil(threshold)))
    events: dict[str, Any] = {}
    for m in sorted({m_threshold, 1, sim.clients_per_round}):
        report = head_sampling_event_rate(
            gt.heads, m, sim.alpha, config.event_T, config.event_trials, sim.seed
        )
        events[str(m)] = report.to_dict()
    return {
        "gram_vs_b": single.to_dict(),
        "gram_vs_M": averaged.to_dict(),
        "head_sampling": {
            "threshold_m": m_threshold,
            "stats": stats.to_dict(),
            "rates": events,
        },
    }


# -- sweep ------------------------------------------------------------------


def run_sweep(config: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Repeat training over ``tau_values`` x ``trials`` seeds.

    Writes one row per run to ``sweep.csv`` and the trial-averaged distance
    and gradient norm of every round to ``sweep_rounds.csv``.
    """
    sim = config.sim.replace(monitor=MonitorLevel.GLOBAL)
    rows: list[list[str]] = []
    curve_rows: list[list[str]] = []
    medians: dict[str, Any] = {}
    for tau in config.tau_values:
        final_dists: list[float] = []
        ratios: list[float] = []
        grads: list[float] = []
        dist_curves: list[list[float]] = []
        grad_curves: list[list[float]] = []
        for trial in range(config.trials):
            seed = derive_seed(sim.seed, StreamTag.TRIAL, trial)
            run_sim = sim.replace(tau=tau, seed=seed)
            if tau == 1:
                run_sim = run_sim.replace(m=None)
            result = run_training(run_sim)
            final_dist = principal_angle_distance(
                result.final_state.B, result.ground_truth.b_star
            )
            grad = global_grad_norm(result.final_state, result.ground_truth)
            final_dists.append(final_dist)
            ratios.append(final_dist / result.dist0 if result.dist0 > 0.0 else math.nan)
            grads.append(grad)
            trajectory = list(result.metrics)
            if result.initial_metrics is not None:
                trajectory.insert(0, result.initial_metrics)
            dist_curves.append([m.dist for m in trajectory])
            grad_curves.append([m.grad_norm_global for m in trajectory])
            rows.append(
                [
                    str(tau),
                    str(trial),
                    _format_float(result.dist0),
                    _format_float(final_dist),
                    _format_float(grad),
                ]
            )
        mean_dist = np.mean(dist_curves, axis=0)
        mean_grad = np.mean(grad_curves, axis=0)
        for t in range(mean_dist.size):
            curve_rows.append(
                [str(tau), str(t), _format_float(mean_dist[t]), _format_float(mean_grad[t])]
            )
        medians[str(tau)] = {
            "median_final_dist": float(np.median(final_dists)),
            "median_dist_ratio": float(np.median(ratios)),
            "median_final_grad_norm": float(np.median(grads)),
        }
        logger.info("tau=%d median final dist %.3e", tau, medians[str(tau)]["median_final_dist"])
    write_csv(
        out_dir / "sweep.csv",
        ("tau", "trial", "dist0", "final_dist", "final_grad_norm"),
        rows,
    )
    write_csv(
        out_dir / "sweep_rounds.csv", ("tau", "t", "mean_dist", "mean_grad_norm"), curve_rows
    )
    return {"per_tau": medians}


# -- dispatch ---------------------------------------------------------------

_DRIVERS: dict[ExperimentKind, Callable[[ExperimentConfig, Path], dict[str, Any]]] = {
    ExperimentKind.TRAIN: run_train,
    ExperimentKind.FINETUNE: run_finetune,
    ExperimentKind.LOWERBOUND: run_lowerbound,
    ExperimentKind.CONCENTRATION: run_concentration,
    ExperimentKind.SWEEP: run_sweep,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Run the configured experiment and write its artifacts to ``config.out``.

    Returns
    -------
    int
        ``0`` on success, ``1`` for an invalid configuration and ``2`` when
        training diverged (partial artifacts are still written).
    """
    out_dir = Path(config.out)
    try:
        config.validate()
        out_dir.mkdir(parents=True, exist_ok=True)
    except (*_CONFIG_ERRORS, OSError) as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG_ERROR

    summary: dict[str, Any] = {"kind": config.kind.value, "config": config.to_dict()}
    driver = _DRIVERS[config.kind]
    try:
        summary["result"] = driver(config, out_dir)
    except DivergedError as exc:
        logger.error("training diverged at round %d", exc.round_t)
        summary["status"] = "diverged"
        summary["diverged_at"] = exc.round_t
        write_summary(out_dir, summary)
        return EXIT_DIVERGED
    except _CONFIG_ERRORS as exc:
        logger.error("experiment rejected its configuration: %s", exc)
        return EXIT_CONFIG_ERROR
    summary["status"] = "ok"
    write_summary(out_dir, summary)
    logger.info("wrote %s", out_dir / SUMMARY_FILE)
    return EXIT_OK
