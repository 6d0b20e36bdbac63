"""Sampling-based sensitivity analysis of parameter estimates.

The model is refit on random subsamples and each explanatory variable is
scored by the aggregate standard error of its alternative-specific
coefficients.  Rank disagreement between the full fit and the subsample
fits, plus the relative change in standard errors, measures how sensitive
the estimates are to input variability.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import ChoiceDataset
from .stats import t_statistics
from .trainer import TrainConfig, train_crbm


@dataclass
class SensitivityReport:
    variables: tuple           # K feature names plus "bias"
    full_rank: np.ndarray      # permutation of 1..K+1, descending sensitivity
    sub_rank: np.ndarray       # permutation of 1..K+1 from mean subsample sensitivity
    stderr_diff_pct: np.ndarray      # mean relative |difference| in percent
    stderr_diff_pct_sd: np.ndarray   # spread across replicates
    full_sensitivity: np.ndarray
    sub_sensitivity: np.ndarray      # mean across replicates
    fraction: float
    replicates: int
    seed: int
    n_hidden: int


def _variable_sensitivity(p, ds) -> np.ndarray:
    """RMS standard error per explanatory variable, bias appended last."""
    std_errs, _ = t_statistics(p, ds)
    per_feature = np.sqrt((std_errs.choice_context_w ** 2).mean(axis=0))
    bias = np.sqrt((std_errs.choice_bias ** 2).mean())
    return np.append(per_feature, bias)


def _ranks_descending(values: np.ndarray) -> np.ndarray:
    """1-based ranks, largest value first; ties keep variable order."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def _fit_sensitivity(ds: ChoiceDataset, n_hidden: int, cfg: TrainConfig):
    # Early stopping validates on the fitted rows themselves; the point here
    # is a deterministic refit, not generalization measurement.
    params, _ = train_crbm(ds, ds, n_hidden, cfg)
    return _variable_sensitivity(params, ds)


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("CHOICERBM_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def sensitivity_run(ds: ChoiceDataset, n_hidden: int, cfg: TrainConfig,
                    fraction: float, replicates: int,
                    seed: int) -> SensitivityReport:
    """Refit on `replicates` random subsamples of size floor(fraction * N).

    Subsamples are simple random draws without replacement that preserve
    the original row order, so fraction 1.0 reproduces the full fit
    exactly.  Replicate fits run concurrently (capped by the
    CHOICERBM_THREADS environment variable) and are reduced in replicate
    order, so the report is deterministic in (seed, fraction, replicates).
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction {fraction} not in (0, 1]")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    n_sub = int(np.floor(fraction * ds.n_rows))
    if n_sub < cfg.batch_size:
        raise ValueError(
            f"subsample size {n_sub} is smaller than batch size {cfg.batch_size}")

    full_sens = _fit_sensitivity(ds, n_hidden, cfg)

    streams = np.random.SeedSequence(seed).spawn(replicates)
    subsets = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        rows = np.sort(rng.choice(ds.n_rows, size=n_sub, replace=False))
        subsets.append(ds.take(rows))

    with ThreadPoolExecutor(max_workers=_worker_count(replicates)) as pool:
        futures = [pool.submit(_fit_sensitivity, sub, n_hidden, cfg)
                   for sub in subsets]
        sub_sens = np.stack([f.result() for f in futures])   # (R, K+1)

    # Zero full-sample sensitivity only happens for parameters with no
    # information at all; report the absolute change there.
    denom = np.where(full_sens > 0, full_sens, 1.0)
    diffs = np.abs(sub_sens - full_sens) / denom * 100.0
    mean_sub = sub_sens.mean(axis=0)
    return SensitivityReport(
        variables=tuple(ds.feature_names) + ("bias",),
        full_rank=_ranks_descending(full_sens),
        sub_rank=_ranks_descending(mean_sub),
        stderr_diff_pct=diffs.mean(axis=0),
        stderr_diff_pct_sd=diffs.std(axis=0),
        full_sensitivity=full_sens,
        sub_sensitivity=mean_sub,
        fraction=fraction,
        replicates=replicates,
        seed=seed,
        n_hidden=n_hidden)


def rank_agreement(full_ranks, sub_ranks) -> float:
    """Spearman correlation between two rank vectors (no ties assumed)."""
    a = np.asarray(full_ranks, dtype=np.float64)
    b = np.asarray(sub_ranks, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("rank vectors must share one dimension")
    m = len(a)
    if m < 2:
        raise ValueError("need at least 2 ranks")
    d2 = ((a - b) ** 2).sum()
    return float(1.0 - 6.0 * d2 / (m * (m * m - 1.0)))


def sensitivity_table_csv(reports) -> str:
    """Result-table CSV: variable column, then per report a group of
    (full rank, sample rank, std-err % difference) columns."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to tabulate")
    variables = reports[0].variables
    for rep in reports:
        if rep.variables != variables:
            raise ValueError("reports disagree on variables")
    header = ["variable"]
    for rep in reports:
        tag = f"J{rep.n_hidden}"
        header += [f"{tag}_full_rank", f"{tag}_sample_rank", f"{tag}_stderr_diff_pct"]
    lines = [",".join(header)]
    for v, name in enumerate(variables):
        cells = [name]
        for rep in reports:
            cells += [str(int(rep.full_rank[v])), str(int(rep.sub_rank[v])),
                      f"{rep.stderr_diff_pct[v]:.2f}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
