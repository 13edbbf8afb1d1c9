from __future__ import annotations

import csv
import math
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
from tqdm import tqdm

from ..errors import ConfigError, ZsightError
from ..estimators.recursive import PseudoMixture
from ..logger import logger
from ..models.MixtureModel import MixtureModel
from ..pydantics.Experiment import ExperimentConfig, MixtureHyperModel
from ..pydantics.Report import EstimateReport, ModelPosterior, ReplicateRow, ReplicateSummary
from ..reweight.components import posterior_over_k, truncated_poisson_log_prior, uniform_log_prior
from ..reweight.reweighting import reweight_evidence
from ..reweight.ReweightTarget import ReweightTarget
from ..util import DTYPE, derive_seed, pool_map
from .Runner import Runner

BANANA_LOG_Z = -4.1543


def _run_replicate(config: ExperimentConfig):
    try:
        return Runner(config).run_all()
    except ZsightError as error:
        return error


def replicate_configs(config: ExperimentConfig, R: int, base_seed: int) -> List[ExperimentConfig]:
    """R copies of ``config`` with seeds derived from (base_seed, "replicate", r)."""
    return [config.updated(seed=derive_seed(base_seed, "replicate", r)) for r in range(R)]


def summarize(
    reports: Sequence[Dict[str, EstimateReport]], setting: Dict[str, Any], failures: int = 0
) -> List[ReplicateRow]:
    """Mean log Ẑ, replicate SE and mean analytic SE per method over replicates."""
    rows = []

    methods = sorted({name for replicate in reports for name in replicate})

    for method in methods:
        selected = [replicate[method] for replicate in reports if method in replicate]

        log_z = torch.tensor([report.log_z for report in selected], dtype=DTYPE)
        analytic = [
            report.se_bootstrap if report.se_bootstrap is not None else report.se_hessian for report in selected
        ]
        analytic = [value for value in analytic if value is not None]

        rows.append(
            ReplicateRow(
                setting=setting,
                method=method,
                replicates=len(selected),
                mean_log_z=float(log_z.mean()),
                se_replicate=float(log_z.std()) if len(selected) > 1 else math.nan,
                mean_se_analytic=sum(analytic) / len(analytic) if analytic else None,
                failures=failures,
            )
        )

    return rows


def replicate_study(
    config: ExperimentConfig,
    R: Optional[int] = None,
    base_seed: Optional[int] = None,
    workers: Optional[int] = None,
    setting: Optional[Dict[str, Any]] = None,
) -> ReplicateSummary:
    """Runs R independent replicates of one config and summarizes each estimator.

    Replicate r uses the seed derived from (base_seed, "replicate", r), so
    the summary does not depend on the number of workers. When a replicate
    fails, the summary of the replicates that succeeded is written to
    ``<out>/partial-summary.json`` before the first failure is re-raised.

    Args:
        config (ExperimentConfig): Experiment to replicate.
        R (Optional[int], optional): Replicates, at least 2. Defaults to ``config.replicates``.
        base_seed (Optional[int], optional): Defaults to ``config.seed``.
        workers (Optional[int], optional): Worker processes. Defaults to ``config.study.workers``.
        setting (Optional[Dict[str, Any]], optional): Label of this setting in the summary rows.

    Returns:
        ReplicateSummary: One row per estimator.
    """
    R = config.replicates if R is None else R
    base_seed = config.seed if base_seed is None else base_seed
    workers = config.study.workers if workers is None else workers

    if R < 2:
        raise ConfigError(f"a replicate study needs R >= 2, got {R}")

    logger.info(f"Replicate study: R={R} base_seed={base_seed} workers={workers} setting={setting}")

    configs = replicate_configs(config, R, base_seed)

    if workers > 1:
        results = pool_map(_run_replicate, configs, workers)
    else:
        results = [_run_replicate(replicate) for replicate in tqdm(configs, desc="replicates", leave=False)]

    reports = [result for result in results if not isinstance(result, ZsightError)]
    errors = [result for result in results if isinstance(result, ZsightError)]

    summary = ReplicateSummary(
        rows=summarize(reports, setting or {}, failures=len(errors)) if reports else [],
        config_hash=config.config_hash(),
        base_seed=base_seed,
    )

    if errors:
        summary.write(os.path.join(config.out, "partial-summary.json"))

        logger.error(f"{len(errors)} of {R} replicates failed; partial summary written to {config.out}")

        raise errors[0]

    return summary


def write_rows_csv(rows: Sequence[ReplicateRow], path: str) -> str:
    """Plot-ready CSV: one line per (setting, method)."""
    directory = os.path.dirname(path)

    if directory:
        os.makedirs(directory, exist_ok=True)

    keys = sorted({key for row in rows for key in row.setting})

    with open(path, "w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(keys + ["method", "replicates", "mean_log_z", "se_replicate", "mean_se_analytic", "failures"])

        for row in rows:
            writer.writerow(
                [row.setting.get(key) for key in keys]
                + [row.method, row.replicates, row.mean_log_z, row.se_replicate, row.mean_se_analytic, row.failures]
            )

    return path


def _sweep(
    config: ExperimentConfig,
    name: str,
    changes: Sequence[Tuple[Dict[str, Any], Dict[str, Any]]],
    truth: Optional[float] = None,
    **kwargs,
) -> ReplicateSummary:
    rows: List[ReplicateRow] = []

    for setting, update in tqdm(changes, desc=name):
        summary = replicate_study(config.updated(**update), setting=setting, **kwargs)

        rows.extend(summary.rows)

    summary = ReplicateSummary(rows=rows, truth=truth, config_hash=config.config_hash(), base_seed=config.seed)

    summary.write(os.path.join(config.out, f"{name}.json"))
    write_rows_csv(rows, os.path.join(config.out, f"{name}.csv"))

    return summary


def sample_size_study(config: ExperimentConfig, **kwargs) -> ReplicateSummary:
    """Replicates over the total sample sizes in ``study.n_tot_grid``, split evenly over the m rungs."""
    m = config.bridge.m

    changes = [
        ({"n_tot": n_tot}, {"sampler.per_rung": max(1, n_tot // m)}) for n_tot in config.study.n_tot_grid
    ]

    truth = BANANA_LOG_Z if config.model.kind == "banana" else None

    return _sweep(config, "sample-size", changes, truth=truth, **kwargs)


def c_sweep(config: ExperimentConfig, **kwargs) -> ReplicateSummary:
    """Replicates over the schedule exponents in ``study.c_grid``."""
    changes = [({"c": c}, {"bridge.c": c}) for c in config.study.c_grid]

    return _sweep(config, "c-sweep", changes, **kwargs)


def nested_study(config: ExperimentConfig, **kwargs) -> ReplicateSummary:
    """Replicates nested runs over ``nested.n_live_grid``; each run is summed up all three ways."""
    changes = [
        ({"n_live": n_live}, {"nested.n_live": n_live, "estimator.method": "nested"})
        for n_live in config.nested.n_live_grid
    ]

    truth = BANANA_LOG_Z if config.model.kind == "banana" else None

    return _sweep(config, "nested", changes, truth=truth, **kwargs)


def _galaxy_component(config: ExperimentConfig):
    runner = Runner(config)

    report = runner.run()

    P = PseudoMixture(runner.W, runner.normalizers)
    model: MixtureModel = runner.model

    alternatives = {}

    for preset in config.study.alternatives:
        hyper = MixtureHyperModel.preset(preset, model.data.tolist())
        result = reweight_evidence(P, runner.pool, ReweightTarget.from_prior(model.with_hyper(hyper), preset))

        alternatives[preset] = (result.log_z, result.ess)

    return model.k, report, alternatives


def galaxy_study(config: ExperimentConfig, full: Optional[bool] = None) -> ModelPosterior:
    """π(k | y) for the galaxy data over ``model.k_range`` (default 3..10).

    Each k gets a partial-data ladder with m = 10 rungs, c = 2 and no rung
    smaller than k, sampled by Gibbs with 400 draws per rung, or 4000 with
    ``full``. The per-k evidences are combined under a truncated Poisson
    (or uniform) prior on k, and every pool is reweighted to the alternative
    hyperparameter presets of ``study.alternatives``.

    Args:
        config (ExperimentConfig): Mixture experiment.
        full (Optional[bool], optional): Full-scale draws (4000 per rung). Defaults to ``config.full``.

    Returns:
        ModelPosterior: Posterior over k, with one posterior per alternative preset.
    """
    full = config.full if full is None else full

    k_min, k_max = config.model.k_range if config.model.k_range is not None else (3, 10)

    configs = []

    for k in range(k_min, k_max + 1):
        update = {
            "model.kind": "mixture",
            "model.k": k,
            "bridge.kind": "partial_data",
            "bridge.m": 10,
            "bridge.c": 2.0,
            "bridge.r_min": k,
            "sampler.per_rung": 4000 if full else 400,
            "estimator.method": "recursive",
            "seed": derive_seed(config.seed, "galaxy", k),
        }

        configs.append(config.updated(**update))

    logger.info(f"Galaxy study: k={k_min}..{k_max} full={full}")

    if config.study.workers > 1:
        results = pool_map(_galaxy_component, configs, config.study.workers)
    else:
        results = [_galaxy_component(component) for component in tqdm(configs, desc="galaxy k")]

    log_evidences = {k: report.log_z for k, report, _ in results}
    se = {k: report.se for k, report, _ in results}

    lam = config.model.hyper.get("lam", MixtureHyperModel.model_fields["lam"].default)

    if config.reweight.prior_k == "uniform":
        log_prior_k, prior = uniform_log_prior(k_min, k_max), "uniform"
    else:
        log_prior_k, prior = truncated_poisson_log_prior(lam, k_min, k_max), f"truncated_poisson(lam={lam:g})"

    posterior = posterior_over_k(log_evidences, log_prior_k, se=se, seed=derive_seed(config.seed, "posterior_k"), prior=prior)

    ess_by_k = {k: {preset: value[1] for preset, value in alternatives.items()} for k, _, alternatives in results}

    rows = [row.model_copy(update=dict(ess=ess_by_k[row.k])) for row in posterior.rows]

    alternative_posteriors = {}

    for preset in config.study.alternatives:
        alternative = posterior_over_k(
            {k: alternatives[preset][0] for k, _, alternatives in results}, log_prior_k, prior=prior
        )

        alternative_posteriors[preset] = [row.posterior for row in alternative.rows]

    posterior = posterior.model_copy(update=dict(rows=rows, alternatives=alternative_posteriors))

    posterior.write(os.path.join(config.out, "galaxy.json"))

    with open(os.path.join(config.out, "galaxy.csv"), "w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["k", "log_z", "se", "log_prior", "posterior", "low", "high"] + config.study.alternatives)

        for row in rows:
            writer.writerow(
                [row.k, row.log_z, row.se, row.log_prior, row.posterior, row.interval[0], row.interval[1]]
                + [alternative_posteriors[preset][row.k - k_min] for preset in config.study.alternatives]
            )

    logger.info(f"Galaxy study: log Z = {posterior.log_z_total:.3f}, posterior mode k = {posterior.mode}")

    return posterior
