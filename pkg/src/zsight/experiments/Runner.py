from __future__ import annotations

import math
import os
import time
from typing import Dict, Optional

import torch

from ..bridge.AuxiliaryDensity import AuxiliaryFamily, auxiliary_from_mode, laplace_evidence
from ..bridge.BridgeSpec import BridgeKind, BridgeSpec
from ..bridge.WeightMatrix import LogWeightMatrix, eval_weight_matrix
from ..errors import ConfigError, RankDeficiencyError
from ..estimators.baselines import ame, hme
from ..estimators.recursive import LogNormalizers, PseudoMixture, check_connectivity, recursive_normalize
from ..estimators.tivis import tivis_estimate
from ..logger import logger
from ..models.BananaModel import BananaModel
from ..models.galaxy import load_galaxy
from ..models.MixtureModel import MixtureModel
from ..models.TargetModel import TargetModel
from ..nested.evidence import ins_evidence, ns_evidence, shell_recursive_evidence
from ..nested.NestedSampler import nested_run
from ..pydantics.Experiment import ExperimentConfig, MixtureHyperModel
from ..pydantics.Report import CovarianceModel, EstimateReport
from ..reweight.reweighting import ReweightResult, reweight_evidence
from ..reweight.ReweightTarget import ReweightTarget
from ..sampler.DrawPool import DrawPool
from ..sampler.gibbs import gibbs_mixture, sample_partial_ladder
from ..sampler.metropolis import mc3_sample, rwm_chain
from ..uncertainty.bootstrap import bootstrap_se
from ..uncertainty.covariance import quasi_hessian_covariance
from ..uncertainty.ess import ess
from ..util import derive_seed, seeded, steps_for

NESTED_METHODS = ("nested", "ins", "shell_recursive")
POOLED_METHODS = ("recursive", "tivis")


class Runner:
    """Runs one experiment config end to end: model, bridge, sampler, estimator, report.

    Every random stream is derived from ``config.seed`` with :func:`derive_seed`,
    so a report's embedded config reproduces its numbers exactly. After
    :meth:`run` the model, bridge, pool, weight matrix and normalizers of the
    run stay available on the runner for reweighting.

    Examples:

        .. code-block:: python

            config = ExperimentConfig.load("banana.yaml", ["bridge.m=5", "sampler.per_rung=250"])

            report = Runner(config).run()

            print(report.log_z, report.se_hessian)

    Attributes:
        config (ExperimentConfig): Validated experiment.
        model (Optional[TargetModel]): Model of the last run.
        spec (Optional[BridgeSpec]): Bridge of the last pooled run.
        pool (Optional[DrawPool]): Pooled draws of the last pooled run.
        W (Optional[LogWeightMatrix]): Weight matrix of the last pooled run.
        normalizers (Optional[LogNormalizers]): Normalizers of the last pooled run.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

        self.model: Optional[TargetModel] = None
        self.spec: Optional[BridgeSpec] = None
        self.pool: Optional[DrawPool] = None
        self.W: Optional[LogWeightMatrix] = None
        self.normalizers: Optional[LogNormalizers] = None
        self.nested = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def directory(self) -> str:
        return os.path.join(
            self.config.out, f"{self.config.estimator.method}-{self.config.config_hash()[:8]}-seed{self.seed}"
        )

    def build_model(self) -> TargetModel:
        section = self.config.model

        if section.kind == "banana":
            return BananaModel()

        if section.k is None:
            raise ConfigError("mixture models need model.k")

        data = load_galaxy(section.variant, path=section.data)
        hyper = MixtureHyperModel.preset(section.preset, data.tolist(), **section.hyper)

        return MixtureModel(data, section.k, hyper, subset_seed=section.subset_seed)

    def build_bridge(self, model: TargetModel) -> BridgeSpec:
        section = self.config.bridge

        if section.kind == "power_posterior":
            return BridgeSpec.power_posterior(section.m, section.c)

        if section.kind == "auxiliary_path":
            aux = auxiliary_from_mode(model, AuxiliaryFamily(section.family))

            return BridgeSpec.auxiliary_path(aux, section.m, section.c)

        if section.kind == "partial_data":
            if not isinstance(model, MixtureModel):
                raise ConfigError("partial-data bridges need a mixture model")

            r_min = section.r_min if section.r_min is not None else model.k

            return BridgeSpec.partial_data(model.n_tot, section.m, section.c, r_min)

        raise ConfigError(f"bridge kind '{section.kind}' is built by the nested sampler, not from config")

    def sample(self, model: TargetModel, spec: BridgeSpec) -> DrawPool:
        sampler = self.config.sampler
        seed = derive_seed(self.seed, "sampler")

        if spec.kind == BridgeKind.PARTIAL_DATA:
            return sample_partial_ladder(
                model, spec, sampler.per_rung, thin=sampler.gibbs_thin, seed=seed, burn_in=sampler.gibbs_burn_in
            )

        return mc3_sample(model, spec, sampler.per_rung, sampler.model_copy(update={"seed": seed}))

    def run(self) -> EstimateReport:
        """Runs the configured estimator and writes its artefacts.

        Returns:
            EstimateReport: Report of ``config.estimator.method``.
        """
        return self.run_all()[self.config.estimator.method]

    def run_all(self) -> Dict[str, EstimateReport]:
        """Runs the configured estimator and every estimator that comes free with it.

        A nested run is summed up all three ways; a pooled run reports the
        recursive normalizer and, when configured, TIVIS.

        Returns:
            Dict[str, EstimateReport]: Reports by method.
        """
        method = self.config.estimator.method

        start = time.time()

        self.model = self.build_model()

        if method in NESTED_METHODS:
            reports = self._run_nested()
        elif method in POOLED_METHODS:
            reports = self._run_pooled()
        else:
            reports = self._run_baseline()

        wall_time = time.time() - start

        config = self.config.model_dump(mode="json")
        config_hash = self.config.config_hash()

        reports = {
            name: report.model_copy(
                update=dict(config=config, config_hash=config_hash, seed=self.seed, wall_time=wall_time)
            )
            for name, report in reports.items()
        }

        self.write(reports)

        for report in reports.values():
            report.log(logger)

        return reports

    def _run_pooled(self) -> Dict[str, EstimateReport]:
        estimator = self.config.estimator

        self.spec = self.build_bridge(self.model)
        self.pool = self.sample(self.model, self.spec)

        self.W = eval_weight_matrix(self.pool, self.spec, self.model)
        self.normalizers = recursive_normalize(self.W, tol=estimator.tol, max_iter=estimator.max_iter)

        diagnostics = dict(
            bridge=self.spec.to_dict(),
            iterations=self.normalizers.iterations,
            final_delta=self.normalizers.final_delta,
            connectivity=check_connectivity(self.W).components,
            counts=self.W.counts.tolist(),
            **self.pool.diagnostics,
        )

        if self.spec.aux is not None:
            diagnostics["laplace_log_z"] = laplace_evidence(self.model, self.spec.aux)
            diagnostics["auxiliary_regularized"] = self.spec.aux.regularized

        uncertainty: Dict[str, CovarianceModel] = {}
        se_hessian, se_bootstrap, interval = None, None, None

        try:
            covariance = quasi_hessian_covariance(self.W, self.normalizers)
        except RankDeficiencyError as error:
            logger.warning(f"Hessian SE unavailable: {error}")
            covariance = None
        else:
            uncertainty["quasi_hessian"] = CovarianceModel(**covariance.to_dict())
            se_hessian = covariance.se_target

        if estimator.bootstrap > 0 and covariance is not None:
            bootstrap = bootstrap_se(
                self.W,
                self.normalizers,
                B=estimator.bootstrap,
                seed=derive_seed(self.seed, "bootstrap"),
                covariance=covariance,
            )

            uncertainty["bootstrap"] = CovarianceModel(**bootstrap.to_dict())
            se_bootstrap, interval = bootstrap.se_target, bootstrap.interval

        log_p = self.normalizers.log_denominator - math.log(self.W.n)
        effective = ess(self.W.entries[:, -1] - log_p)

        reports = {
            "recursive": EstimateReport(
                method="recursive",
                log_z=float(self.normalizers.log_z[-1]),
                log_z_rungs=self.normalizers.log_z.tolist(),
                se_hessian=se_hessian,
                se_bootstrap=se_bootstrap,
                interval=interval,
                ess=effective,
                uncertainty=uncertainty,
                diagnostics=diagnostics,
            )
        }

        if estimator.method == "tivis":
            tivis = tivis_estimate(
                self.W, self.normalizers, quad_points=estimator.quad_points, tol=estimator.tol, max_iter=estimator.max_iter
            )

            reports["tivis"] = reports["recursive"].model_copy(
                update=dict(
                    method="tivis",
                    log_z=float(tivis.log_z[-1]),
                    log_z_rungs=tivis.log_z.tolist(),
                    diagnostics=dict(diagnostics, iterations=tivis.iterations, final_delta=tivis.final_delta),
                )
            )

        return reports

    def _run_nested(self) -> Dict[str, EstimateReport]:
        section = self.config.nested

        self.nested = nested_run(
            self.model,
            section.n_live,
            section.steps_for(section.n_live),
            expand_factor=section.expand,
            seed=derive_seed(self.seed, "nested"),
            max_proposals=section.max_proposals,
        )

        diagnostics = dict(
            n_live=section.n_live,
            steps=self.nested.steps,
            mean_overhead=self.nested.mean_overhead,
            likelihood_calls=self.nested.likelihood_calls,
            boundary_hits=self.nested.boundary_hits,
        )

        ins = ins_evidence(self.nested, B=self.config.estimator.bootstrap, seed=derive_seed(self.seed, "bootstrap"))
        shell = shell_recursive_evidence(self.nested, tol=self.config.estimator.tol, max_iter=self.config.estimator.max_iter)

        return {
            "nested": EstimateReport(method="nested", log_z=ns_evidence(self.nested), diagnostics=diagnostics),
            "ins": ins.model_copy(update=dict(diagnostics=dict(diagnostics, **ins.diagnostics))),
            "shell_recursive": shell.model_copy(update=dict(diagnostics=dict(diagnostics, **shell.diagnostics))),
        }

    def _run_baseline(self) -> Dict[str, EstimateReport]:
        method = self.config.estimator.method
        sampler = self.config.sampler
        seed = derive_seed(self.seed, "sampler")

        if method == "ame":
            with seeded(seed):
                draws = self.model.sample_prior(sampler.per_rung)

            return {"ame": EstimateReport(method="ame", log_z=ame(self.model.log_likelihood(draws)))}

        if isinstance(self.model, MixtureModel):
            draws = gibbs_mixture(
                self.model,
                self.model.n_tot,
                sampler.per_rung,
                thin=sampler.gibbs_thin,
                seed=seed,
                burn_in=sampler.gibbs_burn_in,
            ).params
        else:
            steps = sampler.burn_in + steps_for(sampler.per_rung, sampler.thin)
            cfg = sampler.model_copy(update=dict(seed=seed, steps=steps))

            start = self.model.support.center if self.model.support is not None else self.model.sample_prior(1)[0]

            draws = rwm_chain(self.model.log_posterior, start, cfg).draws[: sampler.per_rung]

        return {"hme": EstimateReport(method="hme", log_z=hme(self.model.log_likelihood(draws)))}

    def write(self, reports: Dict[str, EstimateReport]) -> str:
        """Writes report JSON per method, the trace CSV and the pool bundle into :attr:`directory`."""
        directory = self.directory

        os.makedirs(directory, exist_ok=True)

        for name, report in reports.items():
            report.write(os.path.join(directory, f"report-{name}.json"))

        if self.pool is not None:
            self.pool.to_csv(os.path.join(directory, "trace.csv"))

            torch.save(self.pool.state_dict(), os.path.join(directory, "pool.pt"))

        if self.nested is not None:
            self.nested.to_csv(os.path.join(directory, "nested.csv"))

        return directory

    def reweight(self, pool_path: Optional[str] = None) -> ReweightResult:
        """Reweights a saved (or the last) pool to the prior named by the ``reweight`` section.

        The bridge and normalizers are rebuilt from the config, which must be
        the one the pool was produced with; no full-data likelihood is evaluated.

        Args:
            pool_path (Optional[str], optional): ``pool.pt`` bundle. Defaults to ``config.reweight.pool``,
                then to the pool of the last :meth:`run`.

        Returns:
            ReweightResult: Alternative log evidence, ESS, SE and interval.
        """
        section = self.config.reweight
        pool_path = pool_path if pool_path is not None else section.pool

        if pool_path is not None:
            if not os.path.exists(pool_path):
                raise ConfigError(f"pool bundle '{pool_path}' does not exist")

            self.model = self.build_model()
            self.spec = self.build_bridge(self.model)
            self.pool = DrawPool.from_state_dict(torch.load(pool_path, weights_only=False))

            self.W = eval_weight_matrix(self.pool, self.spec, self.model)
            self.normalizers = recursive_normalize(
                self.W, tol=self.config.estimator.tol, max_iter=self.config.estimator.max_iter
            )

        if self.pool is None:
            raise ConfigError("nothing to reweight: give reweight.pool or run the experiment first")

        target = self.reweight_target()

        return reweight_evidence(
            PseudoMixture(self.W, self.normalizers),
            self.pool,
            target,
            B=self.config.estimator.bootstrap,
            seed=derive_seed(self.seed, "reweight"),
        )

    def reweight_target(self) -> ReweightTarget:
        section = self.config.reweight

        if not isinstance(self.model, MixtureModel):
            if section.preset is not None or section.hyper:
                raise ConfigError("hyperparameter reweighting needs a mixture model")

            return ReweightTarget.posterior()

        preset = section.preset if section.preset is not None else self.config.model.preset
        hyper = MixtureHyperModel.preset(preset, self.model.data.tolist(), **section.hyper)

        return ReweightTarget.from_prior(self.model.with_hyper(hyper), f"{preset} {section.hyper}")
