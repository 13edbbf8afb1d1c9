from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import torch

from .. import CONFIG
from ..estimators.recursive import PseudoMixture
from ..logger import logger
from ..models.MixtureModel import MixtureModel
from ..sampler.DrawPool import DrawPool
from ..uncertainty.bootstrap import bootstrap_se
from ..uncertainty.ess import ess
from ..util import log_mean_exp
from .ReweightTarget import ReweightTarget


class ReweightResult(NamedTuple):
    log_z: float
    ess: float
    se: Optional[float]
    interval: Optional[Tuple[float, float]]
    unstable: bool


class SensitivityCell(NamedTuple):
    key: str
    factor: float
    value: float
    log_z: float
    ess: float
    unstable: bool


def log_importance_ratios(P: PseudoMixture, pool: DrawPool, target: ReweightTarget) -> torch.Tensor:
    """log numerator - log π - log(p / π) per pooled draw."""
    if pool.n != P.W.n:
        raise ValueError(f"pool holds {pool.n} draws but the pseudo-mixture was built from {P.W.n}")

    log_numerator = target(pool.draws, pool.log_likelihood, pool.log_prior)

    return log_numerator - pool.log_prior - P.log_density()


def reweight_evidence(
    P: PseudoMixture,
    pool: DrawPool,
    target: ReweightTarget,
    B: int = 0,
    seed: int = 0,
) -> ReweightResult:
    """Normalizer of an alternative target by pseudo-importance sampling from the pooled draws.

    log Ẑ_alt = logsumexp_i [log num(θ_i) - log π(θ_i) - log(p(θ_i) / π(θ_i))] - log n

    Args:
        P (PseudoMixture): Pseudo-mixture with converged normalizers.
        pool (DrawPool): The pool P was built from, with cached log-likelihoods and log-priors.
        target (ReweightTarget): Alternative target.
        B (int, optional): Bootstrap replicates for the SE and 95% interval; 0 skips them. Defaults to 0.
        seed (int, optional): Bootstrap seed. Defaults to 0.

    Returns:
        ReweightResult: Estimate, ESS of the importance weights, SE, interval and the low-ESS flag.
    """
    log_ratio = log_importance_ratios(P, pool, target)

    log_z = float(log_mean_exp(log_ratio))
    effective = ess(log_ratio)

    se, interval = None, None

    if B > 0:
        estimate = bootstrap_se(P.W, P.normalizers, B=B, seed=seed, log_target=log_ratio + P.log_density())

        se, interval = estimate.se_target, estimate.interval

    unstable = effective < CONFIG.REWEIGHT.ESS_WARN

    if unstable:
        logger.warning(f"Reweighting to {target.description}: ESS {effective:.1f} is below {CONFIG.REWEIGHT.ESS_WARN}")

    return ReweightResult(log_z, effective, se, interval, unstable)


def reweight_posterior_expectation(
    P: PseudoMixture,
    pool: DrawPool,
    f: Callable[[torch.Tensor], torch.Tensor],
    target: Optional[ReweightTarget] = None,
) -> Tuple[float, float]:
    """Self-normalized importance estimate of E[f(θ)] under the target, by default the sampled posterior.

    Returns:
        Tuple[float, float]: The estimate and the ESS of its weights.
    """
    target = ReweightTarget.posterior() if target is None else target

    log_ratio = log_importance_ratios(P, pool, target)
    weights = torch.softmax(log_ratio, dim=0)

    values = torch.as_tensor(f(pool.draws), dtype=weights.dtype).reshape(-1)
    used = weights > 0

    return float((weights[used] * values[used]).sum()), ess(log_ratio)


def sensitivity_grid(
    P: PseudoMixture,
    pool: DrawPool,
    model: MixtureModel,
    keys: Sequence[str],
    factors: Sequence[float] = (0.5, 2.0),
) -> List[SensitivityCell]:
    """log Ẑ under halving and doubling of each named hyperparameter of a mixture prior.

    Every cell reweights the same pool, so the grid costs no likelihood calls.
    """
    cells = []

    for key in keys:
        base = getattr(model.hyper, key, None)

        if base is None:
            raise ValueError(f"hyperparameter '{key}' is not set on {model!r}")

        for factor in factors:
            value = base * factor

            alternative = model.with_hyper(model.hyper.model_copy(update={key: value}))

            result = reweight_evidence(P, pool, ReweightTarget.from_prior(alternative, f"{key}={value:g}"))

            cells.append(SensitivityCell(key, factor, value, result.log_z, result.ess, result.unstable))

    return cells
