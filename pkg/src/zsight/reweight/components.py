import math
from typing import Dict, Mapping, Optional

import torch

from ..pydantics.Report import ModelPosterior, ModelPosteriorRow
from ..util import DTYPE, seeded


def truncated_poisson_log_prior(lam: float, k_min: int, k_max: int) -> Dict[int, float]:
    """log π(k) for k ~ Poisson(lam) truncated to [k_min, k_max]."""
    if k_min > k_max or k_min < 0:
        raise ValueError(f"invalid k range [{k_min}, {k_max}]")

    ks = torch.arange(k_min, k_max + 1, dtype=DTYPE)
    log_pmf = ks * math.log(lam) - lam - torch.lgamma(ks + 1)
    log_pmf = log_pmf - torch.logsumexp(log_pmf, dim=0)

    return {int(k): float(value) for k, value in zip(ks.tolist(), log_pmf)}


def uniform_log_prior(k_min: int, k_max: int) -> Dict[int, float]:
    if k_min > k_max:
        raise ValueError(f"invalid k range [{k_min}, {k_max}]")

    return {k: -math.log(k_max - k_min + 1) for k in range(k_min, k_max + 1)}


def posterior_over_k(
    log_evidences: Mapping[int, float],
    log_prior_k: Mapping[int, float],
    se: Optional[Mapping[int, float]] = None,
    draws: int = 10000,
    seed: int = 0,
    prior: str = "custom",
) -> ModelPosterior:
    """π(k | y) ∝ π(k) Ẑ^(k) with 95% intervals from perturbing each log Ẑ^(k) by its SE.

    Args:
        log_evidences (Mapping[int, float]): log Ẑ^(k) per number of components.
        log_prior_k (Mapping[int, float]): log π(k) over the same k.
        se (Optional[Mapping[int, float]], optional): SE of each log Ẑ^(k). Defaults to no uncertainty.
        draws (int, optional): Perturbation draws for the intervals. Defaults to 10000.
        seed (int, optional): Perturbation seed. Defaults to 0.
        prior (str, optional): Name of the prior on k for the report. Defaults to "custom".

    Returns:
        ModelPosterior: Posterior table and total log evidence.
    """
    ks = sorted(log_evidences)

    if set(ks) != set(log_prior_k):
        raise ValueError(f"evidences cover k={ks} but the prior covers k={sorted(log_prior_k)}")

    log_z = torch.tensor([log_evidences[k] for k in ks], dtype=DTYPE)
    log_prior = torch.tensor([log_prior_k[k] for k in ks], dtype=DTYPE)
    errors = torch.tensor([se[k] if se is not None and se.get(k) is not None else 0.0 for k in ks], dtype=DTYPE)

    log_joint = log_prior + log_z
    log_total = torch.logsumexp(log_joint, dim=0)
    posterior = torch.exp(log_joint - log_total)

    with seeded(seed):
        perturbed = log_joint + torch.randn((draws, len(ks)), dtype=DTYPE) * errors

    samples = torch.softmax(perturbed, dim=1)
    bounds = torch.quantile(samples, torch.tensor([0.025, 0.975], dtype=DTYPE), dim=0)

    se_total = math.sqrt(float((posterior**2 * errors**2).sum())) if se is not None else None

    rows = [
        ModelPosteriorRow(
            k=k,
            log_z=float(log_z[i]),
            se=float(errors[i]) if se is not None else None,
            log_prior=float(log_prior[i]),
            posterior=float(posterior[i]),
            interval=(float(bounds[0, i]), float(bounds[1, i])),
        )
        for i, k in enumerate(ks)
    ]

    return ModelPosterior(rows=rows, log_z_total=float(log_total), se_total=se_total, prior=prior)
