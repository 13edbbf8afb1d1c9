import math
from typing import Optional

import torch

from .. import CONFIG
from ..bridge.WeightMatrix import LogWeightMatrix
from ..estimators.recursive import LogNormalizers, log_denominator
from ..logger import logger
from ..util import DTYPE, as_tensor, seeded, timed
from .covariance import CovarianceEstimate, quasi_hessian_covariance


def _resample_within_labels(labels: torch.Tensor, m: int) -> torch.Tensor:
    rows = []

    for j in range(m):
        members = torch.nonzero(labels == j).flatten()

        if members.shape[0] > 0:
            rows.append(members[torch.randint(members.shape[0], (members.shape[0],))])

    return torch.cat(rows)


def _perturbations(cov: torch.Tensor, B: int) -> torch.Tensor:
    values, vectors = torch.linalg.eigh(cov)
    root = vectors * torch.sqrt(values.clamp(min=0.0))

    return torch.randn((B, cov.shape[0]), dtype=DTYPE) @ root.T


@timed(logger)
def bootstrap_se(
    W: LogWeightMatrix,
    normalizers: LogNormalizers,
    B: int = CONFIG.BOOTSTRAP.B,
    seed: int = 0,
    log_target: Optional[torch.Tensor] = None,
    covariance: Optional[CovarianceEstimate] = None,
) -> CovarianceEstimate:
    """Bootstrap-with-perturbation standard errors for the rung normalizers and a target.

    Each replicate resamples the pooled rows with replacement within every
    label group, so the counts n_j are kept, and perturbs the normalizers by
    a draw from N(0, Σ) with Σ the quasi-Hessian covariance. The pseudo-mixture
    is rebuilt from the perturbed normalizers and every rung's normalizer and
    the target are re-estimated by pseudo-importance sampling, anchored at rung 0.

    Args:
        W (LogWeightMatrix): Pooled weights.
        normalizers (LogNormalizers): Converged normalizers.
        B (int, optional): Number of replicates, at least 100. Defaults to CONFIG.BOOTSTRAP.B.
        seed (int, optional): Seed of the resampling stream. Defaults to 0.
        log_target (Optional[torch.Tensor], optional): Prior-relative log numerator of the target per pooled draw.
            Defaults to the last rung's column.
        covariance (Optional[CovarianceEstimate], optional): Perturbation covariance. Defaults to the quasi-Hessian one.

    Returns:
        CovarianceEstimate: Empirical covariance over rungs 1..m-1, target SE and percentile 95% interval.
    """
    if B < 100:
        raise ValueError(f"bootstrap needs B >= 100 replicates, got {B}")

    log_target = W.entries[:, -1] if log_target is None else as_tensor(log_target)

    if log_target.shape[0] != W.n:
        raise ValueError(f"target has {log_target.shape[0]} entries for {W.n} pooled draws")

    if covariance is None:
        covariance = quasi_hessian_covariance(W, normalizers)

    log_n = math.log(W.n)

    rung_estimates = torch.empty((B, W.m - 1), dtype=DTYPE)
    target_estimates = torch.empty(B, dtype=DTYPE)

    with seeded(seed):
        perturbations = _perturbations(covariance.cov, B)

        for b in range(B):
            rows = _resample_within_labels(W.labels, W.m)

            resampled = W.select(rows)

            log_z = normalizers.log_z.clone()
            log_z[1:] += perturbations[b]

            log_p = log_denominator(resampled, log_z) - log_n

            estimates = torch.logsumexp(resampled.entries - log_p.unsqueeze(1), dim=0) - log_n
            target = torch.logsumexp(log_target[rows] - log_p, dim=0) - log_n

            rung_estimates[b] = estimates[1:] - estimates[0]
            target_estimates[b] = target - estimates[0]

    cov = torch.cov(rung_estimates.T).reshape(W.m - 1, W.m - 1)
    se_target = float(target_estimates.std())

    low, high = torch.quantile(target_estimates, torch.tensor([0.025, 0.975], dtype=DTYPE)).tolist()

    logger.info(f"Bootstrap B={B}: se_target={se_target:.4g} interval=({low:.4f}, {high:.4f})")

    return CovarianceEstimate("bootstrap", cov, se_target, (low, high))
