from __future__ import annotations

import math
from typing import Any, Dict, Optional, Tuple

import torch

from ..bridge.WeightMatrix import LogWeightMatrix
from ..errors import RankDeficiencyError
from ..estimators.recursive import LogNormalizers
from ..logger import logger
from ..util import DTYPE, as_tensor


class CovarianceEstimate:
    """Covariance of the anchored log normalizers (log Ẑ_1, ..., log Ẑ_{m-1}).

    Attributes:
        method (str): "quasi_hessian" or "bootstrap".
        cov (torch.Tensor): Symmetric (m-1, m-1) matrix with nonnegative diagonal.
        se_target (float): Standard error of the target, log Ẑ_{m-1} unless a reweighting target was given.
        interval (Optional[Tuple[float, float]]): Percentile 95% interval of the target (bootstrap only).
    """

    def __init__(
        self,
        method: str,
        cov: torch.Tensor,
        se_target: float,
        interval: Optional[Tuple[float, float]] = None,
    ) -> None:
        self.method = method
        self.cov = as_tensor(cov)
        self.se_target = se_target
        self.interval = interval

    @property
    def se(self) -> torch.Tensor:
        """Standard errors of log Ẑ_1, ..., log Ẑ_{m-1}."""
        return torch.sqrt(torch.diagonal(self.cov))

    def to_dict(self) -> Dict[str, Any]:
        return dict(
            method=self.method,
            cov=self.cov.tolist(),
            se=self.se.tolist(),
            se_target=self.se_target,
            interval=list(self.interval) if self.interval is not None else None,
        )

    def __repr__(self) -> str:
        return f"CovarianceEstimate(method={self.method}, se_target={self.se_target:.6g})"


def rung_probabilities(W: LogWeightMatrix, log_z: torch.Tensor) -> torch.Tensor:
    """π_k(θ_i) = n_k w_k(θ_i) / Ẑ_k / Σ_s n_s w_s(θ_i) / Ẑ_s, shape (n, m)."""
    return torch.softmax(W.log_counts + W.entries - as_tensor(log_z), dim=1)


def quasi_log_likelihood(W: LogWeightMatrix, log_z: torch.Tensor) -> float:
    """Reverse-logistic-regression quasi log-likelihood Σ_i log π_{label_i}(θ_i) at the given log normalizers."""
    log_z = as_tensor(log_z)

    logits = W.log_counts + W.entries - log_z
    chosen = logits.gather(1, W.labels.unsqueeze(1)).squeeze(1)

    return float((chosen - torch.logsumexp(logits, dim=1)).sum())


def quasi_hessian(W: LogWeightMatrix, log_z: torch.Tensor) -> torch.Tensor:
    """Hessian of the quasi log-likelihood in ν_k = log Ẑ_k for k >= 1.

    H_kl = Σ_i π_k(θ_i) π_l(θ_i) - δ_kl Σ_i π_k(θ_i).
    """
    probabilities = rung_probabilities(W, log_z)[:, 1:]

    return probabilities.T @ probabilities - torch.diag(probabilities.sum(dim=0))


def _null_rungs(matrix: torch.Tensor) -> list:
    _, vectors = torch.linalg.eigh(matrix)
    direction = vectors[:, 0].abs()

    return [int(k) + 1 for k in torch.nonzero(direction > 1e-3 * direction.max()).flatten()]


def quasi_hessian_covariance(
    W: LogWeightMatrix,
    normalizers: LogNormalizers,
    iid_correction: bool = True,
) -> CovarianceEstimate:
    """Asymptotic covariance of the anchored log normalizers from the quasi-likelihood Hessian.

    The inverse of the negative Hessian is the covariance of the estimates
    when the pooled draws are treated as one sample from the pseudo-mixture.
    With ``iid_correction`` the known label counts are conditioned on by
    subtracting diag(1 / n_k) + (1 / n_0) 11ᵀ, which removes the multinomial
    label variance the draws never had. The result stays slightly
    conservative for finite samples.

    Args:
        W (LogWeightMatrix): Pooled weights.
        normalizers (LogNormalizers): Converged normalizers.
        iid_correction (bool, optional): Condition on the rung counts. Defaults to True.

    Returns:
        CovarianceEstimate: Covariance with se_target the SE of log Ẑ_{m-1}.
    """
    if W.m < 2:
        raise ValueError("covariance needs at least two rungs")

    negative_hessian = -quasi_hessian(W, normalizers.log_z)
    negative_hessian = (negative_hessian + negative_hessian.T) / 2

    factor, info = torch.linalg.cholesky_ex(negative_hessian)

    if int(info) != 0:
        rungs = _null_rungs(negative_hessian)

        raise RankDeficiencyError(f"quasi-likelihood Hessian is singular along rungs {rungs}", rungs)

    cov = torch.cholesky_inverse(factor)

    if iid_correction:
        counts = W.counts.to(DTYPE)
        inverse = torch.where(counts > 0, 1 / counts.clamp(min=1), torch.zeros_like(counts))

        uncorrected = torch.diagonal(cov).clone()

        cov = cov - torch.diag(inverse[1:]) - inverse[0]

        # variances lost to cancellation are zero
        floor = 64 * torch.finfo(DTYPE).eps * uncorrected
        cov.diagonal()[torch.diagonal(cov) <= floor] = 0.0

    cov = (cov + cov.T) / 2
    cov.diagonal().clamp_(min=0.0)

    se_target = math.sqrt(float(cov[-1, -1]))

    logger.debug(f"Quasi-Hessian SEs: {torch.sqrt(torch.diagonal(cov)).tolist()}")

    return CovarianceEstimate("quasi_hessian", cov, se_target)
