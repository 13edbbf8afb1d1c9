import torch

from ..util import as_tensor, log_mean_exp


def hme(log_likelihoods: torch.Tensor) -> float:
    """Harmonic mean estimator from posterior draws: -log mean exp(-ℓ).

    Known to converge very slowly (often with infinite variance); kept as a baseline.
    """
    log_likelihoods = as_tensor(log_likelihoods).reshape(-1)

    if log_likelihoods.shape[0] == 0:
        raise ValueError("hme needs at least one draw")

    return float(-log_mean_exp(-log_likelihoods))


def ame(log_likelihoods: torch.Tensor) -> float:
    """Prior arithmetic mean estimator from prior draws: log mean exp(ℓ)."""
    log_likelihoods = as_tensor(log_likelihoods).reshape(-1)

    if log_likelihoods.shape[0] == 0:
        raise ValueError("ame needs at least one draw")

    return float(log_mean_exp(log_likelihoods))
