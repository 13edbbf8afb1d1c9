import torch

from ..util import as_tensor


def ess(log_weights: torch.Tensor) -> float:
    """Effective sample size 1 / Σ u_i² of normalized importance weights u_i = exp(ℓ_i - logsumexp ℓ).

    -inf entries count as zero weight. Lies in [1, n] and is unchanged by adding a constant to every ℓ_i.
    """
    log_weights = as_tensor(log_weights).reshape(-1)

    if not bool(torch.isfinite(log_weights).any()):
        raise ValueError("ESS needs at least one finite log weight")

    normalized = log_weights - torch.logsumexp(log_weights, dim=0)

    return float(torch.exp(-torch.logsumexp(2 * normalized, dim=0)))
