import torch

from ..util import as_tensor
from .TargetModel import BoxPriorModel


def banana_log_likelihood(theta: torch.Tensor) -> torch.Tensor:
    """Banana-shaped log-likelihood on the plane.

    log L(θ) = -(10 (0.45 - θ₁))² / 4 - (20 (θ₂ / 2 - θ₁⁴))²

    Args:
        theta (torch.Tensor): Points of shape (..., 2).

    Returns:
        torch.Tensor: Log-likelihoods of shape (...).
    """
    theta = as_tensor(theta)

    theta1 = theta[..., 0]
    theta2 = theta[..., 1]

    return -((10 * (0.45 - theta1)) ** 2) / 4 - (20 * (theta2 / 2 - theta1**4)) ** 2


class BananaModel(BoxPriorModel):
    """Banana likelihood with a uniform prior of density 1/4 on [-0.5, 1.5]².

    The likelihood peaks at 0 on (0.45, 2 * 0.45⁴) and the evidence is
    log Z ≈ -4.1543.
    """

    LOWER = (-0.5, -0.5)
    UPPER = (1.5, 1.5)

    MODE = (0.45, 2 * 0.45**4)

    def __init__(self) -> None:
        super().__init__(self.LOWER, self.UPPER)

    def log_likelihood(self, theta: torch.Tensor) -> torch.Tensor:
        return banana_log_likelihood(theta)
