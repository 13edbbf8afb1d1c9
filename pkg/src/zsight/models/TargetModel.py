from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import torch

from ..util import DTYPE, as_tensor


class Box:
    """Axis-aligned box [lower, upper] in parameter space.

    Attributes:
        lower (torch.Tensor): Lower corner, shape (d,).
        upper (torch.Tensor): Upper corner, shape (d,).
    """

    def __init__(self, lower: Sequence[float], upper: Sequence[float]) -> None:
        self.lower = as_tensor(lower).reshape(-1)
        self.upper = as_tensor(upper).reshape(-1)

        if self.lower.shape != self.upper.shape or not bool(torch.all(self.upper > self.lower)):
            raise ValueError(f"Invalid box with lower={self.lower.tolist()} upper={self.upper.tolist()}")

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def log_volume(self) -> float:
        return float(torch.log(self.upper - self.lower).sum())

    @property
    def center(self) -> torch.Tensor:
        return (self.lower + self.upper) / 2

    def contains(self, theta: torch.Tensor) -> torch.Tensor:
        return torch.all((theta >= self.lower) & (theta <= self.upper), dim=-1)

    def sample(self, n: int) -> torch.Tensor:
        """Uniform draws from the box using torch's global generator."""
        return self.lower + (self.upper - self.lower) * torch.rand((n, self.dimension), dtype=DTYPE)

    def __repr__(self) -> str:
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


class TargetModel(ABC):
    """A prior and a likelihood over a d-dimensional parameter space.

    Both densities are evaluated on batches: ``theta`` has shape (..., d) and
    results have shape (...). Out-of-support points get a log prior of -inf,
    zero likelihood is a log likelihood of -inf, never an error.

    Attributes:
        dimension (int): Number of parameters.
        support (Optional[Box]): Bounded prior support, or None when unbounded.
    """

    dimension: int
    support: Optional[Box] = None

    @abstractmethod
    def log_prior(self, theta: torch.Tensor) -> torch.Tensor:
        pass

    @abstractmethod
    def log_likelihood(self, theta: torch.Tensor) -> torch.Tensor:
        pass

    @abstractmethod
    def sample_prior(self, n: int) -> torch.Tensor:
        """Draws n points from the prior with torch's global generator."""
        pass

    def log_posterior(self, theta: torch.Tensor) -> torch.Tensor:
        """Unnormalized log posterior, -inf wherever the prior vanishes."""
        theta = as_tensor(theta)
        flat = theta.reshape(-1, theta.shape[-1])

        log_prior = self.log_prior(flat)
        inside = torch.isfinite(log_prior)

        log_posterior = torch.full_like(log_prior, -math.inf)

        if bool(inside.any()):
            log_posterior[inside] = log_prior[inside] + self.log_likelihood(flat[inside])

        return log_posterior.reshape(theta.shape[:-1])


class BoxPriorModel(TargetModel):
    """Model with a uniform prior on a bounded box."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float]) -> None:
        self.support = Box(lower, upper)
        self.dimension = self.support.dimension

    def log_prior(self, theta: torch.Tensor) -> torch.Tensor:
        theta = as_tensor(theta)

        return torch.where(
            self.support.contains(theta),
            torch.tensor(-self.support.log_volume, dtype=DTYPE),
            torch.tensor(-math.inf, dtype=DTYPE),
        )

    def sample_prior(self, n: int) -> torch.Tensor:
        return self.support.sample(n)


class FunctionModel(BoxPriorModel):
    """Uniform box prior with a user supplied batched log-likelihood function.

    Examples:

        .. code-block:: python

            model = FunctionModel(lambda theta: torch.log(theta[..., 0]), lower=[0.0], upper=[1.0])
    """

    def __init__(
        self,
        log_likelihood: Callable[[torch.Tensor], torch.Tensor],
        lower: Sequence[float],
        upper: Sequence[float],
    ) -> None:
        super().__init__(lower, upper)

        self._log_likelihood = log_likelihood

    def log_likelihood(self, theta: torch.Tensor) -> torch.Tensor:
        return self._log_likelihood(as_tensor(theta))
