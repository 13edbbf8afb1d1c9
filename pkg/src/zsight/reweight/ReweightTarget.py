from __future__ import annotations

from typing import Callable, Optional

import torch

from ..bridge.WeightMatrix import LogWeightMatrix
from ..models.TargetModel import TargetModel
from ..util import as_tensor

# (draws (n, d), cached log L (n,), cached log π (n,)) -> log numerator (n,)
LogNumerator = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]


class ReweightTarget:
    """An unnormalized density to estimate the normalizer of from an existing pool.

    The numerator is evaluated from pooled draws and their cached
    log-likelihoods and log-priors only, so no likelihood is ever recomputed.
    It must vanish wherever the pseudo-mixture does.

    Attributes:
        description (str): Label used in reports.
        log_numerator (LogNumerator): Log of the unnormalized target per draw, e.g. log L + log π_alt.
    """

    def __init__(self, description: str, log_numerator: LogNumerator) -> None:
        self.description = description
        self.log_numerator = log_numerator

    def __call__(self, draws: torch.Tensor, log_likelihood: torch.Tensor, log_prior: torch.Tensor) -> torch.Tensor:
        return as_tensor(self.log_numerator(draws, log_likelihood, log_prior))

    @classmethod
    def from_prior(cls, model_alt: TargetModel, description: Optional[str] = None) -> ReweightTarget:
        """Posterior under the alternative prior of ``model_alt``: log L + log π_alt."""

        def log_numerator(draws: torch.Tensor, log_likelihood: torch.Tensor, log_prior: torch.Tensor) -> torch.Tensor:
            return log_likelihood + model_alt.log_prior(draws)

        return cls(description or f"prior of {model_alt!r}", log_numerator)

    @classmethod
    def from_log_derivative(
        cls, log_derivative: Callable[[torch.Tensor], torch.Tensor], description: str = "log derivative"
    ) -> ReweightTarget:
        """Posterior under a prior given by its log density relative to the sampled prior, log dπ_alt/dπ."""

        def log_numerator(draws: torch.Tensor, log_likelihood: torch.Tensor, log_prior: torch.Tensor) -> torch.Tensor:
            return log_likelihood + log_prior + log_derivative(draws)

        return cls(description, log_numerator)

    @classmethod
    def posterior(cls) -> ReweightTarget:
        """The sampled posterior itself: log L + log π."""
        return cls("posterior", lambda draws, log_likelihood, log_prior: log_likelihood + log_prior)

    @classmethod
    def rung(cls, W: LogWeightMatrix, k: int) -> ReweightTarget:
        """Rung k of the bridge the pool was weighted for."""
        column = W.entries[:, k]

        def log_numerator(draws: torch.Tensor, log_likelihood: torch.Tensor, log_prior: torch.Tensor) -> torch.Tensor:
            if draws.shape[0] != column.shape[0]:
                raise ValueError(f"rung target holds {column.shape[0]} draws, got {draws.shape[0]}")

            return column + log_prior

        return cls(f"rung {k}", log_numerator)

    def __repr__(self) -> str:
        return f"ReweightTarget({self.description})"
