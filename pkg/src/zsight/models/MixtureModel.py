from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import torch
from torch.distributions import Dirichlet, Gamma, Normal

from ..pydantics.Experiment import MixtureHyperModel
from ..util import DTYPE, as_tensor
from .TargetModel import TargetModel

LOG_2PI = math.log(2 * math.pi)


class MixtureModel(TargetModel):
    """Finite Normal mixture with k components on univariate data.

    Parameters are packed in a flat vector of length 3k + 1 (3k when β is fixed
    by the hyperparameters): weights φ (k), means μ (k), precisions τ (k), β.
    Every method accepts a batch of such vectors with shape (..., 3k + 1).

    Partial-data likelihoods use the first r observations of one seeded
    permutation of the data, so smaller subsets are always prefixes of
    larger ones.

    Attributes:
        data (torch.Tensor): Observations, shape (n_tot,).
        k (int): Number of components.
        hyper (MixtureHyperModel): Prior hyperparameters.
        subset_seed (int): Seed of the subset permutation.
        permutation (torch.Tensor): Order in which observations enter partial-data rungs.
    """

    def __init__(
        self,
        data: Sequence[float],
        k: int,
        hyper: MixtureHyperModel,
        subset_seed: int = 0,
    ) -> None:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")

        self.data = as_tensor(data).reshape(-1)
        self.k = k
        self.hyper = hyper
        self.subset_seed = subset_seed

        self.dimension = 3 * k + (0 if hyper.beta_fixed is not None else 1)
        self.support = None

        generator = torch.Generator().manual_seed(subset_seed)
        self.permutation = torch.randperm(self.data.shape[0], generator=generator)

    @property
    def n_tot(self) -> int:
        return self.data.shape[0]

    def with_hyper(self, hyper: MixtureHyperModel) -> MixtureModel:
        """Same data, k and permutation under other hyperparameters."""
        if (hyper.beta_fixed is None) != (self.hyper.beta_fixed is None):
            raise ValueError("cannot switch between fixed and hierarchical β on the same parameter packing")

        return MixtureModel(self.data, self.k, hyper, subset_seed=self.subset_seed)

    def unpack(self, theta: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """Splits packed parameters into (φ, μ, τ, β)."""
        theta = as_tensor(theta)

        if theta.shape[-1] != self.dimension:
            raise ValueError(f"expected parameter vectors of length {self.dimension}, got {theta.shape[-1]}")

        k = self.k

        phi = theta[..., :k]
        mu = theta[..., k : 2 * k]
        tau = theta[..., 2 * k : 3 * k]

        if self.hyper.beta_fixed is not None:
            beta = torch.full(theta.shape[:-1], self.hyper.beta_fixed, dtype=DTYPE)
        else:
            beta = theta[..., 3 * k]

        return phi, mu, tau, beta

    def pack(self, phi: torch.Tensor, mu: torch.Tensor, tau: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
        parts = [as_tensor(phi), as_tensor(mu), as_tensor(tau)]

        if self.hyper.beta_fixed is None:
            parts.append(as_tensor(beta).unsqueeze(-1))

        return torch.cat(parts, dim=-1)

    def log_likelihood_subset(self, theta: torch.Tensor, data: torch.Tensor) -> torch.Tensor:
        """Σ_i log Σ_j φ_j N(y_i | μ_j, 1/τ_j) over the given observations."""
        phi, mu, tau, _ = self.unpack(theta)

        if not bool(torch.all((phi.sum(dim=-1) - 1).abs() <= 1e-12)) or bool(torch.any(phi < 0)):
            raise ValueError("mixture weights must lie on the simplex")

        if not bool(torch.all(tau > 0)):
            raise ValueError("mixture precisions must be positive")

        if data.shape[0] == 0:
            return torch.zeros(phi.shape[:-1], dtype=DTYPE)

        # (..., n, k)
        y = data.reshape((1,) * (phi.dim() - 1) + (-1, 1))
        log_components = (
            torch.log(phi).unsqueeze(-2)
            + 0.5 * torch.log(tau).unsqueeze(-2)
            - 0.5 * LOG_2PI
            - 0.5 * tau.unsqueeze(-2) * (y - mu.unsqueeze(-2)) ** 2
        )

        return torch.logsumexp(log_components, dim=-1).sum(dim=-1)

    def log_likelihood(self, theta: torch.Tensor) -> torch.Tensor:
        return self.log_likelihood_subset(theta, self.data)

    def subset(self, r: int) -> torch.Tensor:
        """The first r observations of the seeded permutation."""
        if not 0 <= r <= self.n_tot:
            raise ValueError(f"subset size r={r} outside [0, {self.n_tot}]")

        return self.data[self.permutation[:r]]

    def partial_log_likelihood(self, r: int, theta: torch.Tensor) -> torch.Tensor:
        return self.log_likelihood_subset(theta, self.subset(r))

    def log_prior(self, theta: torch.Tensor) -> torch.Tensor:
        phi, mu, tau, beta = self.unpack(theta)
        hyper = self.hyper

        inside = torch.all(tau > 0, dim=-1) & (beta > 0) & torch.all(phi > 0, dim=-1)
        inside &= (phi.sum(dim=-1) - 1).abs() <= 1e-9

        safe_phi = torch.where(inside.unsqueeze(-1), phi, torch.full_like(phi, 1 / self.k))
        safe_tau = torch.where(inside.unsqueeze(-1), tau, torch.ones_like(tau))
        safe_beta = torch.where(inside, beta, torch.ones_like(beta))

        log_prior = Normal(as_tensor(hyper.kappa), as_tensor(1 / math.sqrt(hyper.xi))).log_prob(mu).sum(dim=-1)
        log_prior = log_prior + Gamma(as_tensor(hyper.alpha), safe_beta.unsqueeze(-1)).log_prob(safe_tau).sum(dim=-1)

        if self.k > 1:
            log_prior = log_prior + Dirichlet(torch.ones(self.k, dtype=DTYPE)).log_prob(safe_phi)

        if hyper.beta_fixed is None:
            log_prior = log_prior + Gamma(as_tensor(hyper.beta1), as_tensor(hyper.beta2)).log_prob(safe_beta)

        return torch.where(inside, log_prior, torch.tensor(-math.inf, dtype=DTYPE))

    def sample_prior(self, n: int) -> torch.Tensor:
        hyper = self.hyper

        if hyper.beta_fixed is None:
            beta = Gamma(
                torch.tensor(hyper.beta1, dtype=DTYPE), torch.tensor(hyper.beta2, dtype=DTYPE)
            ).sample((n,))
        else:
            beta = torch.full((n,), hyper.beta_fixed, dtype=DTYPE)

        tau = Gamma(torch.full((n, self.k), hyper.alpha, dtype=DTYPE), beta.unsqueeze(-1).expand(n, self.k)).sample()
        mu = hyper.kappa + torch.randn((n, self.k), dtype=DTYPE) / math.sqrt(hyper.xi)
        phi = Dirichlet(torch.ones(self.k, dtype=DTYPE)).sample((n,))

        return self.pack(phi, mu, tau, beta)

    def __repr__(self) -> str:
        return f"MixtureModel(n_tot={self.n_tot}, k={self.k}, hyper={self.hyper!r})"


def mixture_log_likelihood(model: MixtureModel, params: torch.Tensor) -> torch.Tensor:
    """Full-data mixture log-likelihood of packed parameters."""
    return model.log_likelihood(params)


def partial_log_likelihood(model: MixtureModel, r: int, params: torch.Tensor) -> torch.Tensor:
    """Mixture log-likelihood of the first r observations of the model's permutation."""
    return model.partial_log_likelihood(r, params)


def build_mixture(
    k: int,
    preset: str = "astro",
    variant: str = "roeder",
    data: Optional[Sequence[float]] = None,
    subset_seed: int = 0,
    **overrides: float,
) -> MixtureModel:
    """Galaxy mixture model with a named hyperparameter preset."""
    from .galaxy import load_galaxy

    data = load_galaxy(variant) if data is None else as_tensor(data)

    return MixtureModel(data, k, MixtureHyperModel.preset(preset, data.tolist(), **overrides), subset_seed=subset_seed)
