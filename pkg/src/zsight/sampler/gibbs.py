from __future__ import annotations

from typing import NamedTuple

import torch
from torch.distributions import Categorical, Dirichlet, Gamma

from .. import CONFIG
from ..bridge.BridgeSpec import BridgeKind, BridgeSpec
from ..errors import IdentifiabilityError
from ..logger import logger
from ..models.MixtureModel import MixtureModel
from ..pydantics.Experiment import MixtureHyperModel
from ..util import DTYPE, derive_seed, seeded, steps_for, thin_mask, timed
from .DrawPool import DrawPool


class GibbsTrace(NamedTuple):
    """Saved Gibbs draws: packed parameters (n, dimension) and allocations (n, r)."""

    params: torch.Tensor
    allocations: torch.Tensor


def _initial_state(model: MixtureModel, data: torch.Tensor):
    k = model.k
    hyper = model.hyper

    quantiles = (torch.arange(k, dtype=DTYPE) + 0.5) / k

    mu = torch.quantile(data, quantiles)
    precision = 1 / data.var() if data.shape[0] > 1 and float(data.var()) > 0 else torch.tensor(1.0, dtype=DTYPE)
    tau = precision.expand(k).clone()
    phi = torch.full((k,), 1 / k, dtype=DTYPE)

    if hyper.beta_fixed is not None:
        beta = torch.tensor(hyper.beta_fixed, dtype=DTYPE)
    else:
        beta = torch.tensor(hyper.beta1 / hyper.beta2, dtype=DTYPE)

    return phi, mu, tau, beta


def allocation_logits(data: torch.Tensor, phi: torch.Tensor, mu: torch.Tensor, tau: torch.Tensor) -> torch.Tensor:
    """Unnormalized log p(z_i = j | φ, μ, τ, y_i), shape (r, k)."""
    return torch.log(phi) + 0.5 * torch.log(tau) - 0.5 * tau * (data.unsqueeze(-1) - mu) ** 2


def mean_conditional(hyper: MixtureHyperModel, tau: torch.Tensor, counts: torch.Tensor, sums: torch.Tensor):
    """Mean and precision of the Normal full conditional of each μ_j."""
    precision = hyper.xi + tau * counts
    mean = (hyper.xi * hyper.kappa + tau * sums) / precision

    return mean, precision


def precision_conditional(hyper: MixtureHyperModel, beta: torch.Tensor, counts: torch.Tensor, squares: torch.Tensor):
    """Shape and rate of the Gamma full conditional of each τ_j; ``squares`` is Σ_{z_i = j} (y_i - μ_j)²."""
    return hyper.alpha + counts / 2, beta + squares.clamp(min=0) / 2


def beta_conditional(hyper: MixtureHyperModel, tau: torch.Tensor):
    """Shape and rate of the Gamma full conditional of β."""
    return torch.tensor(hyper.beta1 + tau.shape[-1] * hyper.alpha, dtype=DTYPE), hyper.beta2 + tau.sum()


def gibbs_mixture(
    model: MixtureModel,
    r: int,
    draws: int,
    thin: float = CONFIG.SAMPLER.THIN_GIBBS,
    seed: int = 0,
    burn_in: int = 100,
) -> GibbsTrace:
    """Conjugate Gibbs sampler for the mixture posterior given the first r observations.

    Each sweep updates allocations z, weights φ | z ~ Dirichlet(1 + n_j),
    means μ_j | z, τ_j ~ Normal, precisions τ_j | z, μ_j, β ~ Gamma and, unless
    fixed, β | τ ~ Gamma, in that order. With r = 0 the sweeps are replaced by
    independent prior draws.

    Args:
        model (MixtureModel): Mixture with data and hyperparameters.
        r (int): Number of observations (a prefix of the model's permutation), 0 or >= k.
        draws (int): Saved draws after thinning.
        thin (float, optional): Retention fraction. Defaults to CONFIG.SAMPLER.THIN_GIBBS.
        seed (int, optional): Seed of the chain. Defaults to 0.
        burn_in (int, optional): Discarded initial sweeps. Defaults to 100.

    Returns:
        GibbsTrace: Saved packed parameters and allocations.
    """
    k = model.k
    hyper = model.hyper

    if 0 < r < k:
        raise IdentifiabilityError(f"a {k}-component mixture needs at least {k} observations per rung, got r={r}")

    data = model.subset(r)

    with seeded(seed):
        if r == 0:
            return GibbsTrace(model.sample_prior(draws), torch.empty((draws, 0), dtype=torch.long))

        phi, mu, tau, beta = _initial_state(model, data)

        n_post = steps_for(draws, thin)
        keep = thin_mask(n_post, thin)

        saved_params, saved_allocations = [], []

        ones = torch.ones(k, dtype=DTYPE)

        for sweep in range(burn_in + n_post):
            z = Categorical(logits=allocation_logits(data, phi, mu, tau)).sample()

            one_hot = torch.nn.functional.one_hot(z, k).to(DTYPE)
            counts = one_hot.sum(dim=0)
            sums = one_hot.T @ data

            phi = Dirichlet(ones + counts).sample()

            mean, precision = mean_conditional(hyper, tau, counts, sums)
            mu = mean + torch.randn(k, dtype=DTYPE) / torch.sqrt(precision)

            squares = one_hot.T @ data**2 - 2 * mu * sums + counts * mu**2
            tau = Gamma(*precision_conditional(hyper, beta, counts, squares)).sample()

            if hyper.beta_fixed is None:
                beta = Gamma(*beta_conditional(hyper, tau)).sample()

            if sweep >= burn_in and bool(keep[sweep - burn_in]):
                saved_params.append(model.pack(phi, mu, tau, beta))
                saved_allocations.append(z)

    params = torch.stack(saved_params[:draws]) if draws > 0 else torch.empty((0, model.dimension), dtype=DTYPE)
    allocations = torch.stack(saved_allocations[:draws]) if draws > 0 else torch.empty((0, r), dtype=torch.long)

    return GibbsTrace(params, allocations)


@timed(logger)
def sample_partial_ladder(
    model: MixtureModel,
    spec: BridgeSpec,
    per_rung: int,
    thin: float = CONFIG.SAMPLER.THIN_GIBBS,
    seed: int = 0,
    burn_in: int = 100,
) -> DrawPool:
    """Runs one Gibbs chain per partial-data rung and pools the draws.

    Rung j's chain uses the seed derived from (seed, "gibbs", j).
    """
    if spec.kind != BridgeKind.PARTIAL_DATA:
        raise ValueError(f"partial-data ladders need a partial_data bridge, not {spec.kind.value}")

    logger.info(f"Gibbs ladder k={model.k} r={spec.r} per_rung={per_rung}")

    pools = []

    for j, r in enumerate(spec.r):
        trace = gibbs_mixture(model, r, per_rung, thin=thin, seed=derive_seed(seed, "gibbs", j), burn_in=burn_in)

        pools.append(
            DrawPool(
                trace.params,
                torch.full((per_rung,), j, dtype=torch.long),
                spec.m,
                model.log_likelihood(trace.params),
                model.log_prior(trace.params),
            )
        )

    pool = DrawPool.concat(pools)
    pool.seed = seed
    pool.thin = thin

    return pool
