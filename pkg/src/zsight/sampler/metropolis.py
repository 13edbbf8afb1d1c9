from __future__ import annotations

import math
from typing import Callable, NamedTuple, Tuple

import torch

from .. import CONFIG
from ..bridge.BridgeSpec import BridgeKind, BridgeSpec
from ..logger import logger
from ..models.TargetModel import TargetModel
from ..pydantics.Experiment import ChainConfig
from ..util import DTYPE, as_tensor, seeded, steps_for, thin_mask, timed
from .DrawPool import DrawPool

# (reference log density, log prior + log likelihood, log prior, log likelihood) per chain
Evaluation = Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]


class ChainResult(NamedTuple):
    draws: torch.Tensor
    acceptance_rate: float
    scale: torch.Tensor


class CoupledChains(NamedTuple):
    draws: torch.Tensor
    log_prior: torch.Tensor
    log_likelihood: torch.Tensor
    acceptance: torch.Tensor
    swap_acceptance: torch.Tensor
    scale: torch.Tensor


def _rung_log_density(reference: torch.Tensor, posterior: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """log q = (1 - t) log h + t (log π + log L), exact at the endpoints."""
    mixed = (1 - t) * reference + t * posterior

    return torch.where(t == 0, reference, torch.where(t == 1, posterior, mixed))


def _proposal_scale(cfg: ChainConfig, d: int) -> torch.Tensor:
    scale = as_tensor(cfg.proposal_scale).reshape(-1)

    if scale.shape[0] == 1:
        scale = scale.expand(d)
    if scale.shape[0] != d:
        raise ValueError(f"proposal_scale has {scale.shape[0]} entries for {d} dimensions")

    return scale


def run_coupled_chains(
    evaluate: Callable[[torch.Tensor], Evaluation],
    init: torch.Tensor,
    t: torch.Tensor,
    burn_in: int,
    n_post: int,
    thin: float,
    scale: torch.Tensor,
    swap_interval: int,
) -> CoupledChains:
    """Runs m Gaussian random-walk Metropolis chains, one per tempered rung, with adjacent swaps.

    Chain j targets q_j ∝ h^(1 - t_j) (π L)^t_j. Each chain's step size is
    multiplied by its own factor, adapted during burn-in towards the middle of
    the configured acceptance window and frozen afterwards. Every
    ``swap_interval`` steps, adjacent pairs are offered a state exchange from
    the top rung down. Randomness comes from torch's global generator.

    Args:
        evaluate (Callable): Maps states (m, d) to (log h, log π + log L, log π, log L), each (m,).
        init (torch.Tensor): Start states (m, d); every chain must have finite density.
        t (torch.Tensor): Temperatures (m,).
        burn_in (int): Adaptation steps, discarded.
        n_post (int): Steps after burn-in, thinned by ``thin``.
        thin (float): Retention fraction.
        scale (torch.Tensor): Per-dimension base step size (d,).
        swap_interval (int): Steps between swap sweeps.

    Returns:
        CoupledChains: Thinned states (n_kept, m, d) with cached log prior and log likelihood.
    """
    state = init.clone()
    m, d = state.shape

    reference, posterior, log_prior, log_likelihood = evaluate(state)
    log_q = _rung_log_density(reference, posterior, t)

    if not bool(torch.isfinite(log_q).all()):
        raise ValueError("initial state lies outside the support of the target")

    low, high = CONFIG.SAMPLER.TARGET_ACCEPT
    target_accept = (low + high) / 2

    log_multiplier = torch.zeros(m, dtype=DTYPE)

    keep = thin_mask(n_post, thin)

    kept_draws, kept_log_prior, kept_log_likelihood = [], [], []

    accepted = torch.zeros(m, dtype=DTYPE)
    swap_attempts = torch.zeros(max(m - 1, 0), dtype=DTYPE)
    swap_accepts = torch.zeros(max(m - 1, 0), dtype=DTYPE)

    for step in range(burn_in + n_post):
        proposal = state + torch.randn((m, d), dtype=DTYPE) * scale * torch.exp(log_multiplier).unsqueeze(-1)

        p_reference, p_posterior, p_log_prior, p_log_likelihood = evaluate(proposal)
        p_log_q = _rung_log_density(p_reference, p_posterior, t)

        log_u = torch.log(torch.rand(m, dtype=DTYPE))
        accept = log_u < p_log_q - log_q

        state = torch.where(accept.unsqueeze(-1), proposal, state)
        reference = torch.where(accept, p_reference, reference)
        posterior = torch.where(accept, p_posterior, posterior)
        log_prior = torch.where(accept, p_log_prior, log_prior)
        log_likelihood = torch.where(accept, p_log_likelihood, log_likelihood)
        log_q = torch.where(accept, p_log_q, log_q)

        if step < burn_in:
            log_multiplier += (accept.to(DTYPE) - target_accept) / (step + 1) ** 0.6
        else:
            accepted += accept.to(DTYPE)

        if m > 1 and (step + 1) % swap_interval == 0:
            log_u = torch.log(torch.rand(m - 1, dtype=DTYPE))

            for j in range(m - 2, -1, -1):
                i = j + 1

                # q_j at chain i's state minus q_i at chain i's state, and the mirror term
                log_ratio = (_rung_log_density(reference[i], posterior[i], t[j]) - log_q[i]) + (
                    _rung_log_density(reference[j], posterior[j], t[i]) - log_q[j]
                )

                if step >= burn_in:
                    swap_attempts[j] += 1

                if bool(log_u[j] < log_ratio):
                    order = torch.arange(m)
                    order[i], order[j] = j, i

                    state = state[order]
                    reference = reference[order]
                    posterior = posterior[order]
                    log_prior = log_prior[order]
                    log_likelihood = log_likelihood[order]
                    log_q = _rung_log_density(reference, posterior, t)

                    if step >= burn_in:
                        swap_accepts[j] += 1

        if step >= burn_in and bool(keep[step - burn_in]):
            kept_draws.append(state)
            kept_log_prior.append(log_prior)
            kept_log_likelihood.append(log_likelihood)

    if kept_draws:
        draws = torch.stack(kept_draws)
        kept_prior = torch.stack(kept_log_prior)
        kept_likelihood = torch.stack(kept_log_likelihood)
    else:
        draws = torch.empty((0, m, d), dtype=DTYPE)
        kept_prior = kept_likelihood = torch.empty((0, m), dtype=DTYPE)

    acceptance = accepted / n_post if n_post > 0 else torch.full((m,), math.nan, dtype=DTYPE)
    swap_acceptance = torch.where(swap_attempts > 0, swap_accepts / swap_attempts.clamp(min=1), math.nan)

    return CoupledChains(
        draws,
        kept_prior,
        kept_likelihood,
        acceptance,
        swap_acceptance,
        scale * torch.exp(log_multiplier).unsqueeze(-1),
    )


def rwm_chain(
    target_log_density: Callable[[torch.Tensor], torch.Tensor],
    init: torch.Tensor,
    cfg: ChainConfig,
) -> ChainResult:
    """Gaussian random-walk Metropolis on a single target.

    Runs ``cfg.steps`` iterations, the first ``cfg.burn_in`` of which adapt
    the step size and are discarded; the rest are thinned by ``cfg.thin``.

    Args:
        target_log_density (Callable): Batched log density, (b, d) -> (b,).
        init (torch.Tensor): Start point (d,), finite under the target.
        cfg (ChainConfig): Chain settings, including the seed.

    Returns:
        ChainResult: Kept draws (n_kept, d), post burn-in acceptance rate and final step size.
    """
    init = as_tensor(init).reshape(1, -1)
    d = init.shape[1]

    def evaluate(states: torch.Tensor) -> Evaluation:
        value = target_log_density(states)
        zeros = torch.zeros_like(value)

        return value, value, zeros, zeros

    with seeded(cfg.seed):
        chains = run_coupled_chains(
            evaluate,
            init,
            torch.ones(1, dtype=DTYPE),
            cfg.burn_in,
            cfg.steps - cfg.burn_in,
            cfg.thin,
            _proposal_scale(cfg, d),
            cfg.swap_interval,
        )

    return ChainResult(chains.draws[:, 0], float(chains.acceptance[0]), chains.scale[0])


@timed(logger)
def mc3_sample(model: TargetModel, spec: BridgeSpec, per_rung: int, cfg: ChainConfig) -> DrawPool:
    """Metropolis-coupled MCMC over the rungs of a power-posterior or auxiliary-path bridge.

    All chains start at the auxiliary mode (auxiliary path) or the centre of
    the prior box. The number of steps after burn-in is the smallest that
    leaves ``per_rung`` draws per rung after thinning by ``cfg.thin``, so
    ``cfg.steps`` only bounds the burn-in.

    Args:
        model (TargetModel): Target model.
        spec (BridgeSpec): Bridge of kind power_posterior or auxiliary_path.
        per_rung (int): Thinned draws to keep per rung.
        cfg (ChainConfig): Chain settings, including the seed.

    Returns:
        DrawPool: m * per_rung labelled draws with acceptance and swap rates in its diagnostics.
    """
    if spec.kind not in (BridgeKind.POWER_POSTERIOR, BridgeKind.AUXILIARY_PATH):
        raise ValueError(f"MC3 samples power_posterior or auxiliary_path bridges, not {spec.kind.value}")
    if per_rung <= 0:
        raise ValueError(f"per_rung must be positive, got {per_rung}")

    aux = spec.aux if spec.kind == BridgeKind.AUXILIARY_PATH else None

    def evaluate(states: torch.Tensor) -> Evaluation:
        log_prior = model.log_prior(states)
        inside = torch.isfinite(log_prior)

        log_likelihood = torch.full_like(log_prior, -math.inf)
        posterior = torch.full_like(log_prior, -math.inf)

        if bool(inside.any()):
            log_likelihood[inside] = model.log_likelihood(states[inside])
            posterior[inside] = log_prior[inside] + log_likelihood[inside]

        reference = aux.log_prob(states) if aux is not None else log_prior

        return reference, posterior, log_prior, log_likelihood

    m = spec.m

    with seeded(cfg.seed):
        if aux is not None:
            start = aux.location
        elif model.support is not None:
            start = model.support.center
        else:
            start = model.sample_prior(1)[0]

        n_post = steps_for(per_rung, cfg.thin)

        logger.info(f"MC3 on {type(model).__name__}: m={m} per_rung={per_rung} steps={cfg.burn_in + n_post}")

        chains = run_coupled_chains(
            evaluate,
            start.reshape(1, -1).expand(m, -1).clone(),
            spec.t,
            cfg.burn_in,
            n_post,
            cfg.thin,
            _proposal_scale(cfg, model.dimension),
            cfg.swap_interval,
        )

    # (n_kept, m, ...) -> rung-major rows
    draws = chains.draws[:per_rung].transpose(0, 1).reshape(m * per_rung, -1)
    log_prior = chains.log_prior[:per_rung].transpose(0, 1).reshape(-1)
    log_likelihood = chains.log_likelihood[:per_rung].transpose(0, 1).reshape(-1)
    labels = torch.arange(m).repeat_interleave(per_rung)

    diagnostics = dict(
        acceptance=chains.acceptance.tolist(),
        swap_acceptance=chains.swap_acceptance.tolist(),
    )

    logger.info(f"MC3 done: acceptance={[round(a, 3) for a in diagnostics['acceptance']]}")

    return DrawPool(draws, labels, m, log_likelihood, log_prior, seed=cfg.seed, thin=cfg.thin, diagnostics=diagnostics)
