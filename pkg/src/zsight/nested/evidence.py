from __future__ import annotations

import math
from typing import NamedTuple, Optional

import einops
import torch

from .. import CONFIG
from ..bridge.BridgeSpec import BridgeSpec
from ..bridge.WeightMatrix import eval_weight_matrix
from ..errors import InvariantError, RankDeficiencyError
from ..estimators.recursive import recursive_normalize
from ..logger import logger
from ..pydantics.Report import EstimateReport
from ..sampler.DrawPool import DrawPool
from ..uncertainty.covariance import quasi_hessian_covariance, rung_probabilities
from ..util import DTYPE, as_tensor, log_mean_exp, seeded
from .NestedSampler import NSRun


class PosteriorSample(NamedTuple):
    points: torch.Tensor
    log_likelihood: torch.Tensor
    log_weights: torch.Tensor


def _log_shrinkage(run: NSRun) -> torch.Tensor:
    """log(X̂_{i-1} - X̂_i) with X̂_i = exp(-i / n_live), for i = 1..steps."""
    i = torch.arange(1, run.steps + 1, dtype=DTYPE)

    return -(i - 1) / run.n_live + math.log(-math.expm1(-1 / run.n_live))


def ns_posterior_weights(run: NSRun) -> PosteriorSample:
    """Dead points with log weights log L_i + log(X̂_{i-1} - X̂_i), followed by the final live set.

    Each final live point carries log L + log X̂_final - log n_live. The
    weights sum to the classic nested sampling evidence.
    """
    d = run.support.dimension

    dead = torch.stack([shell.dead for shell in run.shells]) if run.steps > 0 else torch.empty((0, d), dtype=DTYPE)

    log_x_final = -run.steps / run.n_live

    points = torch.cat([dead, run.live])
    log_likelihood = torch.cat([run.thresholds, run.live_log_likelihood])
    log_weights = torch.cat(
        [
            run.thresholds + _log_shrinkage(run),
            run.live_log_likelihood + log_x_final - math.log(run.n_live),
        ]
    )

    return PosteriorSample(points, log_likelihood, log_weights)


def ns_evidence(run: NSRun) -> float:
    """Classic nested sampling evidence Σ_i L_i (X̂_{i-1} - X̂_i) + mean(L_live) X̂_final, in log space."""
    return float(torch.logsumexp(ns_posterior_weights(run).log_weights, dim=0))


def _live_snapshots(run: NSRun, steps: list) -> list:
    """Indices into ``cat([initial, accepted])`` of the live set right after each step in ``steps``.

    Replays the run: step i swaps the lowest log-likelihood live point for
    accepted draw i, with ties resolved as the sampler resolves them.
    """
    live = torch.arange(run.n_live, dtype=torch.long)
    live_log_likelihood = run.initial_log_likelihood.clone()
    accepted_log_likelihood = run.accepted_log_likelihood

    wanted = set(steps)
    snapshots = []

    for step in range(run.steps):
        worst = int(torch.argmin(live_log_likelihood))

        live[worst] = run.n_live + step
        live_log_likelihood[worst] = accepted_log_likelihood[step]

        if step in wanted:
            snapshots.append(live.clone())

    return snapshots


def shell_pool(run: NSRun, rung_every: Optional[int] = None) -> tuple:
    """Pools the draws of a run over a decimated ladder of live-set snapshots.

    Rung 0 is the prior and holds the initial draws. Rung q >= 1 holds the
    n_live points alive right after step (q - 1) * rung_every, which are
    draws from the prior restricted to log L above that step's threshold.
    The final live set closes the ladder when its step is not already a
    rung. A draw alive at several snapshots appears once per rung.

    Returns:
        tuple: (DrawPool, BridgeSpec) of the ladder.
    """
    rung_every = run.n_live if rung_every is None else rung_every

    if rung_every < 1:
        raise ValueError(f"rung_every must be >= 1, got {rung_every}")

    steps = list(range(0, run.steps, rung_every))

    if run.steps > 0 and steps[-1] != run.steps - 1:
        steps.append(run.steps - 1)

    m = len(steps) + 1

    thresholds = run.thresholds[steps] if steps else torch.empty(0, dtype=DTYPE)

    indices = torch.cat([torch.arange(run.n_live, dtype=torch.long)] + _live_snapshots(run, steps))
    labels = torch.arange(m, dtype=torch.long).repeat_interleave(run.n_live)

    all_points = torch.cat([run.initial, run.accepted])
    all_log_likelihood = torch.cat([run.initial_log_likelihood, run.accepted_log_likelihood])

    points = all_points[indices]
    log_likelihood = all_log_likelihood[indices]
    log_prior = torch.full_like(log_likelihood, -run.support.log_volume)

    pool = DrawPool(points, labels, m, log_likelihood, log_prior, seed=run.seed)

    return pool, BridgeSpec.nested_shells(thresholds)


def shell_recursive_evidence(
    run: NSRun,
    rung_every: Optional[int] = None,
    tol: float = CONFIG.ESTIMATOR.TOL,
    max_iter: int = CONFIG.ESTIMATOR.MAX_ITER,
) -> EstimateReport:
    """Evidence from a nested run by biased sampling over indicator shells.

    The pooled draws are treated as sampled from the prior restricted to
    log L above each rung's threshold. The rung normalizers (prior masses)
    come from the recursive normalizer and the evidence follows by
    reweighting the pseudo-mixture to the posterior. The draws are not
    independent given the thresholds, so the Hessian standard error is
    reported but flagged as unreliable.

    Args:
        run (NSRun): Completed run.
        rung_every (Optional[int], optional): Steps per rung. Defaults to n_live.
        tol (float, optional): Recursive normalizer tolerance. Defaults to CONFIG.ESTIMATOR.TOL.
        max_iter (int, optional): Recursive normalizer sweep cap. Defaults to CONFIG.ESTIMATOR.MAX_ITER.

    Returns:
        EstimateReport: Evidence with per-rung log prior masses.
    """
    pool, spec = shell_pool(run, rung_every)

    W = eval_weight_matrix(pool, spec, None)
    normalizers = recursive_normalize(W, tol=tol, max_iter=max_iter)

    log_n = math.log(W.n)

    # prior-relative target: likelihood
    log_ratio = pool.log_likelihood - (normalizers.log_denominator - log_n)
    log_z = float(torch.logsumexp(log_ratio, dim=0) - log_n)

    se_hessian = None

    if W.m > 1:
        try:
            covariance = quasi_hessian_covariance(W, normalizers)
        except RankDeficiencyError as error:
            logger.warning(f"shell-recursive SE unavailable: {error}")
        else:
            u = torch.softmax(log_ratio, dim=0)
            gradient = u @ rung_probabilities(W, normalizers.log_z)[:, 1:]

            variance = float(gradient @ covariance.cov @ gradient) + float(((u - 1 / W.n) ** 2).sum())
            se_hessian = math.sqrt(max(variance, 0.0))
    else:
        u = torch.softmax(log_ratio, dim=0)
        se_hessian = math.sqrt(float(((u - 1 / W.n) ** 2).sum()))

    return EstimateReport(
        method="shell_recursive",
        log_z=log_z,
        log_z_rungs=normalizers.log_z.tolist(),
        se_hessian=se_hessian,
        diagnostics=dict(
            se_hessian_unreliable=True,
            rungs=W.m,
            iterations=normalizers.iterations,
            likelihood_calls=run.likelihood_calls,
        ),
        seed=run.seed,
    )


def _components(run: NSRun):
    """Sampling components: the prior box (the initial draws), then one ellipsoid per shell."""
    if run.steps == 0:
        d = run.support.dimension

        return (
            torch.empty((0, d), dtype=DTYPE),
            torch.empty((0, d, d), dtype=DTYPE),
            torch.empty(0, dtype=DTYPE),
            torch.empty(0, dtype=DTYPE),
        )

    centers = torch.stack([shell.ellipsoid.center for shell in run.shells])
    shapes = torch.stack([shell.ellipsoid.shape for shell in run.shells])
    log_volumes = torch.tensor([shell.ellipsoid.log_volume for shell in run.shells], dtype=DTYPE)
    counts = (run.overheads + 1).to(DTYPE)

    return centers, shapes, log_volumes, counts


def ins_log_density(run: NSRun, points: torch.Tensor, chunk: int = 1024) -> torch.Tensor:
    """log p(θ) of the INS sampling mixture Σ_k (n_k / n) I(θ ∈ E_k) / V_k.

    Component 0 is the prior box with n_0 = n_live, then one ellipsoid per
    shell with n_k = 1 + its rejected draws. Ellipsoids are not clipped to
    the box.
    """
    points = as_tensor(points)

    centers, shapes, log_volumes, counts = _components(run)

    n_total = run.n_live + float(counts.sum())
    log_total = math.log(n_total)

    box_term = torch.where(
        run.support.contains(points),
        torch.tensor(math.log(run.n_live) - log_total - run.support.log_volume, dtype=DTYPE),
        torch.tensor(-math.inf, dtype=DTYPE),
    )

    if run.steps == 0:
        return box_term

    log_weights = torch.log(counts) - log_total - log_volumes

    result = torch.empty(points.shape[0], dtype=DTYPE)

    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]

        delta = block.unsqueeze(1) - centers.unsqueeze(0)
        quadratic = einops.einsum(delta, shapes, delta, "n k i, k i j, n k j -> n k")

        inside = torch.where(quadratic <= 1 + 1e-12, log_weights, torch.tensor(-math.inf, dtype=DTYPE))

        result[start : start + chunk] = torch.logsumexp(
            torch.cat([box_term[start : start + chunk].unsqueeze(1), inside], dim=1), dim=1
        )

    return result


def ins_draws(run: NSRun):
    """All draws of a run with their log-likelihoods and component index (0 = prior box)."""
    points = [run.initial]
    log_likelihood = [run.initial_log_likelihood]
    components = [torch.zeros(run.n_live, dtype=torch.long)]

    for k, shell in enumerate(run.shells, start=1):
        points.extend([shell.rejected, shell.point.unsqueeze(0)])
        log_likelihood.extend([shell.rejected_log_likelihood, torch.tensor([shell.log_likelihood], dtype=DTYPE)])
        components.append(torch.full((shell.overhead + 1,), k, dtype=torch.long))

    return torch.cat(points), torch.cat(log_likelihood), torch.cat(components)


def ins_evidence(
    run: NSRun,
    B: int = CONFIG.BOOTSTRAP.B,
    seed: int = 0,
) -> EstimateReport:
    """Importance nested sampling: every draw of the run, accepted or rejected, weighted by the known mixture density.

    Draws outside the prior box contribute nothing to the sum but count in n.
    The standard error comes from a bootstrap that resamples draws within
    each sampling component.

    Args:
        run (NSRun): Completed run with its rejected draws.
        B (int, optional): Bootstrap replicates; 0 skips the SE. Defaults to CONFIG.BOOTSTRAP.B.
        seed (int, optional): Bootstrap seed. Defaults to 0.

    Returns:
        EstimateReport: INS evidence.
    """
    points, log_likelihood, components = ins_draws(run)

    log_p = ins_log_density(run, points)

    if not bool(torch.isfinite(log_p).all()):
        raise InvariantError(f"{int((~torch.isfinite(log_p)).sum())} INS draws lie in no sampling component")

    n = points.shape[0]

    log_prior = torch.where(
        run.support.contains(points),
        torch.tensor(-run.support.log_volume, dtype=DTYPE),
        torch.tensor(-math.inf, dtype=DTYPE),
    )

    terms = log_likelihood + log_prior - log_p
    log_z = float(log_mean_exp(terms))

    se_bootstrap = None

    if B > 0:
        # components are contiguous in draw order
        sizes = torch.bincount(components)
        starts = torch.cumsum(sizes, dim=0) - sizes

        with seeded(seed):
            offsets = torch.floor(torch.rand((B, n), dtype=DTYPE) * sizes[components]).to(torch.long)

        rows = starts[components] + offsets

        replicates = log_mean_exp(terms[rows], dim=1)
        se_bootstrap = float(replicates.std())

    return EstimateReport(
        method="ins",
        log_z=log_z,
        se_bootstrap=se_bootstrap,
        diagnostics=dict(draws=n, components=run.steps + 1, likelihood_calls=run.likelihood_calls),
        seed=run.seed,
    )
