from __future__ import annotations

import csv
import math
from typing import List, NamedTuple, Optional

import torch

from .. import CONFIG
from ..errors import SamplerStallError, UnsupportedModelError
from ..logger import logger
from ..models.TargetModel import Box, BoxPriorModel, TargetModel
from ..util import DTYPE, as_tensor, seeded, timed
from .Ellipsoid import Ellipsoid, mvee


class Shell(NamedTuple):
    """One nested-sampling step.

    The worst live point ``dead`` (log-likelihood ``threshold``) is replaced by
    ``point``, the first draw from ``ellipsoid`` to beat the threshold. Every
    draw made before it is kept in ``rejected``.
    """

    threshold: float
    ellipsoid: Ellipsoid
    dead: torch.Tensor
    point: torch.Tensor
    log_likelihood: float
    rejected: torch.Tensor
    rejected_log_likelihood: torch.Tensor

    @property
    def overhead(self) -> int:
        return self.rejected.shape[0]


class NSRun:
    """A completed ellipsoidal nested-sampling run.

    Attributes:
        shells (List[Shell]): One per step, thresholds increasing.
        initial (torch.Tensor): The n_live prior draws the run started from.
        initial_log_likelihood (torch.Tensor): Their log-likelihoods.
        live (torch.Tensor): Final live set.
        live_log_likelihood (torch.Tensor): Its log-likelihoods.
        support (Box): Prior box.
        n_live (int): Live-set size.
        expand_factor (float): Axis expansion applied to every MVEE.
        seed (Optional[int]): Seed of the run.
        boundary_hits (int): Accepted points whose Mahalanobis radius exceeded 1 - BOUNDARY_WARN.
    """

    def __init__(
        self,
        shells: List[Shell],
        initial: torch.Tensor,
        initial_log_likelihood: torch.Tensor,
        live: torch.Tensor,
        live_log_likelihood: torch.Tensor,
        support: Box,
        n_live: int,
        expand_factor: float,
        seed: Optional[int] = None,
        boundary_hits: int = 0,
    ) -> None:
        self.shells = shells
        self.initial = as_tensor(initial)
        self.initial_log_likelihood = as_tensor(initial_log_likelihood)
        self.live = as_tensor(live)
        self.live_log_likelihood = as_tensor(live_log_likelihood)
        self.support = support
        self.n_live = n_live
        self.expand_factor = expand_factor
        self.seed = seed
        self.boundary_hits = boundary_hits

    @property
    def steps(self) -> int:
        return len(self.shells)

    @property
    def thresholds(self) -> torch.Tensor:
        return torch.tensor([shell.threshold for shell in self.shells], dtype=DTYPE)

    @property
    def overheads(self) -> torch.Tensor:
        return torch.tensor([shell.overhead for shell in self.shells], dtype=torch.long)

    @property
    def mean_overhead(self) -> float:
        return float(self.overheads.to(DTYPE).mean()) if self.steps > 0 else math.nan

    @property
    def likelihood_calls(self) -> int:
        return self.n_live + self.steps + int(self.overheads.sum())

    @property
    def accepted(self) -> torch.Tensor:
        if self.steps == 0:
            return torch.empty((0, self.support.dimension), dtype=DTYPE)

        return torch.stack([shell.point for shell in self.shells])

    @property
    def accepted_log_likelihood(self) -> torch.Tensor:
        return torch.tensor([shell.log_likelihood for shell in self.shells], dtype=DTYPE)

    def to_csv(self, path: str, replicate: int = 0, append: bool = False) -> None:
        """Writes one row per shell: replicate, shell, threshold, overhead, log_volume, accepted point."""
        d = self.support.dimension

        with open(path, "a" if append else "w", newline="") as file:
            writer = csv.writer(file)

            if not append:
                writer.writerow(
                    ["replicate", "shell", "threshold", "overhead", "log_volume", "log_likelihood"]
                    + [f"theta_{i}" for i in range(d)]
                )

            for index, shell in enumerate(self.shells):
                writer.writerow(
                    [replicate, index, repr(shell.threshold), shell.overhead, repr(shell.ellipsoid.log_volume)]
                    + [repr(shell.log_likelihood)]
                    + [repr(value) for value in shell.point.tolist()]
                )

    def __repr__(self) -> str:
        return f"NSRun(n_live={self.n_live}, steps={self.steps}, mean_overhead={self.mean_overhead:.3f})"


def _box_log_likelihood(model: TargetModel, support: Box, points: torch.Tensor) -> torch.Tensor:
    inside = support.contains(points)
    log_likelihood = torch.full((points.shape[0],), -math.inf, dtype=DTYPE)

    if bool(inside.any()):
        log_likelihood[inside] = model.log_likelihood(points[inside])

    return log_likelihood


@timed(logger)
def nested_run(
    model: TargetModel,
    n_live: int,
    steps: int,
    expand_factor: float = CONFIG.NESTED.EXPAND,
    seed: int = 0,
    max_proposals: int = CONFIG.NESTED.MAX_PROPOSALS,
) -> NSRun:
    """Nested sampling with replacements drawn uniformly from the expanded MVEE of the live set.

    Each step removes the live point with the lowest log-likelihood, fits the
    minimum volume ellipsoid to the live set, expands its axes by
    ``expand_factor`` and draws from it until a point beats the removed
    log-likelihood. Draws falling outside the prior box score -inf without
    a likelihood call but count as rejected proposals.

    Args:
        model (TargetModel): Model with a uniform prior on a box.
        n_live (int): Live points, at least d + 1.
        steps (int): Replacements to make, at least 1.
        expand_factor (float, optional): Axis expansion of the ellipsoid. Defaults to CONFIG.NESTED.EXPAND.
        seed (int, optional): Seed of the run. Defaults to 0.
        max_proposals (int, optional): Proposal cap per step. Defaults to CONFIG.NESTED.MAX_PROPOSALS.

    Returns:
        NSRun: Shells, initial and final live sets.
    """
    if not isinstance(model, BoxPriorModel):
        raise UnsupportedModelError(f"nested sampling needs a uniform box prior, {type(model).__name__} has none")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if n_live < model.dimension + 1:
        raise ValueError(f"n_live must be at least {model.dimension + 1}, got {n_live}")
    if expand_factor < 1:
        raise ValueError(f"expand_factor must be >= 1, got {expand_factor}")

    support = model.support
    boundary_warn = CONFIG.NESTED.BOUNDARY_WARN

    logger.info(f"Nested run: n_live={n_live} steps={steps} expand={expand_factor} seed={seed}")

    shells: List[Shell] = []
    boundary_hits = 0

    with seeded(seed):
        initial = support.sample(n_live)
        initial_log_likelihood = _box_log_likelihood(model, support, initial)

        live = initial.clone()
        live_log_likelihood = initial_log_likelihood.clone()

        batch = 8

        for step in range(steps):
            worst = int(torch.argmin(live_log_likelihood))
            threshold = float(live_log_likelihood[worst])

            ellipsoid = mvee(live).scale(expand_factor)

            rejected, rejected_log_likelihood = [], []
            proposals = 0
            accepted = None

            while accepted is None:
                if proposals >= max_proposals:
                    raise SamplerStallError(
                        f"no draw beat threshold {threshold:.6g} at shell {step} after {proposals} proposals",
                        step,
                        proposals,
                    )

                size = min(batch, max_proposals - proposals)

                candidates = ellipsoid.sample(size)
                log_likelihood = _box_log_likelihood(model, support, candidates)

                better = torch.nonzero(log_likelihood > threshold).flatten()

                if better.shape[0] > 0:
                    first = int(better[0])
                    accepted = (candidates[first], float(log_likelihood[first]))

                    rejected.append(candidates[:first])
                    rejected_log_likelihood.append(log_likelihood[:first])

                    proposals += first + 1
                else:
                    rejected.append(candidates)
                    rejected_log_likelihood.append(log_likelihood)

                    proposals += size

                    batch = min(2 * batch, 4096)

            point, point_log_likelihood = accepted

            # next batch sized to the observed acceptance rate
            batch = max(8, min(4096, 2 * proposals))

            if bool(ellipsoid.near_boundary(point, boundary_warn)):
                boundary_hits += 1

                logger.debug(
                    f"shell {step}: accepted point at Mahalanobis radius {float(ellipsoid.radius(point)):.4f} "
                    f"> {1 - boundary_warn:.4f}"
                )

            shells.append(
                Shell(
                    threshold,
                    ellipsoid,
                    live[worst].clone(),
                    point,
                    point_log_likelihood,
                    torch.cat(rejected),
                    torch.cat(rejected_log_likelihood),
                )
            )

            live[worst] = point
            live_log_likelihood[worst] = point_log_likelihood

    run = NSRun(
        shells,
        initial,
        initial_log_likelihood,
        live,
        live_log_likelihood,
        support,
        n_live,
        expand_factor,
        seed=seed,
        boundary_hits=boundary_hits,
    )

    if boundary_hits > 0:
        logger.warning(
            f"{boundary_hits} accepted points lay beyond Mahalanobis radius {1 - boundary_warn:.4f} of their "
            "ellipsoid; the expanded ellipsoid may not enclose the constrained region"
        )

    logger.info(f"Nested run done: mean overhead {run.mean_overhead:.3f}, {run.likelihood_calls} likelihood calls")

    return run
