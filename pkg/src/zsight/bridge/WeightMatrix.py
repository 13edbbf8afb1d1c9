from __future__ import annotations

import math
from typing import TYPE_CHECKING, Dict

import torch

from ..models.TargetModel import TargetModel
from ..util import DTYPE, as_tensor
from .BridgeSpec import BridgeKind, BridgeSpec

if TYPE_CHECKING:
    from ..sampler.DrawPool import DrawPool


class LogWeightMatrix:
    """Prior-relative log weights log w_k(θ_i) = log q_k(θ_i) - log π(θ_i) of every pooled draw under every rung.

    This matrix, the labels and the per-rung counts are the entire input of
    the recursive normalizer.

    Attributes:
        entries (torch.Tensor): Shape (n, m), extended reals.
        labels (torch.Tensor): Rung each draw was sampled from, shape (n,).
        counts (torch.Tensor): Draws per rung, shape (m,).
    """

    def __init__(self, entries: torch.Tensor, labels: torch.Tensor, m: int = None) -> None:
        self.entries = as_tensor(entries)
        self.labels = torch.as_tensor(labels, dtype=torch.long)

        if self.entries.dim() != 2 or self.entries.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"weight matrix of shape {tuple(self.entries.shape)} does not match {self.labels.shape[0]} labels"
            )

        m = self.entries.shape[1] if m is None else m

        if self.entries.shape[1] != m:
            raise ValueError(f"weight matrix has {self.entries.shape[1]} columns for {m} rungs")
        if bool(torch.any(self.labels < 0)) or bool(torch.any(self.labels >= m)):
            raise ValueError(f"labels must lie in [0, {m})")
        if bool(torch.isnan(self.entries).any()):
            raise ValueError("weight matrix contains NaN")

        empty = ~torch.isfinite(self.entries).any(dim=1)
        if bool(empty.any()):
            raise ValueError(f"{int(empty.sum())} draws have no finite weight under any rung")

        self.counts = torch.bincount(self.labels, minlength=m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]

    @property
    def log_counts(self) -> torch.Tensor:
        return torch.log(self.counts.to(DTYPE))

    def shift_column(self, k: int, log_a: float) -> LogWeightMatrix:
        """Copy with log a added to column k."""
        entries = self.entries.clone()
        entries[:, k] += log_a

        return LogWeightMatrix(entries, self.labels)

    def select(self, rows: torch.Tensor) -> LogWeightMatrix:
        """Copy restricted to (or resampled by) the given row indices."""
        return LogWeightMatrix(self.entries[rows], self.labels[rows], self.m)

    def __repr__(self) -> str:
        return f"LogWeightMatrix(n={self.n}, m={self.m}, counts={self.counts.tolist()})"


def _geometric(t: torch.Tensor, start: torch.Tensor, end: torch.Tensor) -> torch.Tensor:
    """(1 - t) start + t end column-wise, exact at t = 0 and t = 1 even with infinite entries."""
    t = t.reshape(1, -1)
    start = start.reshape(-1, 1)
    end = end.reshape(-1, 1)

    mixed = (1 - t) * start + t * end

    return torch.where(t == 0, start.expand_as(mixed), torch.where(t == 1, end.expand_as(mixed), mixed))


def eval_weight_matrix(pool: DrawPool, spec: BridgeSpec, model: TargetModel) -> LogWeightMatrix:
    """Evaluates the log weight of every pooled draw under every rung of a bridge.

    Args:
        pool (DrawPool): Pooled draws with cached log-likelihoods and log-priors.
        spec (BridgeSpec): Bridging sequence.
        model (TargetModel): Model the draws were made for.

    Returns:
        LogWeightMatrix: Weights with pool labels and counts.
    """
    if not bool(torch.isfinite(pool.log_prior).all()):
        outside = int((~torch.isfinite(pool.log_prior)).sum())

        raise ValueError(f"{outside} pooled draws lie outside the prior support")

    log_likelihood = pool.log_likelihood
    zeros = torch.zeros_like(log_likelihood)

    if spec.kind == BridgeKind.POWER_POSTERIOR:
        entries = _geometric(spec.t, zeros, log_likelihood)

    elif spec.kind == BridgeKind.AUXILIARY_PATH:
        log_ratio = spec.aux.log_prob(pool.draws) - pool.log_prior

        entries = _geometric(spec.t, log_ratio, log_likelihood)

    elif spec.kind == BridgeKind.PARTIAL_DATA:
        cache: Dict[int, torch.Tensor] = {0: zeros, model.n_tot: log_likelihood}

        for size in spec.r:
            if size not in cache:
                cache[size] = model.partial_log_likelihood(size, pool.draws)

        entries = torch.stack([cache[size] for size in spec.r], dim=1)

    else:
        entries = torch.where(
            log_likelihood.unsqueeze(1) > spec.shells.unsqueeze(0),
            torch.tensor(0.0, dtype=DTYPE),
            torch.tensor(-math.inf, dtype=DTYPE),
        )
        entries[:, 0] = 0.0

    return LogWeightMatrix(entries, pool.labels, spec.m)
