from __future__ import annotations

import csv
from typing import Any, Dict, List, Optional, Sequence

import torch

from ..util import as_tensor


class DrawPool:
    """Pooled, already thinned draws from the m rungs of a bridging sequence.

    Log-likelihoods (full data) and log-priors are cached per draw, so weight
    matrices and prior reweighting never call the likelihood again.

    Attributes:
        draws (torch.Tensor): Parameter points, shape (n, d).
        labels (torch.Tensor): Zero-based rung of each draw, shape (n,).
        m (int): Number of rungs.
        log_likelihood (torch.Tensor): Full-data log-likelihood per draw, shape (n,).
        log_prior (torch.Tensor): Log prior density per draw, shape (n,).
        seed (Optional[int]): Seed the pool was sampled with.
        thin (Optional[float]): Retention fraction used when thinning.
        diagnostics (Dict[str, Any]): Sampler statistics (acceptance and swap rates).
    """

    def __init__(
        self,
        draws: torch.Tensor,
        labels: torch.Tensor,
        m: int,
        log_likelihood: torch.Tensor,
        log_prior: torch.Tensor,
        seed: Optional[int] = None,
        thin: Optional[float] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.draws = as_tensor(draws)
        self.labels = torch.as_tensor(labels, dtype=torch.long)
        self.m = m
        self.log_likelihood = as_tensor(log_likelihood)
        self.log_prior = as_tensor(log_prior)
        self.seed = seed
        self.thin = thin
        self.diagnostics = diagnostics if diagnostics is not None else {}

        n = self.draws.shape[0]

        if self.labels.shape[0] != n or self.log_likelihood.shape[0] != n or self.log_prior.shape[0] != n:
            raise ValueError("draws, labels, log_likelihood and log_prior must have the same length")
        if n > 0 and (int(self.labels.min()) < 0 or int(self.labels.max()) >= m):
            raise ValueError(f"labels must lie in [0, {m})")

    @property
    def n(self) -> int:
        return self.draws.shape[0]

    @property
    def counts(self) -> torch.Tensor:
        return torch.bincount(self.labels, minlength=self.m)

    def rung(self, j: int) -> torch.Tensor:
        """Draws sampled from rung j."""
        return self.draws[self.labels == j]

    @classmethod
    def concat(cls, pools: Sequence[DrawPool]) -> DrawPool:
        """Stacks pools over the same rungs, e.g. one pool per rung from separate samplers."""
        if len(pools) == 0:
            raise ValueError("nothing to concatenate")

        m = pools[0].m

        if any(pool.m != m for pool in pools):
            raise ValueError("pools must share the number of rungs")

        return cls(
            torch.cat([pool.draws for pool in pools]),
            torch.cat([pool.labels for pool in pools]),
            m,
            torch.cat([pool.log_likelihood for pool in pools]),
            torch.cat([pool.log_prior for pool in pools]),
            seed=pools[0].seed,
            thin=pools[0].thin,
            diagnostics={key: value for pool in pools for key, value in pool.diagnostics.items()},
        )

    def to_csv(self, path: str, replicate: int = 0, append: bool = False) -> None:
        """Writes the trace with columns replicate, rung, draw, theta_0, ..., theta_{d-1}."""
        counters: List[int] = [0] * self.m

        with open(path, "a" if append else "w", newline="") as file:
            writer = csv.writer(file)

            if not append:
                writer.writerow(["replicate", "rung", "draw"] + [f"theta_{i}" for i in range(self.draws.shape[1])])

            for label, draw in zip(self.labels.tolist(), self.draws.tolist()):
                writer.writerow([replicate, label, counters[label]] + [repr(value) for value in draw])

                counters[label] += 1

    def state_dict(self) -> Dict[str, Any]:
        return dict(
            draws=self.draws,
            labels=self.labels,
            m=self.m,
            log_likelihood=self.log_likelihood,
            log_prior=self.log_prior,
            seed=self.seed,
            thin=self.thin,
            diagnostics=self.diagnostics,
        )

    @classmethod
    def from_state_dict(cls, state: Dict[str, Any]) -> DrawPool:
        return cls(**state)

    def __repr__(self) -> str:
        return f"DrawPool(n={self.n}, m={self.m}, counts={self.counts.tolist()}, seed={self.seed})"
