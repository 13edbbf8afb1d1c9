from __future__ import annotations

import math
from typing import List, NamedTuple, Optional

import numpy as np
import torch
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .. import CONFIG
from ..bridge.WeightMatrix import LogWeightMatrix
from ..errors import ConnectivityError, NonConvergenceError, UnsampledRungError
from ..logger import logger
from ..util import DTYPE, as_tensor


class Connectivity(NamedTuple):
    connected: bool
    components: List[List[int]]


class LogNormalizers:
    """Estimated log normalizing constants of the m rungs, anchored at log Ẑ_0 = 0.

    Attributes:
        log_z (torch.Tensor): Shape (m,), log_z[0] == 0.
        iterations (int): Sweeps performed.
        final_delta (float): Largest change of any entry in the last sweep.
        converged (bool): Whether final_delta fell below the tolerance.
        log_denominator (torch.Tensor): Per draw logsumexp_s(log n_s + W(i, s) - log Ẑ_s) at log_z, shape (n,).
    """

    def __init__(
        self,
        log_z: torch.Tensor,
        iterations: int,
        final_delta: float,
        converged: bool,
        log_denominator: Optional[torch.Tensor] = None,
    ) -> None:
        self.log_z = as_tensor(log_z)
        self.iterations = iterations
        self.final_delta = final_delta
        self.converged = converged
        self.log_denominator = log_denominator

    @property
    def m(self) -> int:
        return self.log_z.shape[0]

    def __repr__(self) -> str:
        return (
            f"LogNormalizers(log_z={[round(v, 6) for v in self.log_z.tolist()]}, "
            f"iterations={self.iterations}, converged={self.converged})"
        )


def log_denominator(W: LogWeightMatrix, log_z: torch.Tensor) -> torch.Tensor:
    """logsumexp_s(log n_s + W(i, s) - log Ẑ_s) for every draw i."""
    return torch.logsumexp(W.log_counts + W.entries - log_z, dim=1)


def check_connectivity(W: LogWeightMatrix) -> Connectivity:
    """Checks that the rung overlap graph is strongly connected.

    There is an edge h -> j when some draw sampled from rung j has a finite
    weight under rung h. A unique fixed point of the recursive normalizer
    exists only when this directed graph is strongly connected.

    Args:
        W (LogWeightMatrix): Weight matrix with labels.

    Returns:
        Connectivity: Whether the graph is strongly connected, and its strongly connected components.
    """
    finite = torch.isfinite(W.entries).to(torch.long)

    # overlap[h, j] = number of draws labeled j with finite weight under h
    one_hot = torch.nn.functional.one_hot(W.labels, W.m)
    overlap = (finite.T @ one_hot) > 0

    graph = csr_matrix(overlap.numpy().astype(np.int8))
    n_components, assignment = connected_components(graph, directed=True, connection="strong")

    components = [[int(j) for j in np.flatnonzero(assignment == c)] for c in range(n_components)]
    components.sort()

    return Connectivity(n_components == 1, components)


def recursive_normalize(
    W: LogWeightMatrix,
    tol: float = CONFIG.ESTIMATOR.TOL,
    max_iter: int = CONFIG.ESTIMATOR.MAX_ITER,
) -> LogNormalizers:
    """Biased-sampling / reverse-logistic-regression estimate of every rung's normalizer.

    Iterates

        log Ẑ_k <- logsumexp_i [ W(i, k) - logsumexp_s ( log n_s + W(i, s) - log Ẑ_s ) ]

    in place over k = 0..m-1 (Gauss-Seidel), subtracting log Ẑ_0 after each
    sweep, until no entry moves by more than ``tol``. Starts from log Ẑ = 0.

    Args:
        W (LogWeightMatrix): Pooled weights, labels and counts.
        tol (float, optional): Convergence tolerance on the largest change. Defaults to CONFIG.ESTIMATOR.TOL.
        max_iter (int, optional): Sweep cap. Defaults to CONFIG.ESTIMATOR.MAX_ITER.

    Returns:
        LogNormalizers: Anchored estimates with the final per-draw log denominators.
    """
    unsampled = [k for k in range(W.m) if not bool(torch.isfinite(W.entries[:, k]).any())]

    if unsampled:
        raise UnsampledRungError(f"rungs {unsampled} have no draw with finite weight", [[k] for k in unsampled])

    connectivity = check_connectivity(W)

    if not connectivity.connected:
        raise ConnectivityError(
            f"rung overlap graph is not strongly connected; components {connectivity.components}",
            connectivity.components,
        )

    log_counts = W.log_counts
    entries = W.entries

    log_z = torch.zeros(W.m, dtype=DTYPE)

    delta = math.inf
    iterations = 0

    while iterations < max_iter:
        previous = log_z.clone()

        for k in range(W.m):
            denominator = torch.logsumexp(log_counts + entries - log_z, dim=1)
            log_z[k] = torch.logsumexp(entries[:, k] - denominator, dim=0)

        log_z = log_z - log_z[0]

        iterations += 1
        delta = float((log_z - previous).abs().max())

        logger.debug(f"recursive sweep {iterations}: delta={delta:.3e}")

        if delta < tol:
            break
    else:
        raise NonConvergenceError(
            f"recursive normalizer did not converge in {max_iter} sweeps (delta={delta:.3e})", delta, iterations
        )

    logger.info(f"Recursive normalizer converged in {iterations} sweeps: log_z={log_z.tolist()}")

    return LogNormalizers(log_z, iterations, delta, True, log_denominator(W, log_z))


def recursive_update(W: LogWeightMatrix, log_z: torch.Tensor) -> torch.Tensor:
    """One simultaneous application of the right-hand side of the fixed-point equations, anchored at rung 0."""
    denominator = log_denominator(W, log_z)
    updated = torch.logsumexp(W.entries - denominator.unsqueeze(1), dim=0)

    return updated - updated[0]


class PseudoMixture:
    """The mixture Σ_j (n_j / n) q_j / Ẑ_j of the rung densities with estimated normalizers.

    Attributes:
        W (LogWeightMatrix): Pooled weights.
        normalizers (LogNormalizers): Converged normalizers.
    """

    def __init__(self, W: LogWeightMatrix, normalizers: LogNormalizers) -> None:
        if not normalizers.converged:
            raise ValueError("pseudo-mixture needs converged normalizers")

        self.W = W
        self.normalizers = normalizers

    def log_density(self) -> torch.Tensor:
        """log p(θ_i) / π(θ_i) for every pooled draw."""
        if self.normalizers.log_denominator is not None:
            return self.normalizers.log_denominator - math.log(self.W.n)

        return pseudo_mixture_logdensity(self, self.W.entries)


def mixture_log_weights(W: LogWeightMatrix) -> torch.Tensor:
    return W.log_counts - math.log(W.n)


def pseudo_mixture_logdensity(P: PseudoMixture, row: torch.Tensor) -> torch.Tensor:
    """Prior-relative log pseudo-mixture density logsumexp_j(log n_j - log n + row[j] - log Ẑ_j).

    Args:
        P (PseudoMixture): Pseudo-mixture.
        row (torch.Tensor): Weight-matrix row (m,) or rows (b, m).

    Returns:
        torch.Tensor: log p / π per row.
    """
    row = as_tensor(row)

    return torch.logsumexp(mixture_log_weights(P.W) + row - P.normalizers.log_z, dim=-1)
