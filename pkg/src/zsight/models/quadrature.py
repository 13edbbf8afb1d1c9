import math
from typing import Callable

import torch

from ..errors import UnsupportedModelError
from ..util import DTYPE, simpson_weights
from .TargetModel import Box, TargetModel


def log_simpson_integral(
    log_integrand: Callable[[torch.Tensor], torch.Tensor],
    box: Box,
    grid_points_per_dim: int,
    chunk: int = 1 << 20,
) -> float:
    """Log of the composite Simpson integral of exp(log_integrand) over a box.

    Simpson weights are positive, so the sum is taken in log space with
    logsumexp and never underflows. The grid is walked in chunks of
    ``chunk`` nodes.

    Args:
        log_integrand (Callable): Batched function of points (..., d) returning (...).
        box (Box): Integration domain.
        grid_points_per_dim (int): Odd number of nodes per axis, >= 3.

    Returns:
        float: log ∫ exp(log_integrand).
    """
    n = grid_points_per_dim
    dimension = box.dimension

    axes = [torch.linspace(float(low), float(high), n, dtype=DTYPE) for low, high in zip(box.lower, box.upper)]
    log_weights = [
        torch.log(simpson_weights(n, float(high - low) / (n - 1))) for low, high in zip(box.lower, box.upper)
    ]

    total = n**dimension
    strides = [n ** (dimension - 1 - axis) for axis in range(dimension)]

    partials = []

    for start in range(0, total, chunk):
        flat = torch.arange(start, min(start + chunk, total))
        index = [(flat // stride) % n for stride in strides]

        points = torch.stack([axes[axis][index[axis]] for axis in range(dimension)], dim=-1)
        log_weight = sum(log_weights[axis][index[axis]] for axis in range(dimension))

        partials.append(torch.logsumexp(log_integrand(points) + log_weight, dim=0))

    return float(torch.logsumexp(torch.stack(partials), dim=0))


def quadrature_evidence(model: TargetModel, grid_points_per_dim: int = 2001) -> float:
    """Brute-force log evidence of a bounded model by composite Simpson quadrature.

    Args:
        model (TargetModel): Model with a box support and dimension <= 3.
        grid_points_per_dim (int, optional): Odd number of nodes per axis. Defaults to 2001.

    Returns:
        float: log ∫ π(θ) L(θ) dθ over the box.
    """
    if model.support is None:
        raise UnsupportedModelError(f"{type(model).__name__} has unbounded support; quadrature needs a box")

    if model.dimension > 3:
        raise UnsupportedModelError(f"quadrature supports at most 3 dimensions, got {model.dimension}")

    if grid_points_per_dim < 3 or grid_points_per_dim % 2 == 0:
        raise ValueError(f"grid_points_per_dim must be odd and >= 3, got {grid_points_per_dim}")

    return log_simpson_integral(model.log_posterior, model.support, grid_points_per_dim)
