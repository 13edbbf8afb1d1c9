import math
from typing import List, Sequence

import torch

from ..util import DTYPE


def temperature_schedule(m: int, c: float) -> torch.Tensor:
    """Prior-focused power-posterior temperatures t_j = (j / (m - 1))^c, j = 0..m-1.

    Args:
        m (int): Number of rungs, >= 2.
        c (float): Schedule exponent, > 0. Larger values crowd rungs near the prior.

    Returns:
        torch.Tensor: Temperatures with t[0] = 0 and t[-1] = 1 exactly.
    """
    if m < 2:
        raise ValueError(f"a temperature schedule needs m >= 2 rungs, got {m}")
    if c <= 0:
        raise ValueError(f"schedule exponent must be positive, got {c}")

    t = (torch.arange(m, dtype=DTYPE) / (m - 1)) ** c

    t[0] = 0.0
    t[-1] = 1.0

    return t


def apply_floor(r: Sequence[int], r_min: int) -> List[int]:
    """Raises interior subset sizes below r_min to r_min; the endpoints are untouched."""
    r = list(r)

    return [r[0]] + [max(size, r_min) for size in r[1:-1]] + [r[-1]]


def partial_data_schedule(n_tot: int, m: int, c: float, r_min: int = 0) -> List[int]:
    """Subset sizes r_j = floor(n_tot (j / (m - 1))^c) for partial-data posteriors.

    Interior rungs smaller than ``r_min`` are raised to it (a k-component mixture
    needs at least k observations), the first rung is the prior (r = 0) and the
    last is the full data.

    Args:
        n_tot (int): Total number of observations.
        m (int): Number of rungs, >= 2.
        c (float): Schedule exponent, > 0.
        r_min (int, optional): Smallest interior subset size. Defaults to 0.

    Returns:
        List[int]: Nondecreasing subset sizes.
    """
    if m < 2:
        raise ValueError(f"a partial-data schedule needs m >= 2 rungs, got {m}")
    if c <= 0:
        raise ValueError(f"schedule exponent must be positive, got {c}")
    if not 0 <= r_min <= n_tot:
        raise ValueError(f"r_min={r_min} must lie in [0, n_tot={n_tot}]")

    r = [math.floor(n_tot * (j / (m - 1)) ** c + 1e-9) for j in range(m)]

    r[0] = 0
    r[-1] = n_tot

    return apply_floor(r, r_min)
