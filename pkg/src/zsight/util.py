"""Module for utility functions used throughout the package."""

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from functools import wraps
from typing import Any, Callable, Iterable, Iterator, List

import torch

DTYPE = torch.float64

MASK64 = (1 << 64) - 1


def as_tensor(data: Any) -> torch.Tensor:
    """Converts data to a float64 cpu tensor without copying when it already is one."""
    return torch.as_tensor(data, dtype=DTYPE)


def splitmix64(value: int) -> int:
    """One round of the splitmix64 mixing function on a 64-bit integer."""
    value = (value + 0x9E3779B97F4A7C15) & MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & MASK64

    return value ^ (value >> 31)


def derive_seed(base_seed: int, tag: str, index: int = 0) -> int:
    """Derives an independent 64-bit seed for the stream keyed by (base_seed, tag, index).

    The tag is hashed with SHA-256 and folded in with splitmix64, so the seed of a
    replicate only depends on its key and never on the order replicates run in.

    Args:
        base_seed (int): Experiment base seed.
        tag (str): Purpose tag e.g. "replicate", "gibbs", "bootstrap".
        index (int, optional): Index within the purpose. Defaults to 0.

    Returns:
        int: Seed in [0, 2**63).
    """
    tag_hash = int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")

    seed = splitmix64((base_seed & MASK64) ^ tag_hash)
    seed = splitmix64(seed ^ (index & MASK64))

    return seed >> 1


@contextmanager
def seeded(seed: int) -> Iterator[None]:
    """Runs the body with torch's global cpu generator seeded to ``seed``.

    The generator state from before is restored on exit so seeded blocks
    do not leak into each other.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)

        yield


def thin_mask(n_steps: int, thin: float) -> torch.Tensor:
    """Boolean mask keeping a ``thin`` fraction of ``n_steps`` draws, evenly spread.

    Draw i is kept when floor((i + 1) * thin) > floor(i * thin).
    """
    index = torch.arange(n_steps, dtype=DTYPE)

    return torch.floor((index + 1) * thin) > torch.floor(index * thin)


def steps_for(kept: int, thin: float) -> int:
    """Smallest number of steps whose thinning mask keeps at least ``kept`` draws."""
    steps = max(0, math.ceil(kept / thin - 1e-9))

    while math.floor(steps * thin + 1e-9) < kept:
        steps += 1

    return steps


def log_mean_exp(values: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """log(mean(exp(values))) along ``dim``."""
    return torch.logsumexp(values, dim=dim) - math.log(values.shape[dim])


def simpson_weights(n: int, step: float) -> torch.Tensor:
    """Composite Simpson weights (1, 4, 2, 4, ..., 4, 1) * step / 3 for an odd number of nodes."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"Simpson's rule needs an odd number of nodes >= 3, got {n}")

    weights = torch.full((n,), 2.0, dtype=DTYPE)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0

    return weights * step / 3.0


def pool_map(fn: Callable, items: Iterable, workers: int = 1) -> List[Any]:
    """Maps fn over items, in a process pool when workers > 1. Result order follows items."""
    items = list(items)

    if workers <= 1:
        return [fn(item) for item in items]

    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def timed(lggr: logging.Logger, level: int = logging.DEBUG) -> Callable:
    """Decorator factory logging the wall time of every call to ``lggr`` at ``level``.

    .. code-block:: python

        @timed(logger)
        def nested_run(...):
            ...
    """

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()

            try:
                return func(*args, **kwargs)
            finally:
                lggr.log(level, f"{func.__qualname__} took {time.perf_counter() - start:.3f}s")

        return wrapper

    return decorator
