import math
from typing import Optional

import torch
from scipy.integrate import simpson

from .. import CONFIG
from ..bridge.WeightMatrix import LogWeightMatrix
from ..errors import NonConvergenceError, SupportMismatchError
from ..logger import logger
from ..util import DTYPE
from .recursive import LogNormalizers, log_denominator


def _check_support(W: LogWeightMatrix) -> None:
    finite = torch.isfinite(W.entries)

    for k in range(1, W.m):
        mismatch = finite[:, k] ^ finite[:, k - 1]

        if bool(mismatch.any()):
            raise SupportMismatchError(
                f"rungs {k - 1} and {k} disagree on support for {int(mismatch.sum())} pooled draws"
            )


def tivis_estimate(
    W: LogWeightMatrix,
    normalizers_init: Optional[LogNormalizers] = None,
    quad_points: int = CONFIG.ESTIMATOR.QUAD_POINTS,
    tol: float = CONFIG.ESTIMATOR.TOL,
    max_iter: int = CONFIG.ESTIMATOR.MAX_ITER,
) -> LogNormalizers:
    """Thermodynamic integration via importance sampling from the pseudo-mixture.

    For each pair of adjacent rungs, log(Ẑ_k / Ẑ_{k-1}) is the integral over
    t in [0, 1] of the self-normalized average of W(i, k) - W(i, k-1) under
    importance weights u_i(t) ∝ q_{k-1}^(1-t) q_k^t / p, integrated by
    composite Simpson on ``quad_points`` nodes. The pseudo-mixture p is then
    rebuilt with the new normalizers and the pass repeated until no log Ẑ_k
    moves by more than ``tol``. The fixed point matches :func:`recursive_normalize`
    up to quadrature error.

    Args:
        W (LogWeightMatrix): Pooled weights; adjacent rungs must share support on the draws.
        normalizers_init (Optional[LogNormalizers], optional): Starting point. Defaults to log Ẑ = 0.
        quad_points (int, optional): Odd number >= 3 of nodes in t. Defaults to CONFIG.ESTIMATOR.QUAD_POINTS.
        tol (float, optional): Convergence tolerance. Defaults to CONFIG.ESTIMATOR.TOL.
        max_iter (int, optional): Pass cap. Defaults to CONFIG.ESTIMATOR.MAX_ITER.

    Returns:
        LogNormalizers: Anchored TIVIS estimates.
    """
    if quad_points < 3 or quad_points % 2 == 0:
        raise ValueError(f"quad_points must be odd and >= 3, got {quad_points}")

    _check_support(W)

    t = torch.linspace(0.0, 1.0, quad_points, dtype=DTYPE).unsqueeze(1)
    finite = torch.isfinite(W.entries)

    log_z = normalizers_init.log_z.clone() if normalizers_init is not None else torch.zeros(W.m, dtype=DTYPE)

    log_n = math.log(W.n)

    delta = math.inf
    iterations = 0

    while iterations < max_iter:
        log_p = log_denominator(W, log_z) - log_n

        updated = torch.zeros(W.m, dtype=DTYPE)

        for k in range(1, W.m):
            rows = finite[:, k] & finite[:, k - 1]

            start = W.entries[rows, k - 1]
            end = W.entries[rows, k]

            log_u = t * end + (1 - t) * start - log_p[rows]
            integrand = (torch.softmax(log_u, dim=1) * (end - start)).sum(dim=1)

            updated[k] = updated[k - 1] + float(simpson(integrand.numpy(), x=t.squeeze(1).numpy()))

        iterations += 1
        delta = float((updated - log_z).abs().max())
        log_z = updated

        if delta < tol:
            break
    else:
        raise NonConvergenceError(f"TIVIS did not converge in {max_iter} passes (delta={delta:.3e})", delta, iterations)

    logger.info(f"TIVIS converged in {iterations} passes: log_z={log_z.tolist()}")

    return LogNormalizers(log_z, iterations, delta, True, log_denominator(W, log_z))
