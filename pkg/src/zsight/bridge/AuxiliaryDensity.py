from __future__ import annotations

import itertools
import math
from enum import Enum

import numpy as np
import torch
from einops import einsum
from scipy.optimize import minimize
from torch.distributions import MultivariateNormal

from ..errors import OptimizationError, UnsupportedModelError
from ..logger import logger
from ..models.quadrature import log_simpson_integral
from ..models.TargetModel import Box, TargetModel
from ..util import DTYPE, as_tensor, simpson_weights


class AuxiliaryFamily(str, Enum):
    TRUNCATED_NORMAL = "truncated_normal"
    TRUNCATED_STUDENT_T_NU1 = "truncated_student_t_nu1"


class AuxiliaryDensity:
    """A normalized reference density fitted at the posterior mode and truncated to the prior box.

    The untruncated density is a Normal (or a Student-t with one degree of
    freedom) with location ``location`` and precision ``precision``, the
    curvature of -log(prior * likelihood) at the mode. ``log_norm_const`` is
    the log of its mass inside the box, so :meth:`log_prob` integrates to one
    over the box.

    Attributes:
        family (AuxiliaryFamily): Distribution family.
        location (torch.Tensor): Mode, shape (d,).
        precision (torch.Tensor): Curvature at the mode, shape (d, d).
        box (Box): Truncation box.
        log_norm_const (float): log of the untruncated mass inside the box.
        regularized (bool): Whether the curvature needed a ridge to be positive-definite.
    """

    NU = 1.0

    def __init__(
        self,
        family: AuxiliaryFamily,
        location: torch.Tensor,
        precision: torch.Tensor,
        box: Box,
        grid_points_per_dim: int = 1001,
        regularized: bool = False,
    ) -> None:
        self.family = AuxiliaryFamily(family)
        self.location = as_tensor(location)
        self.precision = as_tensor(precision)
        self.box = box
        self.regularized = regularized

        self.log_norm_const = 0.0
        self.log_norm_const = log_simpson_integral(self.log_prob_untruncated, box, grid_points_per_dim)

    @property
    def covariance(self) -> torch.Tensor:
        return torch.linalg.inv(self.precision)

    @property
    def dimension(self) -> int:
        return self.location.shape[0]

    def log_prob_untruncated(self, theta: torch.Tensor) -> torch.Tensor:
        theta = as_tensor(theta)

        if self.family == AuxiliaryFamily.TRUNCATED_NORMAL:
            return MultivariateNormal(self.location, precision_matrix=self.precision).log_prob(theta)

        d = self.dimension
        nu = self.NU

        delta = theta - self.location
        mahalanobis = einsum(delta, self.precision, delta, "... i, i j, ... j -> ...")

        return (
            math.lgamma((nu + d) / 2)
            - math.lgamma(nu / 2)
            - d / 2 * math.log(nu * math.pi)
            + 0.5 * torch.logdet(self.precision)
            - (nu + d) / 2 * torch.log1p(mahalanobis / nu)
        )

    def log_prob(self, theta: torch.Tensor) -> torch.Tensor:
        """Log density of the box-truncated, normalized auxiliary; -inf outside the box."""
        theta = as_tensor(theta)

        return torch.where(
            self.box.contains(theta),
            self.log_prob_untruncated(theta) - self.log_norm_const,
            torch.tensor(-math.inf, dtype=DTYPE),
        )

    def with_family(self, family: AuxiliaryFamily) -> AuxiliaryDensity:
        """Same mode and curvature under another family."""
        return AuxiliaryDensity(family, self.location, self.precision, self.box, regularized=self.regularized)

    def __repr__(self) -> str:
        return (
            f"AuxiliaryDensity(family={self.family.value}, location={self.location.tolist()}, "
            f"log_norm_const={self.log_norm_const:.6f}, regularized={self.regularized})"
        )


def finite_difference_hessian(fn, point: torch.Tensor) -> torch.Tensor:
    """Central finite-difference Hessian with steps h_i = max(1e-4, 1e-4 |x_i|)."""
    point = as_tensor(point)
    d = point.shape[0]

    steps = torch.clamp(1e-4 * point.abs(), min=1e-4)
    eye = torch.eye(d, dtype=DTYPE)

    value = float(fn(point))
    hessian = torch.zeros((d, d), dtype=DTYPE)

    for i in range(d):
        hi = steps[i] * eye[i]
        hessian[i, i] = (float(fn(point + hi)) - 2 * value + float(fn(point - hi))) / steps[i] ** 2

        for j in range(i + 1, d):
            hj = steps[j] * eye[j]
            hessian[i, j] = hessian[j, i] = (
                float(fn(point + hi + hj))
                - float(fn(point + hi - hj))
                - float(fn(point - hi + hj))
                + float(fn(point - hi - hj))
            ) / (4 * steps[i] * steps[j])

    return hessian


def find_mode(model: TargetModel, starts_per_dim: int = 3, maxiter: int = 20000) -> torch.Tensor:
    """Posterior mode by Nelder-Mead from a grid of interior start points of the box."""
    box = model.support

    def objective(x: np.ndarray) -> float:
        value = float(model.log_posterior(torch.from_numpy(x).to(DTYPE)))

        return -value if math.isfinite(value) else math.inf

    fractions = [(i + 1) / (starts_per_dim + 1) for i in range(starts_per_dim)]

    best = None

    for corner in itertools.product(fractions, repeat=model.dimension):
        start = box.lower + (box.upper - box.lower) * as_tensor(corner)

        result = minimize(
            objective,
            start.numpy(),
            method="Nelder-Mead",
            options=dict(xatol=1e-10, fatol=1e-12, maxiter=maxiter, maxfev=2 * maxiter),
        )

        logger.debug(f"Nelder-Mead from {start.tolist()}: success={result.success} f={result.fun}")

        if result.success and math.isfinite(result.fun) and (best is None or result.fun < best.fun):
            best = result

    if best is None:
        raise OptimizationError(f"mode search did not converge from any of {starts_per_dim ** model.dimension} starts")

    return as_tensor(best.x)


def auxiliary_from_mode(
    model: TargetModel,
    family: AuxiliaryFamily = AuxiliaryFamily.TRUNCATED_NORMAL,
    grid_points_per_dim: int = 1001,
) -> AuxiliaryDensity:
    """Fits a box-truncated auxiliary density at the posterior mode.

    The mode comes from multi-start Nelder-Mead, the curvature from a central
    finite-difference Hessian of -log(prior * likelihood). A curvature that is
    not positive-definite gets a ridge of 1e-6 * trace / d and the density is
    flagged ``regularized``.

    Args:
        model (TargetModel): Model with a bounded box support.
        family (AuxiliaryFamily, optional): Defaults to the truncated Normal.
        grid_points_per_dim (int, optional): Quadrature nodes for the truncation constant.

    Returns:
        AuxiliaryDensity: Normalized auxiliary on the box.
    """
    if model.support is None:
        raise UnsupportedModelError("an auxiliary density needs a bounded box support to be normalized")

    mode = find_mode(model)

    precision = finite_difference_hessian(lambda x: -model.log_posterior(x), mode)
    precision = (precision + precision.T) / 2

    _, info = torch.linalg.cholesky_ex(precision)
    regularized = bool(info != 0)

    if regularized:
        d = precision.shape[0]
        ridge = 1e-6 * abs(float(torch.trace(precision))) / d

        logger.warning(f"Curvature at mode {mode.tolist()} is not positive-definite; adding ridge {ridge:.3e}")

        precision = precision + ridge * torch.eye(d, dtype=DTYPE)

    logger.info(f"Auxiliary {AuxiliaryFamily(family).value} at mode {mode.tolist()}")

    return AuxiliaryDensity(family, mode, precision, model.support, grid_points_per_dim, regularized=regularized)


def laplace_evidence(model: TargetModel, aux: AuxiliaryDensity) -> float:
    """Laplace approximation log π(μ) + log L(μ) + (d/2) log 2π - ½ log det(curvature)."""
    d = aux.dimension

    return float(
        model.log_posterior(aux.location) + d / 2 * math.log(2 * math.pi) - 0.5 * torch.logdet(aux.precision)
    )


def j_divergence(model: TargetModel, aux: AuxiliaryDensity, log_z: float, grid_points_per_dim: int = 1001) -> float:
    """Symmetric Kullback-Leibler divergence between the posterior and the auxiliary.

    Args:
        model (TargetModel): Bounded model.
        aux (AuxiliaryDensity): Normalized auxiliary on the same box.
        log_z (float): Log evidence normalizing the posterior, e.g. from :func:`quadrature_evidence`.
        grid_points_per_dim (int, optional): Odd quadrature resolution. Defaults to 1001.

    Returns:
        float: ∫ (p - h) (log p - log h) over the box.
    """
    if model.support is None:
        raise UnsupportedModelError("j_divergence needs a bounded box support")

    def integrand(theta: torch.Tensor) -> torch.Tensor:
        log_p = model.log_posterior(theta) - log_z
        log_h = aux.log_prob(theta)

        value = (torch.exp(log_p) - torch.exp(log_h)) * (log_p - log_h)

        return torch.where(torch.isfinite(log_p) & torch.isfinite(log_h), value, torch.zeros_like(value))

    n = grid_points_per_dim
    box = model.support

    axes = [torch.linspace(float(low), float(high), n, dtype=DTYPE) for low, high in zip(box.lower, box.upper)]

    weights = [simpson_weights(n, float(high - low) / (n - 1)) for low, high in zip(box.lower, box.upper)]

    grids = torch.meshgrid(*axes, indexing="ij")
    points = torch.stack(grids, dim=-1)

    weight = weights[0]
    for axis_weights in weights[1:]:
        weight = weight.unsqueeze(-1) * axis_weights

    return float((integrand(points) * weight).sum())
