from __future__ import annotations

import math
from typing import Optional

import einops
import torch
from scipy.spatial import ConvexHull, QhullError

from ..util import DTYPE, as_tensor


def log_unit_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1)


class Ellipsoid:
    """The set {θ : (θ - center)ᵀ shape (θ - center) <= 1}.

    Attributes:
        center (torch.Tensor): Shape (d,).
        shape (torch.Tensor): Symmetric positive-definite (d, d).
        log_volume (float): log of the unit-ball volume minus half log det shape.
    """

    # membership slack for points sampled exactly on the boundary
    TOLERANCE = 1e-12

    def __init__(self, center: torch.Tensor, shape: torch.Tensor) -> None:
        self.center = as_tensor(center).reshape(-1)
        self.shape = as_tensor(shape)

        self.shape = (self.shape + self.shape.T) / 2

        self.dimension = self.center.shape[0]

        if self.shape.shape != (self.dimension, self.dimension):
            raise ValueError(f"shape matrix {tuple(self.shape.shape)} does not match center of size {self.dimension}")

        # maps the unit ball onto the ellipsoid
        self.transform = torch.linalg.inv(torch.linalg.cholesky(self.shape)).T

        self.log_volume = log_unit_ball_volume(self.dimension) - 0.5 * float(torch.logdet(self.shape))

    def mahalanobis(self, theta: torch.Tensor) -> torch.Tensor:
        """(θ - center)ᵀ shape (θ - center) for points of shape (..., d)."""
        delta = as_tensor(theta) - self.center

        return einops.einsum(delta, self.shape, delta, "... i, i j, ... j -> ...")

    def contains(self, theta: torch.Tensor) -> torch.Tensor:
        return self.mahalanobis(theta) <= 1 + self.TOLERANCE

    def radius(self, theta: torch.Tensor) -> torch.Tensor:
        """Mahalanobis radius: 1 on the boundary, scales linearly along each axis."""
        return torch.sqrt(self.mahalanobis(theta))

    def near_boundary(self, theta: torch.Tensor, fraction: float) -> torch.Tensor:
        """Points whose radius exceeds 1 - fraction."""
        return self.radius(theta) > 1 - fraction

    def scale(self, factor: float) -> Ellipsoid:
        """Expands every axis by ``factor``; the volume grows by factor^d."""
        return Ellipsoid(self.center, self.shape / factor**2)

    def sample(self, n: int) -> torch.Tensor:
        """Uniform draws inside the ellipsoid from torch's global generator."""
        direction = torch.randn((n, self.dimension), dtype=DTYPE)
        direction = direction / direction.norm(dim=1, keepdim=True)

        radius = torch.rand((n, 1), dtype=DTYPE) ** (1 / self.dimension)

        return self.center + (radius * direction) @ self.transform.T

    @property
    def axes(self) -> torch.Tensor:
        """Semi-axis lengths, ascending."""
        return 1 / torch.sqrt(torch.linalg.eigvalsh(self.shape).flip(0))

    def __repr__(self) -> str:
        return f"Ellipsoid(center={self.center.tolist()}, axes={self.axes.tolist()})"


def _hull(points: torch.Tensor) -> torch.Tensor:
    try:
        hull = ConvexHull(points.numpy())
    except (QhullError, ValueError):
        return points

    return points[torch.as_tensor(hull.vertices, dtype=torch.long)]


def mvee(points: torch.Tensor, tol: float = 1e-4, max_iter: int = 1000, min_axis_ratio: float = 1e-6) -> Ellipsoid:
    """Minimum volume enclosing ellipsoid of a point set by Khachiyan's algorithm.

    Only convex hull vertices enter the iteration. Rank-deficient sets get
    their short axes inflated so that no semi-axis is shorter than
    ``min_axis_ratio`` times the longest, and the result is finally rescaled
    so that every input point lies inside.

    Args:
        points (torch.Tensor): Shape (n, d) with n >= 2.
        tol (float, optional): Stop when the weight update is smaller. Defaults to 1e-4.
        max_iter (int, optional): Iteration cap. Defaults to 1000.
        min_axis_ratio (float, optional): Floor on the minor to major axis ratio. Defaults to 1e-6.

    Returns:
        Ellipsoid: Enclosing ellipsoid.
    """
    points = as_tensor(points)

    if points.dim() != 2 or points.shape[0] < 2:
        raise ValueError("mvee needs at least 2 points")

    n_all, d = points.shape

    vertices = _hull(points) if n_all > d + 1 else points
    n = vertices.shape[0]

    lifted = torch.cat([vertices, torch.ones((n, 1), dtype=DTYPE)], dim=1)
    u = torch.full((n,), 1 / n, dtype=DTYPE)

    for _ in range(max_iter):
        X = einops.einsum(lifted, u, lifted, "n i, n, n j -> i j")
        M = einops.einsum(lifted, torch.linalg.pinv(X, hermitian=True), lifted, "n i, i j, n j -> n")

        j = int(torch.argmax(M))
        step = (float(M[j]) - d - 1) / ((d + 1) * (float(M[j]) - 1))

        if step <= 0:
            break

        updated = (1 - step) * u
        updated[j] += step

        change = float((updated - u).norm())
        u = updated

        if change < tol:
            break

    center = u @ vertices
    spread = d * (einops.einsum(vertices, u, vertices, "n i, n, n j -> i j") - torch.outer(center, center))

    values, vectors = torch.linalg.eigh((spread + spread.T) / 2)
    floor = (min_axis_ratio**2) * float(values.max().clamp(min=torch.finfo(DTYPE).tiny))
    values = values.clamp(min=floor)

    shape = (vectors / values) @ vectors.T

    ellipsoid = Ellipsoid(center, shape)

    radius = float(ellipsoid.mahalanobis(points).max())

    if radius > 0:
        ellipsoid = Ellipsoid(center, shape / radius)

    return ellipsoid


def bounding_ellipsoid(points: torch.Tensor, expand: Optional[float] = None) -> Ellipsoid:
    """MVEE of ``points``, optionally with every axis multiplied by ``expand``."""
    ellipsoid = mvee(points)

    return ellipsoid.scale(expand) if expand is not None else ellipsoid
