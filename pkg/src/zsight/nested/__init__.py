"""Ellipsoidal nested sampling and three ways to sum it up.

:func:`nested_run` replaces the worst live point with a draw from the expanded
minimum volume ellipsoid (:func:`mvee`) of the live set and keeps every
rejected draw. The resulting :class:`NSRun` feeds

* :func:`ns_evidence`, the classic sum over deterministic prior-mass shrinkage,
* :func:`shell_recursive_evidence`, biased sampling with the prior restricted to
  likelihood shells as rungs, and
* :func:`ins_evidence`, importance nested sampling over all draws with the exactly
  known ellipsoid-mixture density.
"""

from .Ellipsoid import Ellipsoid, bounding_ellipsoid, log_unit_ball_volume, mvee
from .evidence import (
    PosteriorSample,
    ins_draws,
    ins_evidence,
    ins_log_density,
    ns_evidence,
    ns_posterior_weights,
    shell_pool,
    shell_recursive_evidence,
)
from .NestedSampler import NSRun, Shell, nested_run
