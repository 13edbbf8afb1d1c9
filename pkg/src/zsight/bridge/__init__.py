"""Bridging sequences between a normalized reference and the posterior.

A :class:`BridgeSpec` lists the m rung densities q_0, ..., q_{m-1}: power
posteriors π L^t, partial-data posteriors using the first r observations,
a geometric path from a fitted :class:`AuxiliaryDensity` to the posterior, or
the prior restricted to nested likelihood shells. Rung 0 always integrates to
one.

:func:`eval_weight_matrix` turns pooled draws into the
:class:`LogWeightMatrix` of prior-relative log weights that the estimators
consume.
"""

from .AuxiliaryDensity import (
    AuxiliaryDensity,
    AuxiliaryFamily,
    auxiliary_from_mode,
    finite_difference_hessian,
    j_divergence,
    laplace_evidence,
)
from .BridgeSpec import BridgeKind, BridgeSpec
from .schedules import apply_floor, partial_data_schedule, temperature_schedule
from .WeightMatrix import LogWeightMatrix, eval_weight_matrix
