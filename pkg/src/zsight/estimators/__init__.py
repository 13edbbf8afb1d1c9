"""Estimators of normalizing constants from pooled draws.

The core is :func:`recursive_normalize`, the self-consistent fixed point of
biased sampling (equivalently, reverse logistic regression), which returns
:class:`LogNormalizers` for every rung of the bridge at once. It requires the
rung overlap graph to be strongly connected, see :func:`check_connectivity`.
:class:`PseudoMixture` is the implied sampling density of the pooled draws and
drives prior reweighting.

:func:`tivis_estimate` reaches the same fixed point by thermodynamic
integration over adjacent rungs. :func:`hme` and :func:`ame` are the classical
harmonic and arithmetic mean baselines.
"""

from .baselines import ame, hme
from .recursive import (
    Connectivity,
    LogNormalizers,
    PseudoMixture,
    check_connectivity,
    log_denominator,
    pseudo_mixture_logdensity,
    recursive_normalize,
    recursive_update,
)
from .tivis import tivis_estimate
