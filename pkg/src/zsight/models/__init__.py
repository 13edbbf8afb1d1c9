"""Target models: a prior and a likelihood over a parameter space.

:class:`TargetModel` is the interface every estimator works against. It is
implemented by :class:`BoxPriorModel` (uniform prior on a bounded box) and its
subclasses :class:`BananaModel` and :class:`FunctionModel`, and by
:class:`MixtureModel`, the finite Normal mixture fitted to the galaxy
velocities.

:func:`quadrature_evidence` integrates bounded low-dimensional models by brute
force and is the ground truth the sampling based estimators are checked
against.
"""

from .BananaModel import BananaModel, banana_log_likelihood
from .galaxy import load_galaxy
from .MixtureModel import MixtureModel, build_mixture, mixture_log_likelihood, partial_log_likelihood
from .quadrature import log_simpson_integral, quadrature_evidence
from .TargetModel import Box, BoxPriorModel, FunctionModel, TargetModel
