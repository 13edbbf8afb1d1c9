"""Prior sensitivity without new likelihood calls.

Once the pseudo-mixture of a pool is normalized, the normalizer of any other
target that only changes the prior is one importance-sampling sum away:
:func:`reweight_evidence` for a :class:`ReweightTarget`,
:func:`reweight_posterior_expectation` for posterior functionals and
:func:`sensitivity_grid` for halving and doubling mixture hyperparameters.
:func:`posterior_over_k` combines per-k evidences into π(k | y).
"""

from .components import posterior_over_k, truncated_poisson_log_prior, uniform_log_prior
from .reweighting import (
    ReweightResult,
    SensitivityCell,
    log_importance_ratios,
    reweight_evidence,
    reweight_posterior_expectation,
    sensitivity_grid,
)
from .ReweightTarget import ReweightTarget
