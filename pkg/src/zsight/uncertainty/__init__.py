"""Standard errors for normalizer estimates.

:func:`quasi_hessian_covariance` inverts the Hessian of the reverse logistic
regression quasi log-likelihood, :func:`bootstrap_se` resamples the pooled
draws within rungs while perturbing the normalizers, and :func:`ess` measures
the effective sample size of importance weights.
"""

from .bootstrap import bootstrap_se
from .covariance import (
    CovarianceEstimate,
    quasi_hessian,
    quasi_hessian_covariance,
    quasi_log_likelihood,
    rung_probabilities,
)
from .ess import ess
