"""zsight: marginal likelihoods by recursive pathways.

Estimates Bayesian normalizing constants from pooled draws of a bridging
sequence with the biased-sampling / reverse-logistic-regression fixed point,
and carries the samplers, nested-sampling variants, uncertainty machinery and
prior-sensitivity reweighting needed around it.
"""

import os

import yaml

from .pydantics.Config import ConfigModel

PATH = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(PATH, "config.yaml"), "r") as file:
    CONFIG = ConfigModel(**yaml.safe_load(file))

from .logger import logger

logger.disabled = not CONFIG.APP.LOGGING
logger.setLevel(CONFIG.APP.LEVEL)

from .errors import ZsightError
from .models import BananaModel, MixtureModel, TargetModel, quadrature_evidence
from .bridge import BridgeSpec, LogWeightMatrix, eval_weight_matrix
from .sampler import DrawPool, mc3_sample, gibbs_mixture
from .estimators import LogNormalizers, PseudoMixture, recursive_normalize, tivis_estimate
from .nested import nested_run, ns_evidence, ins_evidence, shell_recursive_evidence
from .reweight import ReweightTarget, reweight_evidence
from .experiments import run_experiment
