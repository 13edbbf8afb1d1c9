"""Samplers producing the pooled draws of a bridging sequence.

:func:`mc3_sample` couples one random-walk Metropolis chain per tempered rung
(:func:`rwm_chain` is the single-chain case) and :func:`sample_partial_ladder`
runs the conjugate :func:`gibbs_mixture` sampler once per partial-data rung of
the Normal mixture. Both return a :class:`DrawPool`.
"""

from .DrawPool import DrawPool
from .gibbs import GibbsTrace, gibbs_mixture, sample_partial_ladder
from .metropolis import ChainResult, mc3_sample, run_coupled_chains, rwm_chain
