"""Experiment plumbing: config driven runs, replicate studies and the command line.

:class:`Runner` turns a validated :class:`~zsight.pydantics.Experiment.ExperimentConfig`
into an :class:`~zsight.pydantics.Report.EstimateReport` plus trace files.
:mod:`.studies` repeats runs with derived seeds over sample sizes, schedule
exponents, live-set sizes and the number of galaxy mixture components.
"""

from ..pydantics.Experiment import ExperimentConfig
from ..pydantics.Report import EstimateReport
from .Runner import Runner
from .studies import (
    c_sweep,
    galaxy_study,
    nested_study,
    replicate_configs,
    replicate_study,
    sample_size_study,
    summarize,
)


def run_experiment(config: ExperimentConfig) -> EstimateReport:
    """Runs one experiment and writes its report; see :class:`Runner`."""
    return Runner(config).run()
