"""Exception hierarchy for zsight.

Every failure that the command line interface needs to tell apart derives from
:class:`ZsightError` and carries the process exit code it maps to. Plain
argument/contract violations raise ``ValueError`` instead.
"""

from typing import List, Optional


class ZsightError(Exception):
    """Base class for all zsight failures.

    Attributes:
        exit_code (int): Process exit code used by the command line interface.
    """

    exit_code: int = 1


class ConfigError(ZsightError):
    """Experiment configuration could not be parsed or validated."""

    exit_code = 2


class UnsupportedModelError(ZsightError):
    """The requested operation is not defined for this model (e.g. quadrature on an unbounded support)."""

    exit_code = 2


class IdentifiabilityError(ZsightError):
    """A partial-data rung has fewer observations than mixture components."""

    exit_code = 2


class SamplerStallError(ZsightError):
    """A sampler could not produce a valid draw within its proposal budget.

    Attributes:
        shell (int): Index of the nested-sampling shell that stalled, if any.
        proposals (int): Number of proposals made before giving up.
    """

    exit_code = 3

    def __init__(self, message: str, shell: Optional[int] = None, proposals: int = 0) -> None:
        super().__init__(message)

        self.shell = shell
        self.proposals = proposals


class ConnectivityError(ZsightError):
    """The overlap graph of the bridging sequence is not strongly connected.

    Attributes:
        components (List[List[int]]): Strongly connected components of the rung graph.
    """

    exit_code = 4

    def __init__(self, message: str, components: List[List[int]] = None) -> None:
        super().__init__(message)

        self.components = components if components is not None else []


class UnsampledRungError(ConnectivityError):
    """A rung's weight column is -inf on every pooled draw."""


class SupportMismatchError(ZsightError):
    """Adjacent rungs do not share support on the pooled draws."""

    exit_code = 4


class NonConvergenceError(ZsightError):
    """An iterative solver hit its iteration cap.

    Attributes:
        final_delta (float): Largest change in the last iteration.
        iterations (int): Iterations performed.
    """

    exit_code = 5

    def __init__(self, message: str, final_delta: float = float("nan"), iterations: int = 0) -> None:
        super().__init__(message)

        self.final_delta = final_delta
        self.iterations = iterations


class RankDeficiencyError(ZsightError):
    """The quasi-likelihood Hessian is singular.

    Attributes:
        rungs (List[int]): Rungs implicated in the null direction.
    """

    exit_code = 5

    def __init__(self, message: str, rungs: List[int] = None) -> None:
        super().__init__(message)

        self.rungs = rungs if rungs is not None else []


class OptimizationError(ZsightError):
    """Mode finding failed to converge from every start point."""

    exit_code = 5


class InvariantError(ZsightError):
    """An internal invariant was violated. Indicates a bug."""

    exit_code = 1
