from __future__ import annotations

from enum import Enum
from typing import List, Optional, Sequence

import torch

from ..util import as_tensor
from .AuxiliaryDensity import AuxiliaryDensity
from .schedules import partial_data_schedule, temperature_schedule


class BridgeKind(str, Enum):
    POWER_POSTERIOR = "power_posterior"
    PARTIAL_DATA = "partial_data"
    AUXILIARY_PATH = "auxiliary_path"
    NESTED_SHELLS = "nested_shells"


class BridgeSpec:
    """Declarative description of a bridging sequence from a normalized rung 0 to the posterior.

    Rung 0 always has a known normalizer of one: the prior, or a normalized
    auxiliary density for the auxiliary path. Rung indices are zero-based.

    Use the constructors :meth:`power_posterior`, :meth:`partial_data`,
    :meth:`auxiliary_path` and :meth:`nested_shells` rather than building one by hand.

    Attributes:
        kind (BridgeKind): Family of bridging densities.
        m (int): Number of rungs.
        c (Optional[float]): Schedule exponent the rungs were placed with.
        t (Optional[torch.Tensor]): Temperatures, power and auxiliary kinds.
        r (Optional[List[int]]): Subset sizes, partial-data kind.
        aux (Optional[AuxiliaryDensity]): Rung-0 density of the auxiliary path.
        shells (Optional[torch.Tensor]): Log-likelihood thresholds, nested-shell kind; -inf for rung 0.
    """

    def __init__(
        self,
        kind: BridgeKind,
        t: Optional[Sequence[float]] = None,
        r: Optional[Sequence[int]] = None,
        aux: Optional[AuxiliaryDensity] = None,
        shells: Optional[Sequence[float]] = None,
        c: Optional[float] = None,
    ) -> None:
        self.kind = BridgeKind(kind)
        self.c = c
        self.t = as_tensor(t) if t is not None else None
        self.r = [int(size) for size in r] if r is not None else None
        self.aux = aux
        self.shells = as_tensor(shells) if shells is not None else None

        if self.kind in (BridgeKind.POWER_POSTERIOR, BridgeKind.AUXILIARY_PATH):
            if self.t is None:
                raise ValueError(f"{self.kind.value} bridges need temperatures")
            if bool(torch.any(self.t[1:] < self.t[:-1])) or float(self.t[-1]) != 1.0:
                raise ValueError(f"temperatures must be nondecreasing and end at 1, got {self.t.tolist()}")
            if self.m > 1 and float(self.t[0]) != 0.0:
                raise ValueError(f"temperatures must start at 0, got {self.t.tolist()}")
            if self.kind == BridgeKind.AUXILIARY_PATH and aux is None:
                raise ValueError("auxiliary_path bridges need an auxiliary density")

        elif self.kind == BridgeKind.PARTIAL_DATA:
            if self.r is None or self.r[0] != 0 or any(b < a for a, b in zip(self.r, self.r[1:])):
                raise ValueError(f"subset sizes must be nondecreasing from 0, got {self.r}")

        else:
            if self.shells is None or not bool(torch.all(self.shells[1:] > self.shells[:-1])):
                raise ValueError("shell thresholds must be strictly increasing")
            if float(self.shells[0]) != float("-inf"):
                raise ValueError("the first shell must be the prior (threshold -inf)")

    @property
    def m(self) -> int:
        if self.t is not None:
            return self.t.shape[0]
        if self.r is not None:
            return len(self.r)

        return self.shells.shape[0]

    @classmethod
    def power_posterior(cls, m: int, c: float) -> BridgeSpec:
        return cls(BridgeKind.POWER_POSTERIOR, t=temperature_schedule(m, c), c=c)

    @classmethod
    def auxiliary_path(cls, aux: AuxiliaryDensity, m: int, c: float = 1.0) -> BridgeSpec:
        return cls(BridgeKind.AUXILIARY_PATH, t=temperature_schedule(m, c), aux=aux, c=c)

    @classmethod
    def partial_data(cls, n_tot: int, m: int, c: float, r_min: int = 0) -> BridgeSpec:
        spec = cls(BridgeKind.PARTIAL_DATA, r=partial_data_schedule(n_tot, m, c, r_min), c=c)

        if spec.r[-1] != n_tot:
            raise ValueError(f"the last partial-data rung must hold all {n_tot} observations")

        return spec

    @classmethod
    def nested_shells(cls, thresholds: Sequence[float]) -> BridgeSpec:
        thresholds = as_tensor(thresholds).reshape(-1)

        return cls(BridgeKind.NESTED_SHELLS, shells=torch.cat([as_tensor([float("-inf")]), thresholds]))

    def to_dict(self) -> dict:
        return dict(
            kind=self.kind.value,
            m=self.m,
            c=self.c,
            t=self.t.tolist() if self.t is not None else None,
            r=self.r,
            family=self.aux.family.value if self.aux is not None else None,
        )

    def __repr__(self) -> str:
        return f"BridgeSpec(kind={self.kind.value}, m={self.m}, c={self.c})"
