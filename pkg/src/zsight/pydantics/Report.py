from __future__ import annotations

import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, field_validator


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or math.isnan(value):
        return None

    return value


class CovarianceModel(BaseModel):
    method: str
    cov: List[List[float]]
    se: List[float]
    se_target: float
    interval: Optional[Tuple[float, float]] = None


class EstimateReport(BaseModel):
    """Self-contained result of one estimate.

    Carries the embedded experiment config and its hash so the run can be
    repeated from the report alone.
    """

    method: str
    log_z: float

    log_z_rungs: Optional[List[float]] = None

    se_hessian: Optional[float] = None
    se_bootstrap: Optional[float] = None
    se_replicate: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    ess: Optional[float] = None

    uncertainty: Dict[str, CovarianceModel] = {}
    diagnostics: Dict[str, Any] = {}

    config: Optional[Dict[str, Any]] = None
    config_hash: Optional[str] = None
    seed: Optional[int] = None
    wall_time: Optional[float] = None

    @field_validator("se_hessian", "se_bootstrap", "se_replicate", "ess")
    @classmethod
    def _drop_nan(cls, value: Optional[float]) -> Optional[float]:
        return _finite_or_none(value)

    @property
    def se(self) -> Optional[float]:
        """The preferred standard error: replicate, then bootstrap, then Hessian."""
        for value in (self.se_replicate, self.se_bootstrap, self.se_hessian):
            if value is not None:
                return value

        return None

    def __str__(self) -> str:
        se = f" se={self.se:.4g}" if self.se is not None else ""

        return f"{self.method}: log_z={self.log_z:.6f}{se}"

    def log(self, logger: logging.Logger) -> EstimateReport:
        if self.diagnostics.get("ess_warning") or self.diagnostics.get("se_hessian_unreliable"):
            logger.warning(str(self))
        else:
            logger.info(str(self))

        return self

    def write(self, path: str) -> str:
        directory = os.path.dirname(path)

        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(path, "w") as file:
            file.write(self.model_dump_json(indent=2))

        return path

    @classmethod
    def read(cls, path: str) -> EstimateReport:
        with open(path, "r") as file:
            return cls.model_validate(json.load(file))


class ReplicateRow(BaseModel):
    """One row of a replicate summary: an estimator at one setting."""

    setting: Dict[str, Any]
    method: str
    replicates: int
    mean_log_z: float
    se_replicate: float
    mean_se_analytic: Optional[float] = None
    failures: int = 0


class ReplicateSummary(BaseModel):
    rows: List[ReplicateRow] = []
    truth: Optional[float] = None
    config_hash: Optional[str] = None
    base_seed: int = 0

    def write(self, path: str) -> str:
        directory = os.path.dirname(path)

        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(path, "w") as file:
            file.write(self.model_dump_json(indent=2))

        return path


class ModelPosteriorRow(BaseModel):
    k: int
    log_z: float
    se: Optional[float] = None
    log_prior: float
    posterior: float
    interval: Tuple[float, float]
    ess: Optional[Dict[str, float]] = None


class ModelPosterior(BaseModel):
    """Posterior over the number of mixture components with the total evidence."""

    rows: List[ModelPosteriorRow]
    log_z_total: float
    se_total: Optional[float] = None
    prior: str
    alternatives: Dict[str, List[float]] = {}

    @property
    def mode(self) -> int:
        return max(self.rows, key=lambda row: row.posterior).k

    def write(self, path: str) -> str:
        directory = os.path.dirname(path)

        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(path, "w") as file:
            file.write(self.model_dump_json(indent=2))

        return path
