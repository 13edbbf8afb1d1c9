from typing import Tuple

from pydantic import BaseModel


class AppConfigModel(BaseModel):
    LOGGING: bool
    LEVEL: str = "INFO"


class EstimatorConfigModel(BaseModel):
    TOL: float
    MAX_ITER: int
    QUAD_POINTS: int


class SamplerConfigModel(BaseModel):
    SWAP_INTERVAL: int
    THIN_MC3: float
    THIN_GIBBS: float
    TARGET_ACCEPT: Tuple[float, float]
    PROPOSAL_SCALE: float


class NestedConfigModel(BaseModel):
    EXPAND: float
    MAX_PROPOSALS: int
    BOUNDARY_WARN: float


class ReweightConfigModel(BaseModel):
    ESS_WARN: float


class BootstrapConfigModel(BaseModel):
    B: int


class ConfigModel(BaseModel):
    APP: AppConfigModel
    ESTIMATOR: EstimatorConfigModel
    SAMPLER: SamplerConfigModel
    NESTED: NestedConfigModel
    REWEIGHT: ReweightConfigModel
    BOOTSTRAP: BootstrapConfigModel
