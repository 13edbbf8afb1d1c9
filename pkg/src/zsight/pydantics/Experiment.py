from __future__ import annotations

import hashlib
import json
import os
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .. import CONFIG
from ..errors import ConfigError

PRESETS = ("astro", "data_driven", "richardson_green", "chib")


class MixtureHyperModel(BaseModel):
    """Hyperparameters of the finite Normal mixture prior.

    μ_j ~ N(kappa, 1/xi), τ_j ~ Gamma(shape=alpha, rate=β), β ~ Gamma(shape=beta1, rate=beta2)
    unless ``beta_fixed`` pins β, φ ~ Dirichlet(1, ..., 1) and k ~ truncated Poisson(lam) on
    [k_min, k_max].
    """

    model_config = ConfigDict(frozen=True)

    kappa: float
    xi: float = Field(gt=0)
    alpha: float = Field(gt=0)
    beta1: Optional[float] = Field(None, gt=0)
    beta2: Optional[float] = Field(None, gt=0)
    beta_fixed: Optional[float] = Field(None, gt=0)
    lam: float = Field(5.0, gt=0)
    k_min: int = Field(3, ge=1)
    k_max: int = Field(10, ge=1)

    @model_validator(mode="after")
    def check_beta(self) -> MixtureHyperModel:
        if self.beta_fixed is None and (self.beta1 is None or self.beta2 is None):
            raise ValueError("beta1 and beta2 are required unless beta_fixed is set")
        if self.k_min > self.k_max:
            raise ValueError(f"k_min={self.k_min} exceeds k_max={self.k_max}")

        return self

    @classmethod
    def preset(cls, name: str, data: Optional[Sequence[float]] = None, **overrides) -> MixtureHyperModel:
        """Builds a named preset, optionally overriding single fields.

        Args:
            name (str): One of "astro", "data_driven", "richardson_green", "chib".
            data (Optional[Sequence[float]]): Observations; required by "richardson_green".

        Returns:
            MixtureHyperModel: Validated hyperparameters.
        """
        if name == "astro":
            values = dict(kappa=17.0, xi=0.008, alpha=2.0, beta1=1.0, beta2=0.05)
        elif name == "data_driven":
            values = dict(kappa=20.8, xi=0.048, alpha=2.0, beta1=1.0, beta2=0.05)
        elif name == "richardson_green":
            if data is None or len(data) == 0:
                raise ValueError("richardson_green preset needs the data to set its location and scale")

            low, high = float(min(data)), float(max(data))
            spread = high - low

            values = dict(
                kappa=(low + high) / 2,
                xi=1 / spread**2,
                alpha=2.0,
                beta1=0.2,
                beta2=10 / spread**2,
            )
        elif name == "chib":
            values = dict(kappa=20.0, xi=0.01, alpha=3.0, beta_fixed=20.0)
        else:
            raise ValueError(f"Unknown hyperparameter preset '{name}', expected one of {PRESETS}")

        values.update(overrides)

        return cls(**values)


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["banana", "mixture"] = "banana"
    data: Optional[str] = None
    variant: Literal["roeder", "chib78"] = "roeder"
    k: Optional[int] = Field(None, ge=1)
    k_range: Optional[Tuple[int, int]] = None
    preset: Literal["astro", "data_driven", "richardson_green", "chib"] = "astro"
    hyper: Dict[str, float] = {}
    subset_seed: int = 0

    @model_validator(mode="after")
    def check_files(self) -> ModelSection:
        if self.data is not None and not os.path.exists(self.data):
            raise ValueError(f"data file '{self.data}' does not exist")
        if self.k_range is not None and self.k_range[0] > self.k_range[1]:
            raise ValueError(f"empty k_range {self.k_range}")

        return self


class BridgeSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["power_posterior", "partial_data", "auxiliary_path", "nested_shells"] = "power_posterior"
    m: int = Field(5, ge=2)
    c: float = Field(5.0, gt=0)
    family: Literal["truncated_normal", "truncated_student_t_nu1"] = "truncated_normal"
    r_min: Optional[int] = Field(None, ge=0)


class ChainConfig(BaseModel):
    """Settings of a Metropolis chain.

    ``thin`` is a retention fraction: 0.25 keeps every fourth draw.
    """

    model_config = ConfigDict(extra="forbid")

    steps: int = Field(10000, ge=0)
    burn_in: int = Field(1000, ge=0)
    thin: float = Field(CONFIG.SAMPLER.THIN_MC3, gt=0, le=1)
    proposal_scale: Union[float, List[float]] = CONFIG.SAMPLER.PROPOSAL_SCALE
    swap_interval: int = Field(CONFIG.SAMPLER.SWAP_INTERVAL, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_budget(self) -> ChainConfig:
        if self.steps < self.burn_in:
            raise ValueError(f"steps={self.steps} is smaller than burn_in={self.burn_in}")

        scales = self.proposal_scale if isinstance(self.proposal_scale, list) else [self.proposal_scale]
        if any(scale <= 0 for scale in scales):
            raise ValueError("proposal_scale entries must be positive")

        return self


class SamplerSection(ChainConfig):
    per_rung: int = Field(250, gt=0)
    gibbs_thin: float = Field(CONFIG.SAMPLER.THIN_GIBBS, gt=0, le=1)
    gibbs_burn_in: int = Field(100, ge=0)


class EstimatorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: Literal["recursive", "tivis", "nested", "ins", "shell_recursive", "hme", "ame"] = "recursive"
    tol: float = Field(CONFIG.ESTIMATOR.TOL, gt=0)
    max_iter: int = Field(CONFIG.ESTIMATOR.MAX_ITER, ge=1)
    quad_points: int = CONFIG.ESTIMATOR.QUAD_POINTS
    bootstrap: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_quadrature(self) -> EstimatorSection:
        if self.quad_points < 3 or self.quad_points % 2 == 0:
            raise ValueError(f"quad_points must be odd and >= 3, got {self.quad_points}")
        if 0 < self.bootstrap < 100:
            raise ValueError(f"bootstrap needs at least 100 replicates, got {self.bootstrap}")

        return self


class NestedSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_live: int = Field(125, ge=2)
    steps: Optional[int] = Field(None, ge=1)
    expand: float = Field(CONFIG.NESTED.EXPAND, ge=1)
    max_proposals: int = Field(CONFIG.NESTED.MAX_PROPOSALS, ge=1)
    n_live_grid: List[int] = [12, 25, 50, 125]

    def steps_for(self, n_live: int) -> int:
        return self.steps if self.steps is not None else 10 * n_live


class ReweightSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: Optional[Literal["astro", "data_driven", "richardson_green", "chib"]] = None
    hyper: Dict[str, float] = {}
    prior_k: Literal["poisson", "uniform"] = "poisson"
    pool: Optional[str] = None


class StudySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_tot_grid: List[int] = [125, 500, 1250, 5000, 12500]
    c_grid: List[float] = [0.5, 1.0, 2.0, 4.0]
    workers: int = Field(1, ge=1)
    alternatives: List[Literal["astro", "data_driven", "richardson_green"]] = ["data_driven", "richardson_green"]


class ExperimentConfig(BaseModel):
    """A complete, self-contained experiment description.

    Loaded from a YAML document with sections ``model``, ``bridge``, ``sampler``,
    ``estimator``, ``nested``, ``reweight`` and ``study``; every report embeds the
    dump of the config it was produced from so a run can be repeated from its report.
    """

    model_config = ConfigDict(extra="forbid")

    model: ModelSection = ModelSection()
    bridge: BridgeSection = BridgeSection()
    sampler: SamplerSection = SamplerSection()
    estimator: EstimatorSection = EstimatorSection()
    nested: NestedSection = NestedSection()
    reweight: ReweightSection = ReweightSection()
    study: StudySection = StudySection()
    seed: int = Field(0, ge=0)
    replicates: int = Field(100, ge=1)
    out: str = "runs"
    full: bool = False

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def updated(self, **changes: Any) -> ExperimentConfig:
        """Copy with dotted-key changes applied and re-validated, e.g. ``updated(**{"bridge.c": 2.0})``."""
        return self.validate_dict(apply_overrides(self.model_dump(mode="json"), changes))

    @classmethod
    def validate_dict(cls, data: Dict[str, Any]) -> ExperimentConfig:
        try:
            return cls.model_validate(data)
        except ValidationError as error:
            raise ConfigError(str(error).replace("\n", " ")) from error

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
        """Reads a YAML experiment file and applies ``section.key=value`` overrides.

        Args:
            path (Optional[str]): YAML file. None starts from the defaults.
            overrides (Sequence[str]): Dotted assignments; values are parsed as YAML scalars.

        Returns:
            ExperimentConfig: Validated config.
        """
        data: Dict[str, Any] = {}

        if path is not None:
            try:
                with open(path, "r") as file:
                    data = yaml.safe_load(file) or {}
            except (OSError, yaml.YAMLError) as error:
                raise ConfigError(f"cannot read config '{path}': {error}") from error

            if not isinstance(data, dict):
                raise ConfigError(f"config '{path}' must be a mapping")

        changes = {}

        for override in overrides:
            key, sep, value = override.partition("=")

            if not sep or not key:
                raise ConfigError(f"override '{override}' is not of the form section.key=value")

            changes[key.strip()] = yaml.safe_load(value)

        return cls.validate_dict(apply_overrides(data, changes))


def apply_overrides(data: Dict[str, Any], changes: Dict[str, Any]) -> Dict[str, Any]:
    """Sets dotted keys in a nested dict, creating sections as needed."""
    for key, value in changes.items():
        node = data
        *sections, leaf = key.split(".")

        for section in sections:
            node = node.setdefault(section, {})

            if not isinstance(node, dict):
                raise ConfigError(f"'{section}' in override '{key}' is not a section")

        node[leaf] = value

    return data
