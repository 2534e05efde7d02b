"""Run configuration: one JSON document with a section per pipeline stage."""

import hashlib
import json
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import data, optim, search, training
from .nn import HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS, Activation


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticSection(_Section):
    customer_count: int = Field(20, ge=1)
    days: int = Field(100, ge=1)
    base_load_kwh: float = Field(0.3, gt=0)
    peak_amplitude_kwh: float = Field(1.2, ge=0)
    noise_std_kwh: float = Field(0.05, ge=0)


class DataSection(_Section):
    synthetic: Optional[SyntheticSection] = None
    meter_file: Optional[str] = None
    meter_ids: Optional[List[str]] = None
    max_meters: Optional[int] = Field(None, ge=1)
    periods_per_day: int = Field(48, ge=2)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.synthetic is None) == (self.meter_file is None):
            raise ValueError("exactly one of data.synthetic or data.meter_file is required")
        return self


class PreprocessSection(_Section):
    k_neighbors: int = Field(5, ge=1)
    adasyn_after_split: bool = False


class ModelSection(_Section):
    L: int = Field(2, ge=1)
    N: int = Field(64, ge=1)
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"
    literal_layer_softmax: bool = False

    @field_validator("hidden_activation")
    @classmethod
    def _hidden(cls, v):
        if Activation.parse(v) not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"{v!r} is not a hidden activation")
        return v

    @field_validator("output_activation")
    @classmethod
    def _output(cls, v):
        if Activation.parse(v) not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"{v!r} is not an output activation")
        return v


class OptimizerSection(_Section):
    kind: str = "Adamax"
    learning_rate: Optional[float] = Field(None, gt=0)


class TrainSection(_Section):
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(350, ge=1)
    dropout_rate: float = Field(0.2, ge=0, lt=1)
    optimizer: OptimizerSection = OptimizerSection()
    from_search: bool = False


class SpaceSection(_Section):
    layer_counts: List[int] = [2, 3, 4]
    neuron_range: Tuple[int, int] = (100, 500)
    optimizers: List[str] = [k.value for k in optim.OptimizerKind]
    hidden_activations: List[str] = [a.value for a in HIDDEN_ACTIVATIONS]
    output_activations: List[str] = [a.value for a in OUTPUT_ACTIVATIONS]


class SearchSection(_Section):
    iterations: int = Field(30, ge=1)
    k_folds: int = Field(3, ge=2)
    reinit_per_fold: bool = True
    space: SpaceSection = SpaceSection()


class RunConfig(_Section):
    seed: int = Field(..., ge=0, lt=2**64)
    out: str = "runs/default"
    jobs: int = Field(1, ge=1)
    data: DataSection
    preprocess: PreprocessSection = PreprocessSection()
    model: ModelSection = ModelSection()
    train: TrainSection = TrainSection()
    search: SearchSection = SearchSection()

    def digest(self):
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()

    # conversions into the library's own config objects

    def synthetic_config(self):
        s = self.data.synthetic
        return data.SyntheticProfileConfig(s.customer_count, s.days, s.base_load_kwh,
                                           s.peak_amplitude_kwh, s.noise_std_kwh, self.seed,
                                           self.data.periods_per_day)

    def train_config(self):
        o = self.train.optimizer
        return training.TrainConfig(self.train.epochs, self.train.batch_size,
                                    self.train.dropout_rate, self.seed,
                                    optim.OptimizerConfig(o.kind, o.learning_rate))

    def search_space(self):
        s = self.search.space
        return search.SearchSpace(s.layer_counts, s.neuron_range, s.optimizers,
                                  s.hidden_activations, s.output_activations)


class ConfigError(ValueError):
    pass


def _format(err):
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def load_config(text, overrides=None):
    """Parse and validate a config document; ``overrides`` maps dotted paths to values."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for path, value in (overrides or {}).items():
        node = doc
        *parents, leaf = path.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    try:
        cfg = RunConfig.model_validate(doc)
        cfg.train_config()
        cfg.search_space()
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
