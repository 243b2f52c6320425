import os
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

from DataIO.TrialSet import TrialSet
from FilterBank.FilterBank import FilterBank, FilterBankConfig
from Model.ModelConfig import ALL_SWITCHES, ModelConfig, ablate, parse_variant
from Training.TrainConfig import TrainConfig
from faconf_logging import logger
from util.FAConfException import UsageException

Profile = Literal["published", "desk"]

# Bands around the synthetic class tones (8, 12, 16 Hz) used by the desk profile.
DESK_BAND_EDGES: List[Tuple[float, float]] = [(6.0, 10.0), (10.0, 14.0), (14.0, 18.0)]

RUN_KEYS = ("profile", "jobs", "disable")
_ALIASES = {"bands": "band_edges", "lr": "learning_rate"}


class RunConfig(BaseModel):
    """
    Everything a train/eval/ablate run needs. Assembled by `load_run_config`
    from defaults < key-value file < command-line values.
    """
    model_config = ConfigDict(extra="forbid")

    profile: Profile = Field("published", description="published study settings, or desk: tiny model, lr 1e-3")
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    filter_bank: FilterBankConfig = Field(default_factory=FilterBankConfig)
    jobs: int = Field(1, ge=1, description="Folds trained in parallel")
    disable: List[str] = Field(default_factory=list, description="Modules switched off")

    @field_validator("disable")
    @classmethod
    def _known_switches(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in ALL_SWITCHES]
        if unknown:
            raise ValueError(f"unknown ablation {unknown}, expected names from {list(ALL_SWITCHES)}")
        return value

    def effective_model(self) -> ModelConfig:
        return ablate(self.model, self.disable)

    def build_bank(self) -> FilterBank:
        return self.filter_bank.build()

    def fit_to(self, dataset: TrialSet) -> ModelConfig:
        """Effective model with channel, sample and class counts taken from the data."""
        values = self.effective_model().model_dump()
        values.update(eeg_channels=dataset.eeg_channels, emg_channels=dataset.emg_channels,
                      time_points=dataset.time_points, n_classes=dataset.n_classes)
        return ModelConfig(**values)


def _split_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_value(key: str, value: Any) -> Any:
    """
    Turn a key-value string into what the schema expects: comma lists for
    kernel_sizes, 'low-high' pairs for band_edges, comma or '+' lists for
    disable. Everything else is left to pydantic's coercion.
    """
    if not isinstance(value, str):
        return value
    if key == "kernel_sizes":
        return _split_list(value)
    if key == "band_edges":
        pairs = []
        for part in _split_list(value):
            low, sep, high = part.partition("-")
            if not sep:
                raise UsageException(f"band '{part}' must be written as low-high, e.g. 8-12")
            pairs.append((low.strip(), high.strip()))
        return pairs
    if key == "disable":
        return [name for part in _split_list(value) for name in parse_variant(part)]
    return value


def _profile_base(profile: str) -> Dict[str, Dict[str, Any]]:
    if profile == "desk":
        return {"model": ModelConfig.tiny().model_dump(), "train": TrainConfig.desk().model_dump(),
                "filter_bank": FilterBankConfig(band_edges=DESK_BAND_EDGES).model_dump()}
    if profile == "published":
        return {"model": {}, "train": {}, "filter_bank": {}}
    raise UsageException(f"unknown profile '{profile}', expected published or desk")


def assemble(values: Mapping[str, Any]) -> RunConfig:
    """
    Route flat keys to the model, training or filter-bank section.

    Raises:
        UsageException: For a key no section knows.
        pydantic.ValidationError: For a value the schema rejects.
    """
    flat = {_ALIASES.get(key, key): value for key, value in values.items() if value is not None}
    profile = str(flat.pop("profile", "published"))
    sections = _profile_base(profile)
    run: Dict[str, Any] = {"profile": profile}
    explicit_bands = "n_bands" in flat

    for key, value in flat.items():
        value = parse_value(key, value)
        if key in RUN_KEYS:
            run[key] = value
        elif key in ModelConfig.model_fields:
            sections["model"][key] = value
        elif key in TrainConfig.model_fields:
            sections["train"][key] = value
        elif key in FilterBankConfig.model_fields:
            sections["filter_bank"][key] = value
        else:
            raise UsageException(f"unknown config key '{key}'")

    filter_bank = FilterBankConfig(**sections["filter_bank"])
    if not explicit_bands:
        sections["model"]["n_bands"] = len(filter_bank.band_edges)
    return RunConfig(model=ModelConfig(**sections["model"]), train=TrainConfig(**sections["train"]),
                     filter_bank=filter_bank, **run)


def read_config_file(path: str) -> Dict[str, Optional[str]]:
    """KEY=value lines parsed by python-dotenv; '#' starts a comment."""
    if not os.path.isfile(path):
        raise UsageException(f"config file {path} does not exist")
    values = dict(dotenv_values(path))
    logger.debug(f"config file {path}: {sorted(values)}")
    return values


def load_run_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Defaults < config file < overrides; None overrides are ignored."""
    values: Dict[str, Any] = {}
    if config_path:
        values.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[_ALIASES.get(key, key)] = value
    return assemble(values)
