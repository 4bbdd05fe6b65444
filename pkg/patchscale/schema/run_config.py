import json
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from patchscale.config import constant
from patchscale.core.tail_stats import KPolicy
from patchscale.enums.enums import (
    ActivityMode,
    ActivityYears,
    CIMethod,
    SignificanceMode,
    TStatisticForm,
)


class RunConfig(BaseModel):
    """Validated configuration of one pipeline run."""

    model_config = ConfigDict(extra="forbid")

    tape: Optional[Path] = Field(None, description="Trade-CSV input")
    synth: Optional[str] = Field(None, description="Synth preset name or SynthConfig JSON path")
    output_dir: Path = Field(Path("out"))
    seed: int = Field(20010101, ge=0)
    jobs: int = Field(1, ge=1)

    min_trades_per_year: int = Field(constant.MIN_TRADES_PER_YEAR, ge=0)
    min_active_days: int = Field(constant.MIN_ACTIVE_DAYS, ge=0)
    activity_mode: ActivityMode = ActivityMode.STRICT
    activity_years: ActivityYears = ActivityYears.EVERY
    filter_synthetic: bool = Field(False, description="Apply the activity filter to synthetic tapes")

    threshold: float = Field(constant.SEGMENTATION_THRESHOLD, gt=0, lt=1)
    significance_mode: SignificanceMode = SignificanceMode.CLOSED_FORM
    t_form: TStatisticForm = TStatisticForm.POOLED
    mc_trials: int = Field(constant.DEFAULT_MC_TRIALS, ge=1)

    theta: float = Field(constant.THETA, gt=0.5, le=1)
    min_patch_trades: int = Field(constant.MIN_PATCH_TRADES, ge=1)

    k_policy: str = "auto"
    ci_method: CIMethod = CIMethod.ASYMPTOTIC
    bootstrap_samples: int = Field(constant.BOOTSTRAP_SAMPLES, ge=constant.MIN_BOOTSTRAP_SAMPLES)
    min_firm_patches: int = Field(constant.MIN_FIRM_PATCHES, ge=1)
    plots: bool = True

    @field_validator("k_policy")
    @classmethod
    def _check_k_policy(cls, value: str) -> str:
        return str(KPolicy.parse(value))

    @model_validator(mode="after")
    def _check_inputs(self):
        if self.tape is not None and self.synth is not None:
            raise ValueError("give either a tape or a synth config, not both")
        if self.tape is not None and not self.tape.is_file():
            raise ValueError(f"tape {self.tape} does not exist")
        if (
            self.synth is not None
            and self.synth not in constant.SYNTH_PRESETS
            and not Path(self.synth).is_file()
        ):
            raise ValueError(f"synth config {self.synth!r} is neither a preset nor a file")
        return self

    @classmethod
    def from_sources(
        cls,
        config_path: Optional[Path] = None,
        defaults: Optional[dict[str, Any]] = None,
        **overrides: Any,
    ) -> "RunConfig":
        """Precedence: explicit values, then the JSON document, then `defaults`."""
        document = {}
        if config_path is not None:
            document = json.loads(Path(config_path).read_text(encoding="utf-8"))
        explicit = {k: v for k, v in overrides.items() if v is not None}
        return cls(**{**(defaults or {}), **document, **explicit})

    @property
    def synthetic(self) -> bool:
        return self.synth is not None

    def export(self) -> dict:
        """Run parameters as recorded in the report; paths are left out."""
        return self.model_dump(mode="json", exclude={"tape", "synth", "output_dir", "jobs", "plots"})


class StockReport(BaseModel):
    stock_id: str
    status: str = "ok"
    patch_counts: dict[str, Any] = Field(default_factory=dict)
    tail_fits: dict[str, Any] = Field(default_factory=dict)
    allometry: dict[str, Any] = Field(default_factory=dict)
    lognormality: dict[str, Any] = Field(default_factory=dict)
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class Report(BaseModel):
    """Per-stock summary shaped like a table of patch properties."""

    schema_version: int = constant.REPORT_SCHEMA_VERSION
    seed: int
    parameters: dict[str, Any] = Field(default_factory=dict)
    stocks: dict[str, StockReport] = Field(default_factory=dict)
    totals: dict[str, Any] = Field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
