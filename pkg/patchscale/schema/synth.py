import json
import math
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from patchscale.config import constant
from patchscale.enums.enums import PatchDirection


class SynthConfig(BaseModel):
    """Parameters of the synthetic market.

    Firm sizes are Pareto with CCDF x^-zipf_exponent. A firm's package values
    are lognormal with location mu0 + size_elasticity * ln(size) and scale
    sigma. Child-trade count and duration follow the package value as
    trades_at_mu0 * (V/e^mu0)^trades_exponent and
    duration_at_mu0 * (V/e^mu0)^duration_exponent, each with lognormal noise.
    """

    model_config = ConfigDict(extra="forbid")

    n_firms: int = Field(50, ge=1)
    zipf_exponent: float = Field(1.0, gt=0)
    stocks: list[str] = Field(default_factory=lambda: ["SYN"], min_length=1)
    packages_mean: float = Field(24.0, gt=0, description="Poisson mean of packages per firm and stock")
    packages_min: int = Field(12, ge=1)
    mu0: float = Field(math.log(50_000.0))
    size_elasticity: float = Field(1.0, gt=0)
    sigma: float = Field(0.5, ge=0)
    trades_at_mu0: float = Field(40.0, gt=0)
    trades_exponent: float = Field(1.0, gt=0)
    trades_sigma: float = Field(0.15, ge=0)
    min_trades: int = Field(constant.MIN_PATCH_TRADES, ge=2)
    duration_at_mu0: float = Field(600.0, gt=0, description="Seconds")
    duration_exponent: float = Field(1.5, gt=0)
    duration_sigma: float = Field(0.64, ge=0)
    child_sigma: float = Field(0.5, ge=0, description="Lognormal scale of child-trade weights")
    gap_mean: float = Field(3600.0, gt=0, description="Mean idle seconds between packages")
    noise_fraction: float = Field(0.1, ge=0, lt=1)
    theta_target: float = Field(constant.THETA, gt=0.5, le=1)
    alternate_directions: bool = True
    churn_probability: float = Field(0.0, ge=0, le=1)
    churn_trades: int = Field(12, ge=2)
    start_timestamp: int = Field(constant.SYNTH_START_TIMESTAMP, ge=0)
    seed: int = Field(20010101, ge=0)

    @model_validator(mode="after")
    def _check_noise(self):
        if self.noise_fraction >= 1 - self.theta_target:
            raise ValueError(
                f"noise_fraction {self.noise_fraction} must be below 1 - theta_target "
                f"({1 - self.theta_target:.4g}) for planted packages to stay directional"
            )
        if len(set(self.stocks)) != len(self.stocks):
            raise ValueError("stock ids must be distinct")
        return self

    @classmethod
    def preset(cls, name: str, **overrides) -> "SynthConfig":
        if name not in constant.SYNTH_PRESETS:
            raise ValueError(
                f"unknown synth preset {name!r}; choose from {sorted(constant.SYNTH_PRESETS)}"
            )
        return cls(**{**constant.SYNTH_PRESETS[name], **overrides})

    @classmethod
    def load(cls, name_or_path: str | Path, **overrides) -> "SynthConfig":
        """A preset by name, or a JSON document on disk."""
        if str(name_or_path) in constant.SYNTH_PRESETS:
            return cls.preset(str(name_or_path), **overrides)
        document = json.loads(Path(name_or_path).read_text(encoding="utf-8"))
        return cls(**{**document, **overrides})


class PlannedPackage(BaseModel):
    model_config = ConfigDict(frozen=True)

    direction: PatchDirection
    V_m: float = Field(..., gt=0)
    N_m: int = Field(..., ge=2)
    T: int = Field(..., ge=1)


class PackageTruth(BaseModel):
    """An emitted package; start/end index the firm's series in that stock."""

    model_config = ConfigDict(frozen=True)

    firm_id: str
    stock_id: str
    direction: PatchDirection
    true_V_m: float
    true_N_m: int
    true_T: int
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0)
    noise_value: float = Field(0.0, ge=0)
    n_noise: int = Field(0, ge=0)

    @property
    def length(self) -> int:
        return self.end - self.start


class ChurnTruth(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str
    stock_id: str
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0)


class GroundTruth(BaseModel):
    seed: int
    firm_sizes: dict[str, float] = Field(default_factory=dict)
    series_lengths: dict[str, int] = Field(
        default_factory=dict, description="Keyed 'firm_id/stock_id'"
    )
    packages: list[PackageTruth] = Field(default_factory=list)
    churn: list[ChurnTruth] = Field(default_factory=list)

    @staticmethod
    def series_name(firm_id: str, stock_id: str) -> str:
        return f"{firm_id}/{stock_id}"

    @model_validator(mode="after")
    def _check_boundaries(self):
        for item in [*self.packages, *self.churn]:
            length = self.series_lengths.get(self.series_name(item.firm_id, item.stock_id))
            if length is None or not item.start < item.end <= length:
                raise ValueError(
                    f"range [{item.start}, {item.end}) of {item.firm_id}/{item.stock_id} "
                    "is inconsistent with the emitted series"
                )
        return self

    def boundaries(self, firm_id: str, stock_id: str) -> list[int]:
        """Planted segment boundaries of one series, 0 and the length included."""
        cuts = {0, self.series_lengths.get(self.series_name(firm_id, stock_id), 0)}
        for item in [*self.packages, *self.churn]:
            if item.firm_id == firm_id and item.stock_id == stock_id:
                cuts.update((item.start, item.end))
        return sorted(cuts)
