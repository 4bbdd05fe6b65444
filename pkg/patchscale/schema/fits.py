from pydantic import BaseModel, ConfigDict, Field, model_validator

from patchscale.config import constant
from patchscale.enums.enums import AllometryMode, PatchVariable


class TailFit(BaseModel):
    """Hill fit of the CCDF tail exponent: P(X >= x) ~ x^-zeta."""

    model_config = ConfigDict(frozen=True)

    variable: PatchVariable | None = None
    zeta: float = Field(..., gt=0)
    ci95: tuple[float, float]
    k: int = Field(..., ge=1)
    x_k: float = Field(..., gt=0, description="Threshold order statistic x_(k+1)")
    n: int = Field(..., ge=2)
    ci_method: str = "asymptotic"
    convention: str = constant.TAIL_CONVENTION

    @model_validator(mode="after")
    def _check(self):
        low, high = self.ci95
        if not low <= self.zeta <= high:
            raise ValueError("ci95 must bracket zeta")
        if self.k >= self.n:
            raise ValueError("k must be smaller than n")
        return self

    def to_export(self) -> dict:
        return {
            "variable": self.variable.value if self.variable else None,
            "zeta": self.zeta,
            "ci95": list(self.ci95),
            "k": self.k,
            "x_k": self.x_k,
            "n": self.n,
            "ci_method": self.ci_method,
            "convention": self.convention,
        }


class AllometricFit(BaseModel):
    """Scaling exponents of N_m ~ V_m^g1, T ~ V_m^g2, N_m ~ T^g3.

    Bivariate fits carry one explained-variance share per analysis (g1, g2,
    g3 order); the trivariate fit carries a single share.
    """

    model_config = ConfigDict(frozen=True)

    mode: AllometryMode
    g1: float
    g2: float
    g3: float
    ci95: dict[str, tuple[float, float]] = Field(default_factory=dict)
    explained_variance: tuple[float, ...]
    n_points: int = Field(..., ge=0)
    B: int | None = None
    seed: int | None = None
    centroids: dict[str, tuple[float, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        if any(not 0 < ev <= 1 + 1e-12 for ev in self.explained_variance):
            raise ValueError("explained variance shares must lie in (0, 1]")
        return self

    def to_export(self) -> dict:
        return {
            "mode": self.mode.value,
            "g1": self.g1,
            "g2": self.g2,
            "g3": self.g3,
            "ci95s": {name: list(ci) for name, ci in sorted(self.ci95.items())},
            "explained_variance": list(self.explained_variance),
            "n_points": self.n_points,
            "B": self.B,
            "seed": self.seed,
            "centroids": {name: list(c) for name, c in sorted(self.centroids.items())},
        }


class LognormalityResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str
    variable: PatchVariable
    n: int
    jb_stat: float = Field(..., ge=0)
    critical_value: float
    reject: bool


class LognormalitySummary(BaseModel):
    """Per-firm Jarque-Bera outcome for one variable, Table-1 row shaped."""

    model_config = ConfigDict(frozen=True)

    variable: PatchVariable
    percentage: float
    non_rejecting: int
    tested: int
    results: tuple[LognormalityResult, ...] = ()

    @property
    def row(self) -> str:
        return f"{round(self.percentage):d} ({self.non_rejecting}/{self.tested})"
