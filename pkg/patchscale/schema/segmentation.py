from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class CutCandidate(BaseModel):
    """Best split of a window: left is [lo, position), right is [position, hi).

    `position` is relative to the window passed to `max_t`.
    """

    model_config = ConfigDict(frozen=True)

    position: int = Field(..., ge=2)
    t_value: float = Field(..., ge=0)
    significance: float | None = Field(None, ge=0, le=1)


class Segmentation(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str = ""
    stock_id: str = ""
    threshold: float = Field(0.99, gt=0, lt=1)
    boundaries: tuple[int, ...] = Field(..., min_length=1)
    # significant cuts withdrawn by a neighbour re-check
    withdrawn: tuple[int, ...] = ()

    @field_validator("boundaries")
    @classmethod
    def _strictly_increasing(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if value[0] != 0:
            raise ValueError("boundaries must start at 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("boundaries must be strictly increasing")
        return value

    @model_validator(mode="after")
    def _withdrawn_inside(self) -> "Segmentation":
        end = self.boundaries[-1]
        if any(not 0 < w < end for w in self.withdrawn):
            raise ValueError("withdrawn cuts must lie strictly inside the series")
        return self

    @property
    def n_segments(self) -> int:
        return max(len(self.boundaries) - 1, 0)

    @property
    def interior(self) -> tuple[int, ...]:
        return self.boundaries[1:-1]

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return list(zip(self.boundaries, self.boundaries[1:]))

    def to_export(self) -> dict:
        return {
            "firm_id": self.firm_id,
            "stock_id": self.stock_id,
            "threshold": self.threshold,
            "boundaries": list(self.boundaries),
            "withdrawn": list(self.withdrawn),
        }
