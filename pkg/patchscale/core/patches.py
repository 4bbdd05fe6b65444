from collections import Counter
from dataclasses import dataclass

import numpy as np

from patchscale.config import constant
from patchscale.enums.enums import PatchDirection
from patchscale.schema.patch import DirectionalPatch, Patch
from patchscale.schema.segmentation import Segmentation
from patchscale.schema.trade import SignedSeries


def cut_patches(series: SignedSeries, seg: Segmentation) -> list[Patch]:
    """One Patch per consecutive pair of segmentation boundaries."""
    if seg.boundaries[-1] != len(series):
        raise ValueError(
            f"segmentation ends at {seg.boundaries[-1]} but the series has {len(series)} entries"
        )
    values = series.values
    timestamps = series.timestamps
    patches = []
    for start, end in seg.ranges:
        chunk = values[start:end]
        buys = chunk > 0
        v_b = float(chunk[buys].sum())
        v_s = float(-chunk[~buys].sum())
        patches.append(
            Patch(
                firm_id=series.firm_id,
                stock_id=series.stock_id,
                start=start,
                end=end,
                V_b=v_b,
                V_s=v_s,
                V=v_b + v_s,
                n_buy=int(buys.sum()),
                n_sell=int((~buys).sum()),
                t_first=int(timestamps[start]),
                t_last=int(timestamps[end - 1]),
            )
        )
    return patches


def _check_theta(theta: float):
    if not 0.5 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0.5, 1], got {theta}")


def classify(patch: Patch, theta: float = constant.THETA) -> PatchDirection:
    """Buy iff V_b/V > theta, Sell iff V_s/V > theta, NonDirectional otherwise."""
    _check_theta(theta)
    if patch.V <= 0:
        return PatchDirection.NON_DIRECTIONAL
    if patch.V_b / patch.V > theta:
        return PatchDirection.BUY
    if patch.V_s / patch.V > theta:
        return PatchDirection.SELL
    return PatchDirection.NON_DIRECTIONAL


def to_directional(patch: Patch, direction: PatchDirection) -> DirectionalPatch:
    buy = direction is PatchDirection.BUY
    return DirectionalPatch(
        patch=patch,
        direction=direction,
        T=patch.t_last - patch.t_first,
        N_m=patch.n_buy if buy else patch.n_sell,
        V_m=patch.V_b if buy else patch.V_s,
    )


def directional_patches(
    series: SignedSeries,
    seg: Segmentation,
    theta: float = constant.THETA,
    min_trades: int = constant.MIN_PATCH_TRADES,
) -> list[DirectionalPatch]:
    """Buy and sell patches with at least `min_trades` trades in total."""
    _check_theta(theta)
    out = []
    for patch in cut_patches(series, seg):
        if patch.n_trades < min_trades:
            continue
        direction = classify(patch, theta)
        if direction is not PatchDirection.NON_DIRECTIONAL:
            out.append(to_directional(patch, direction))
    return out


@dataclass(frozen=True)
class PatchSummary:
    total: int
    directional: int
    non_directional: int
    below_min_trades: int
    zero_duration: int

    @property
    def non_directional_share(self) -> float:
        considered = self.directional + self.non_directional
        return self.non_directional / considered if considered else 0.0

    def to_export(self) -> dict:
        return {
            "total": self.total,
            "directional": self.directional,
            "non_directional": self.non_directional,
            "below_min_trades": self.below_min_trades,
            "zero_duration": self.zero_duration,
            "non_directional_share": self.non_directional_share,
        }


def patch_summary(
    patches: list[Patch],
    theta: float = constant.THETA,
    min_trades: int = constant.MIN_PATCH_TRADES,
) -> PatchSummary:
    """Diagnostic counts; zero_duration counts directional patches with T = 0."""
    counts = Counter()
    for patch in patches:
        if patch.n_trades < min_trades:
            counts["below"] += 1
            continue
        if classify(patch, theta) is PatchDirection.NON_DIRECTIONAL:
            counts["non"] += 1
        else:
            counts["dir"] += 1
            if patch.t_last == patch.t_first:
                counts["zero"] += 1
    return PatchSummary(
        total=len(patches),
        directional=counts["dir"],
        non_directional=counts["non"],
        below_min_trades=counts["below"],
        zero_duration=counts["zero"],
    )


def group_by_firm(patches: list[DirectionalPatch]) -> dict[str, list[DirectionalPatch]]:
    grouped: dict[str, list[DirectionalPatch]] = {}
    for patch in patches:
        grouped.setdefault(patch.firm_id, []).append(patch)
    return dict(sorted(grouped.items()))


def variable_values(patches: list[DirectionalPatch], variable: str) -> np.ndarray:
    return np.array([p.value_of(variable) for p in patches], dtype=np.float64)
