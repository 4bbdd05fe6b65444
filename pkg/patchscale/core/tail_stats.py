"""Hill estimation of CCDF tail exponents.

Convention: P(X >= x) ~ x^-zeta, so the density decays as x^-(zeta+1).
"""

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core.errors import InsufficientDataError, NumericalError
from patchscale.enums.enums import CIMethod, KPolicyKind, PatchVariable
from patchscale.schema.fits import TailFit
from patchscale.utils.rng import rng_for

ArrayLike = Union[Sequence[float], np.ndarray]

# beyond this many candidate k values the KS scan runs on a geometric grid
_MAX_EXHAUSTIVE_K = 5_000
_GRID_POINTS = 1_000


def _positive(xs: ArrayLike) -> np.ndarray:
    x = np.asarray(xs, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-d sample")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("Hill estimation needs strictly positive finite values")
    return x


def _descending(x: np.ndarray) -> np.ndarray:
    return np.sort(x)[::-1]


def _hill_zeta(desc: np.ndarray, k: int) -> float:
    spacing = float(np.sum(np.log(desc[:k] / desc[k])))
    if spacing <= 0:
        raise NumericalError(f"top {k} order statistics all equal the threshold {desc[k]}")
    return k / spacing


def hill(
    xs: ArrayLike, k: int, variable: PatchVariable | None = None
) -> TailFit:
    """zeta = k / sum_{i<=k} ln(x_(i) / x_(k+1)) on descending order statistics.

    The 95% interval is the asymptotic normal zeta * (1 -/+ 1.96 / sqrt(k)).
    """
    x = _positive(xs)
    n = x.size
    if k < 1 or k >= n:
        raise ValueError(f"k must satisfy 1 <= k < n; got k={k}, n={n}")
    desc = _descending(x)
    zeta = _hill_zeta(desc, k)
    half = constant.Z_95 / math.sqrt(k)
    return TailFit(
        variable=variable,
        zeta=zeta,
        ci95=(zeta * (1 - half), zeta * (1 + half)),
        k=k,
        x_k=float(desc[k]),
        n=n,
    )


def hill_plot(xs: ArrayLike, ks: Sequence[int]) -> np.ndarray:
    """zeta as a function of k, for choosing or checking a cutoff by eye."""
    desc = _descending(_positive(xs))
    logs = np.log(desc)
    csum = np.cumsum(logs)
    ks = np.asarray(ks, dtype=int)
    if np.any(ks < 1) or np.any(ks >= desc.size):
        raise ValueError("every k must satisfy 1 <= k < n")
    with np.errstate(divide="ignore"):
        return ks / (csum[ks - 1] - ks * logs[ks])


def _ks_distance(tail_ascending: np.ndarray, threshold: float, zeta: float) -> float:
    k = tail_ascending.size
    fitted = 1.0 - (tail_ascending / threshold) ** (-zeta)
    upper = np.arange(1, k + 1) / k
    lower = np.arange(0, k) / k
    return float(max(np.max(np.abs(upper - fitted)), np.max(np.abs(fitted - lower))))


@dataclass(frozen=True)
class KPolicy:
    """How many order statistics a Hill fit uses: auto (KS scan), fraction:f, fixed:k."""

    kind: KPolicyKind = KPolicyKind.AUTO
    value: float | None = None

    @classmethod
    def parse(cls, text: str) -> "KPolicy":
        text = text.strip().lower()
        if text == KPolicyKind.AUTO.value:
            return cls()
        match = re.fullmatch(r"(fraction|fixed):([0-9.eE+-]+)", text)
        if not match:
            raise ValueError(f"unrecognised k policy {text!r}; use auto, fraction:<f> or fixed:<k>")
        kind = KPolicyKind(match.group(1))
        value = float(match.group(2))
        if kind is KPolicyKind.FRACTION and not 0 < value < 1:
            raise ValueError("fraction must lie in (0, 1)")
        if kind is KPolicyKind.FIXED and (value < 1 or value != int(value)):
            raise ValueError("fixed k must be a positive integer")
        return cls(kind, value)

    def __str__(self) -> str:
        if self.kind is KPolicyKind.AUTO:
            return "auto"
        value = int(self.value) if self.kind is KPolicyKind.FIXED else self.value
        return f"{self.kind.value}:{value}"


def choose_k(xs: ArrayLike, policy: KPolicy | None = None) -> int:
    """Number of tail order statistics for a Hill fit.

    The default scans k over [10, n/2] and keeps the k whose fitted Pareto
    tail is closest, in Kolmogorov-Smirnov distance, to the empirical tail
    beyond x_(k+1). Ties go to the smaller k.
    """
    policy = policy or KPolicy()
    x = _positive(xs)
    n = x.size
    if policy.kind is KPolicyKind.FIXED:
        k = int(policy.value)
        if k >= n:
            raise InsufficientDataError(f"fixed k={k} needs more than {k} observations, got {n}")
        return k
    if policy.kind is KPolicyKind.FRACTION:
        return max(1, min(int(math.floor(policy.value * n)), n - 1))

    if n < constant.MIN_AUTO_K_SAMPLE:
        raise InsufficientDataError(
            f"automatic k selection needs n >= {constant.MIN_AUTO_K_SAMPLE}, got {n}; "
            f"use the fraction policy (e.g. fraction:{constant.FALLBACK_K_FRACTION})"
        )
    desc = _descending(x)
    logs = np.log(desc)
    csum = np.cumsum(logs)
    k_max = n // 2
    if k_max - constant.AUTO_K_MIN > _MAX_EXHAUSTIVE_K:
        candidates = np.unique(np.geomspace(constant.AUTO_K_MIN, k_max, _GRID_POINTS).astype(int))
    else:
        candidates = np.arange(constant.AUTO_K_MIN, k_max + 1)

    best_k, best_d = None, math.inf
    for k in candidates:
        k = int(k)
        spacing = csum[k - 1] - k * logs[k]
        if spacing <= 0:
            continue
        zeta = k / spacing
        distance = _ks_distance(desc[:k][::-1], desc[k], zeta)
        if distance < best_d:
            best_k, best_d = k, distance
    if best_k is None:
        raise NumericalError("no admissible k: the sample has no spread in its upper half")
    State.logger.debug(f"choose_k: k={best_k} of n={n}, KS distance {best_d:.4f}")
    return best_k


def hill_bootstrap_ci(
    xs: ArrayLike, k: int, B: int = constant.BOOTSTRAP_SAMPLES, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap 95% interval of the Hill estimate at fixed k."""
    x = _positive(xs)
    rng = rng_for(seed, "hill-bootstrap", k)
    estimates = []
    for _ in range(B):
        desc = _descending(x[rng.integers(0, x.size, size=x.size)])
        try:
            estimates.append(_hill_zeta(desc, k))
        except NumericalError:
            continue
    if len(estimates) < (1 - constant.MAX_BOOTSTRAP_FAILURE_RATE) * B:
        raise NumericalError(f"Hill estimate failed on {B - len(estimates)} of {B} resamples")
    low, high = np.percentile(estimates, [2.5, 97.5])
    return float(low), float(high)


def fit_tail(
    xs: ArrayLike,
    variable: PatchVariable | None = None,
    policy: KPolicy | None = None,
    ci_method: CIMethod = CIMethod.ASYMPTOTIC,
    B: int = constant.BOOTSTRAP_SAMPLES,
    seed: int = 0,
) -> TailFit:
    k = choose_k(xs, policy)
    fit = hill(xs, k, variable)
    if ci_method is CIMethod.BOOTSTRAP:
        low, high = hill_bootstrap_ci(xs, k, B, seed)
        # a percentile interval need not contain the full-sample estimate
        fit = fit.model_copy(
            update={
                "ci95": (min(low, fit.zeta), max(high, fit.zeta)),
                "ci_method": CIMethod.BOOTSTRAP.value,
            }
        )
    name = variable.value if variable else "sample"
    State.logger.info(f"Tail fit {name}: zeta={fit.zeta:.3f} (k={fit.k}, n={fit.n})")
    return fit


def ccdf(xs: ArrayLike) -> list[tuple[float, float]]:
    """Sorted unique values with the empirical P(X >= x)."""
    x = np.asarray(xs, dtype=np.float64)
    if x.size == 0:
        raise ValueError("ccdf needs a non-empty sample")
    values, counts = np.unique(x, return_counts=True)
    at_or_above = np.cumsum(counts[::-1])[::-1]
    return list(zip(values.tolist(), (at_or_above / x.size).tolist()))
