"""Jarque-Bera lognormality of patch variables, per firm and pooled."""

from functools import lru_cache
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import stats

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core.errors import InsufficientDataError, NumericalError
from patchscale.core.patches import variable_values
from patchscale.enums.enums import PatchVariable
from patchscale.schema.fits import LognormalityResult, LognormalitySummary
from patchscale.schema.patch import DirectionalPatch
from patchscale.utils.rng import rng_for

ArrayLike = Union[Sequence[float], np.ndarray]

POOL_ID = "pool"


class JBOutcome(NamedTuple):
    jb_stat: float
    critical_value: float
    reject: bool


def _jb_rows(samples: np.ndarray) -> np.ndarray:
    """JB = n/6 (S^2 + (K-3)^2/4) per row, raw (non-excess) kurtosis K."""
    n = samples.shape[1]
    s = stats.skew(samples, axis=1)
    k = stats.kurtosis(samples, axis=1, fisher=False)
    return n / 6.0 * (s**2 + (k - 3.0) ** 2 / 4.0)


@lru_cache(maxsize=None)
def jb_critical_value(
    n: int, small_sample_cutoff: int = constant.JB_SMALL_N, trials: int = constant.JB_MC_TRIALS
) -> float:
    """95% critical value of JB at sample size n.

    The chi-square(2) value for n >= small_sample_cutoff, otherwise the 95th
    percentile of JB over `trials` standard-normal samples of size n drawn
    from the fixed seed JB_MC_SEED.
    """
    if n < constant.JB_MIN_N:
        raise InsufficientDataError(f"Jarque-Bera needs n >= {constant.JB_MIN_N}, got {n}")
    if n >= small_sample_cutoff:
        return constant.JB_CHI2_CRITICAL
    rng = rng_for(constant.JB_MC_SEED, "jb-critical", n)
    null = _jb_rows(rng.standard_normal((trials, n)))
    critical = float(np.quantile(null, 1.0 - constant.JB_ALPHA))
    State.logger.debug(f"Monte Carlo JB critical value for n={n}: {critical:.4f}")
    return critical


def jarque_bera(xs: ArrayLike, small_sample_cutoff: int = constant.JB_SMALL_N) -> JBOutcome:
    """Jarque-Bera normality test at the 95% level.

    Samples shorter than `small_sample_cutoff` use Monte Carlo critical
    values instead of the asymptotic chi-square(2) value.
    """
    x = np.asarray(xs, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("jarque_bera expects a 1-d sample")
    n = x.size
    if n < constant.JB_MIN_N:
        raise InsufficientDataError(f"Jarque-Bera needs n >= {constant.JB_MIN_N}, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Jarque-Bera needs finite values")
    if np.ptp(x) == 0 or np.var(x) <= 0:
        raise NumericalError("zero variance: skewness and kurtosis are undefined")
    jb = float(stats.jarque_bera(x).statistic)
    critical = jb_critical_value(n, small_sample_cutoff)
    return JBOutcome(jb, critical, jb > critical)


def lognormality(xs: ArrayLike, small_sample_cutoff: int = constant.JB_SMALL_N) -> JBOutcome:
    """Lognormality of xs is normality of ln xs."""
    x = np.asarray(xs, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("lognormality needs strictly positive values")
    return jarque_bera(np.log(x), small_sample_cutoff)


def _positive_values(patches: list[DirectionalPatch], variable: PatchVariable) -> np.ndarray:
    values = variable_values(patches, variable.value)
    return values[values > 0]


def _result(firm_id: str, variable: PatchVariable, values: np.ndarray) -> LognormalityResult:
    outcome = lognormality(values)
    return LognormalityResult(
        firm_id=firm_id,
        variable=variable,
        n=int(values.size),
        jb_stat=outcome.jb_stat,
        critical_value=outcome.critical_value,
        reject=outcome.reject,
    )


def per_firm_lognormality(
    grouped: dict[str, list[DirectionalPatch]],
    variable: PatchVariable,
    min_patches: int = constant.MIN_FIRM_PATCHES,
) -> LognormalitySummary:
    """Share of firms with >= min_patches patches whose variable passes the lognormal test.

    Zero values (T = 0 patches) have no logarithm and are left out of the
    firm's sample; firms whose sample has no spread are not tested.
    """
    results = []
    for firm_id in sorted(grouped):
        values = _positive_values(grouped[firm_id], variable)
        if values.size < max(min_patches, constant.JB_MIN_N):
            continue
        try:
            results.append(_result(firm_id, variable, values))
        except NumericalError as e:
            State.logger.warning(f"Lognormality of {variable.value} not tested for {firm_id}: {e}")
    if not results:
        raise InsufficientDataError(
            f"no firm has {min_patches} testable {variable.value} values"
        )
    passing = sum(not r.reject for r in results)
    summary = LognormalitySummary(
        variable=variable,
        percentage=100.0 * passing / len(results),
        non_rejecting=passing,
        tested=len(results),
        results=tuple(results),
    )
    State.logger.info(f"Lognormality {variable.value}: {summary.row}")
    return summary


def pooled_lognormality(
    patches: list[DirectionalPatch], variable: PatchVariable
) -> LognormalityResult:
    """Jarque-Bera on the pooled logs of every firm's patches."""
    values = _positive_values(patches, variable)
    return _result(POOL_ID, variable, values)


def heterogeneity_decomposition(
    grouped: dict[str, list[DirectionalPatch]],
    variables: Sequence[PatchVariable] = tuple(PatchVariable),
    min_patches: int = constant.MIN_FIRM_PATCHES,
) -> dict[str, dict]:
    """Per-firm non-rejection share next to the pooled verdict, per variable.

    Labeled `between-firm` when most firms look lognormal while the pool does
    not, `within-firm` when most firms already reject, `none` otherwise.
    """
    pooled_patches = [p for firm in sorted(grouped) for p in grouped[firm]]
    return {
        variable.value: decompose(
            per_firm_lognormality(grouped, variable, min_patches),
            pooled_lognormality(pooled_patches, variable),
        )
        for variable in variables
    }


def decompose(summary: LognormalitySummary, pooled: LognormalityResult) -> dict:
    if summary.percentage > 50 and pooled.reject:
        label = "between-firm"
    elif summary.percentage <= 50:
        label = "within-firm"
    else:
        label = "none"
    return {
        "per_firm_percentage": summary.percentage,
        "per_firm_row": summary.row,
        "non_rejecting": summary.non_rejecting,
        "tested": summary.tested,
        "pooled_n": pooled.n,
        "pooled_jb_stat": pooled.jb_stat,
        "pooled_critical_value": pooled.critical_value,
        "pooled_reject": pooled.reject,
        "label": label,
    }
