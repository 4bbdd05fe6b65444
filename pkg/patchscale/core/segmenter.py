"""Maximum-t segmentation of signed traded-value series.

A window is split where the two-sample t statistic between its left and
right parts is largest, provided that maximum is significant against the
distribution of maximum t values of i.i.d. sequences of the same length,
and provided each new segment still differs significantly from the
existing segment next to it. Windows shorter than four points are final.
"""

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.special import betainc

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.enums.enums import SignificanceMode, TStatisticForm
from patchscale.schema.segmentation import CutCandidate, Segmentation
from patchscale.schema.trade import SignedSeries
from patchscale.utils.rng import rng_for

ArrayLike = Union[Sequence[float], np.ndarray]

# rows x columns of standard normals generated per Monte Carlo chunk
_MC_CHUNK_CELLS = 2_000_000


def _t_rows(x: np.ndarray, form: TStatisticForm) -> np.ndarray:
    """t statistic at every admissible split, for each row of `x`.

    Column j of the result is the split at position j + 2, so the left part
    always has >= 2 points and so does the right part. Rows are standardized
    first; t is affine invariant and this keeps the prefix sums well scaled.
    """
    rows, n = x.shape
    mean = x.mean(axis=1, keepdims=True)
    sd = x.std(axis=1, keepdims=True)
    flat = (sd[:, 0] == 0) | ~np.isfinite(sd[:, 0])
    sd = np.where(sd == 0, 1.0, sd)
    z = (x - mean) / sd

    c1 = np.cumsum(z, axis=1)
    c2 = np.cumsum(z * z, axis=1)
    p = np.arange(constant.MIN_SIDE, n - constant.MIN_SIDE + 1)
    n_left = p.astype(np.float64)
    n_right = n - n_left
    s_left = c1[:, p - 1]
    q_left = c2[:, p - 1]
    s_right = c1[:, -1:] - s_left
    q_right = c2[:, -1:] - q_left
    m_left = s_left / n_left
    m_right = s_right / n_right
    ss_left = np.maximum(q_left - s_left * m_left, 0.0)
    ss_right = np.maximum(q_right - s_right * m_right, 0.0)
    gap = np.abs(m_left - m_right)

    if form is TStatisticForm.POOLED:
        pooled = (ss_left + ss_right) / (n - 2)
        scale2 = pooled * (1.0 / n_left + 1.0 / n_right)
        degenerate = pooled <= constant.ZERO_VARIANCE
    else:
        scale2 = ss_left / (n_left - 1) / n_left + ss_right / (n_right - 1) / n_right
        degenerate = scale2 <= constant.ZERO_VARIANCE

    with np.errstate(divide="ignore", invalid="ignore"):
        t = gap / np.sqrt(scale2)
    t = np.where(degenerate, np.where(gap > constant.ZERO_MEAN_GAP, np.inf, 0.0), t)
    t[flat, :] = 0.0
    return t


def t_statistic(
    values: ArrayLike, split: int, form: TStatisticForm = TStatisticForm.POOLED
) -> float:
    """|mean_L - mean_R| / (s_p * sqrt(1/n_L + 1/n_R)) for the split at `split`.

    A zero pooled deviation gives +inf when the means differ and 0 when
    they agree.
    """
    x = np.asarray(values, dtype=np.float64)
    if split < constant.MIN_SIDE or x.size - split < constant.MIN_SIDE:
        raise ValueError(
            f"split {split} leaves fewer than {constant.MIN_SIDE} points on a side of {x.size}"
        )
    return float(_t_rows(x[None, :], form)[0, split - constant.MIN_SIDE])


def max_t(values: ArrayLike, form: TStatisticForm = TStatisticForm.POOLED) -> CutCandidate | None:
    """Split maximizing t, ties to the smallest position.

    Returns None for windows shorter than four points.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < constant.MIN_WINDOW:
        return None
    profile = _t_rows(x[None, :], form)[0]
    best = int(np.argmax(profile))
    return CutCandidate(position=best + constant.MIN_SIDE, t_value=float(profile[best]))


def _eta(n: int) -> float:
    return constant.SIGNIFICANCE_ETA_SLOPE * math.log(n) + constant.SIGNIFICANCE_ETA_INTERCEPT


def significance(t_max: float, n: int) -> float:
    """P(max t of an i.i.d. sequence of length n <= t_max), closed-form approximation.

    {1 - I_x(delta*nu, delta)}^eta with x = nu / (nu + t^2), nu = n - 2,
    delta = 0.40 and eta = 4.19 ln n - 11.54. For n where eta <= 0 the
    expression is not a probability and the Monte Carlo estimate is used.
    """
    if n < constant.MIN_WINDOW:
        raise ValueError(f"significance needs n >= {constant.MIN_WINDOW}, got {n}")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    if math.isinf(t_max):
        return 1.0
    if t_max == 0:
        return 0.0
    eta = _eta(n)
    if eta <= 0:
        settings = State.get_settings()
        return significance_mc(t_max, n, settings.mc_trials, settings.seed)
    nu = n - 2
    x = nu / (nu + t_max * t_max)
    tail = 1.0 - float(betainc(constant.SIGNIFICANCE_DELTA * nu, constant.SIGNIFICANCE_DELTA, x))
    return float(min(max(tail, 0.0) ** eta, 1.0))


@lru_cache(maxsize=256)
def null_max_t(
    n: int, trials: int, seed: int, form: TStatisticForm = TStatisticForm.POOLED
) -> np.ndarray:
    """Sorted maximum-t values of `trials` standard-normal sequences of length n."""
    if n < constant.MIN_WINDOW:
        raise ValueError(f"null distribution needs n >= {constant.MIN_WINDOW}")
    rng = rng_for(seed, "null-max-t", form.value, n)
    chunk = max(1, _MC_CHUNK_CELLS // n)
    maxima = np.empty(trials)
    done = 0
    while done < trials:
        rows = min(chunk, trials - done)
        block = rng.standard_normal((rows, n))
        maxima[done : done + rows] = _t_rows(block, form).max(axis=1)
        done += rows
    maxima.sort()
    maxima.flags.writeable = False
    State.logger.debug(f"Built null max-t distribution for n={n} ({trials} trials)")
    return maxima


def significance_mc(
    t_max: float,
    n: int,
    trials: int = constant.DEFAULT_MC_TRIALS,
    seed: int = 0,
    form: TStatisticForm = TStatisticForm.POOLED,
) -> float:
    """Empirical fraction of i.i.d. standard-normal sequences with max t <= t_max."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if math.isinf(t_max):
        return 1.0
    null = null_max_t(n, trials, seed, form)
    return float(np.searchsorted(null, t_max, side="right")) / trials


def _grid_length(k: int) -> int:
    return round(constant.MC_GRID_START * 2 ** (k / constant.MC_GRID_STEPS_PER_DOUBLING))


def mc_grid_bracket(n: int) -> tuple[int, int]:
    """Grid lengths lo <= n < hi of the Monte Carlo null tables."""
    if n < constant.MC_GRID_START:
        raise ValueError(f"the null table grid starts at n = {constant.MC_GRID_START}")
    k = int(constant.MC_GRID_STEPS_PER_DOUBLING * math.log2(n / constant.MC_GRID_START))
    while _grid_length(k) > n:
        k -= 1
    while _grid_length(k + 1) <= n:
        k += 1
    return _grid_length(k), _grid_length(k + 1)


def significance_mc_grid(
    t_max: float,
    n: int,
    trials: int = constant.DEFAULT_MC_TRIALS,
    seed: int = 0,
    form: TStatisticForm = TStatisticForm.POOLED,
) -> float:
    """Monte Carlo significance from null tables at grid lengths only.

    Below MC_GRID_START this is `significance_mc`. Above it the levels at the
    two bracketing grid lengths are interpolated linearly in log n.
    """
    if n < constant.MC_GRID_START:
        return significance_mc(t_max, n, trials, seed, form)
    lo, hi = mc_grid_bracket(n)
    at_lo = significance_mc(t_max, lo, trials, seed, form)
    if lo == n:
        return at_lo
    at_hi = significance_mc(t_max, hi, trials, seed, form)
    w = math.log(n / lo) / math.log(hi / lo)
    return (1.0 - w) * at_lo + w * at_hi


@dataclass(frozen=True)
class SignificanceModel:
    """How a (t, n) pair is turned into a significance level during segmentation."""

    mode: SignificanceMode = SignificanceMode.CLOSED_FORM
    form: TStatisticForm = TStatisticForm.POOLED
    mc_trials: int = constant.DEFAULT_MC_TRIALS
    seed: int = 0
    small_n_monte_carlo: bool = True
    mc_grid: bool = True

    def __call__(self, t_max: float, n: int) -> float:
        use_mc = (
            self.mode is SignificanceMode.MONTE_CARLO
            or self.form is TStatisticForm.WELCH
            or (self.small_n_monte_carlo and n < constant.SMALL_N_MONTE_CARLO)
            or _eta(n) <= 0
        )
        if use_mc:
            estimate = significance_mc_grid if self.mc_grid else significance_mc
            return estimate(t_max, n, self.mc_trials, self.seed, self.form)
        return significance(t_max, n)


def _pair_significant(
    values: np.ndarray, a: int, b: int, c: int, model: SignificanceModel, threshold: float
) -> bool:
    """Whether [a, b) and [b, c) differ significantly; n is their combined length."""
    window = values[a:c]
    t = t_statistic(window, b - a, model.form)
    return model(t, c - a) >= threshold


def best_cut(values: ArrayLike, model: SignificanceModel | None = None) -> CutCandidate | None:
    """`max_t` of the window with the significance level of its t filled in."""
    model = model or SignificanceModel()
    x = np.asarray(values, dtype=np.float64)
    candidate = max_t(x, model.form)
    if candidate is None:
        return None
    level = model(candidate.t_value, x.size)
    return candidate.model_copy(update={"significance": level})


def segment(
    series: Union[SignedSeries, ArrayLike],
    threshold: float = constant.SEGMENTATION_THRESHOLD,
    model: SignificanceModel | None = None,
) -> Segmentation:
    """Recursive maximum-t segmentation with neighbour re-checks.

    Windows are processed depth first, left before right, so a left
    neighbour is always final when it is consulted. Cuts that pass the
    window test but fail a neighbour re-check are kept in `withdrawn`.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    model = model or SignificanceModel()
    if isinstance(series, SignedSeries):
        values, firm_id, stock_id = series.values, series.firm_id, series.stock_id
    else:
        values, firm_id, stock_id = np.asarray(series, dtype=np.float64), "", ""
    n = int(values.size)
    if n == 0:
        return Segmentation(firm_id=firm_id, stock_id=stock_id, threshold=threshold, boundaries=(0,))

    boundaries = [0, n]
    withdrawn = []
    stack = [(0, n)]
    while stack:
        lo, hi = stack.pop()
        candidate = best_cut(values[lo:hi], model)
        if candidate is None or candidate.significance < threshold:
            continue
        cut = lo + candidate.position
        index = bisect.bisect_left(boundaries, lo)
        if (
            lo > 0 and not _pair_significant(values, boundaries[index - 1], lo, cut, model, threshold)
        ) or (
            hi < n and not _pair_significant(values, cut, hi, boundaries[index + 2], model, threshold)
        ):
            withdrawn.append(cut)
            continue
        bisect.insort(boundaries, cut)
        stack.append((cut, hi))
        stack.append((lo, cut))

    return Segmentation(
        firm_id=firm_id,
        stock_id=stock_id,
        threshold=threshold,
        boundaries=tuple(boundaries),
        withdrawn=tuple(sorted(withdrawn)),
    )


def segment_key(args) -> tuple[tuple[str, str], Segmentation]:
    """Worker-pool entry point.

    Takes (firm_id, stock_id, timestamps, values, threshold, model) so work
    items are plain picklable values; returns ((firm_id, stock_id), segmentation).
    """
    firm_id, stock_id, timestamps, values, threshold, model = args
    series = SignedSeries(firm_id, stock_id, timestamps, values)
    return series.key, segment(series, threshold, model)
