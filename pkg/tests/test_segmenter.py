import math

import numpy as np
import pytest
from scipy import stats

from conftest import make_series
from patchscale.config import constant
from patchscale.core import segmenter
from patchscale.core.segmenter import (
    SignificanceModel,
    best_cut,
    max_t,
    mc_grid_bracket,
    null_max_t,
    segment,
    segment_key,
    significance,
    significance_mc,
    significance_mc_grid,
    t_statistic,
)
from patchscale.enums.enums import SignificanceMode, TStatisticForm


def _near(cuts, target, tolerance):
    return any(abs(c - target) <= tolerance for c in cuts)


def test_t_statistic_hand_example():
    t = t_statistic([0.0, 1.0, 2.0, 3.0], 2)

    assert t == pytest.approx(2.0 / (math.sqrt(0.5) * 1.0), rel=1e-12)
    assert t == pytest.approx(abs(stats.ttest_ind([0, 1], [2, 3]).statistic), rel=1e-12)


def test_t_statistic_matches_scipy_on_random_splits(rng):
    x = rng.normal(size=60)
    for split in (2, 17, 30, 58):
        expected = abs(stats.ttest_ind(x[:split], x[split:]).statistic)
        assert t_statistic(x, split) == pytest.approx(expected, rel=1e-9)


def test_welch_form_matches_scipy(rng):
    x = np.concatenate([rng.normal(0, 1, 20), rng.normal(1, 3, 35)])

    expected = abs(stats.ttest_ind(x[:20], x[20:], equal_var=False).statistic)

    assert t_statistic(x, 20, TStatisticForm.WELCH) == pytest.approx(expected, rel=1e-9)


def test_t_statistic_of_identical_halves_is_zero():
    assert t_statistic([5.0, 5.0, 5.0, 5.0], 2) == 0.0


def test_t_statistic_of_noiseless_step_is_infinite():
    assert math.isinf(t_statistic([0.0, 0.0, 10.0, 10.0], 2))


def test_t_statistic_is_affine_invariant(rng):
    x = rng.normal(size=40)

    assert t_statistic(3.7 * x - 12.0, 15) == pytest.approx(t_statistic(x, 15), rel=1e-9)


@pytest.mark.parametrize("split", [0, 1, 9, 10])
def test_t_statistic_needs_two_points_per_side(split):
    with pytest.raises(ValueError):
        t_statistic(np.arange(10.0), split)


def test_max_t_on_exact_step():
    candidate = max_t([0.0, 0.0, 10.0, 10.0])

    assert candidate.position == 2
    assert math.isinf(candidate.t_value)


def test_max_t_of_constant_series_is_zero_at_first_split():
    candidate = max_t(np.full(30, 7.0))

    assert candidate.position == 2
    assert candidate.t_value == 0.0


def test_max_t_short_window_has_no_candidate():
    assert max_t([1.0, 2.0, 3.0]) is None


def test_max_t_agrees_with_exhaustive_scan(rng):
    x = np.concatenate([rng.normal(0, 1, 50), rng.normal(10, 1, 50)])
    scan = [abs(stats.ttest_ind(x[:p], x[p:]).statistic) for p in range(2, 99)]

    candidate = max_t(x)

    assert 45 <= candidate.position <= 55
    assert candidate.position == 2 + int(np.argmax(scan))
    assert candidate.t_value == pytest.approx(max(scan), rel=1e-9)


def test_significance_of_zero_is_zero():
    assert significance(0.0, 100) == 0.0
    assert significance_mc(0.0, 100, trials=500, seed=1) == 0.0


def test_significance_of_infinite_t_is_one():
    assert significance(math.inf, 100) == 1.0
    assert significance_mc(math.inf, 100, trials=500, seed=1) == 1.0


def test_large_t_is_significant():
    assert significance(10.0, 200) > 0.99


def test_significance_is_monotone_in_t():
    for n in (20, 50, 200, 1000):
        grid = [significance(t, n) for t in np.linspace(0.0, 8.0, 161)]
        assert all(0.0 <= p <= 1.0 for p in grid)
        assert all(b >= a for a, b in zip(grid, grid[1:]))


def test_significance_preconditions():
    with pytest.raises(ValueError):
        significance(1.0, 3)
    with pytest.raises(ValueError):
        significance(-1.0, 50)
    with pytest.raises(ValueError):
        significance_mc(1.0, 50, trials=0)


def test_monte_carlo_is_deterministic_per_seed():
    first = significance_mc(3.0, 60, trials=2000, seed=7)
    null_max_t.cache_clear()
    second = significance_mc(3.0, 60, trials=2000, seed=7)

    assert first == second


def test_null_distribution_is_sorted_and_read_only():
    null = null_max_t(40, 1000, 3)

    assert null.shape == (1000,)
    assert np.all(np.diff(null) >= 0)
    with pytest.raises(ValueError):
        null[0] = 0.0


def test_small_windows_use_monte_carlo():
    model = SignificanceModel(mc_trials=2000, seed=5)

    assert model(2.5, 10) == significance_mc(2.5, 10, 2000, 5)
    assert model(2.5, 100) == significance(2.5, 100)


def test_monte_carlo_mode_is_honoured():
    model = SignificanceModel(mode=SignificanceMode.MONTE_CARLO, mc_trials=2000, seed=5)

    assert model(3.0, 128) == significance_mc(3.0, 128, 2000, 5)
    assert model(3.0, 30) == significance_mc(3.0, 30, 2000, 5)


def test_grid_lengths_bracket_the_window():
    assert mc_grid_bracket(64) == (64, 76)
    assert mc_grid_bracket(100) == (91, 108)
    assert mc_grid_bracket(128) == (128, 152)
    with pytest.raises(ValueError):
        mc_grid_bracket(63)


def test_long_windows_interpolate_between_grid_tables():
    exact_lo = significance_mc(3.2, 91, 2000, 5)
    exact_hi = significance_mc(3.2, 108, 2000, 5)

    level = significance_mc_grid(3.2, 100, 2000, 5)

    assert min(exact_lo, exact_hi) <= level <= max(exact_lo, exact_hi)
    assert significance_mc_grid(3.2, 108, 2000, 5) == exact_hi
    assert significance_mc_grid(3.2, 40, 2000, 5) == significance_mc(3.2, 40, 2000, 5)


def test_monte_carlo_segmentation_builds_only_grid_tables(step_series, monkeypatch):
    lengths = set()
    build = segmenter.null_max_t

    def recording(n, *args):
        lengths.add(n)
        return build(n, *args)

    monkeypatch.setattr(segmenter, "null_max_t", recording)
    model = SignificanceModel(mode=SignificanceMode.MONTE_CARLO, mc_trials=500, seed=5)

    segment(step_series, model=model)

    grid = {mc_grid_bracket(n)[0] for n in range(constant.MC_GRID_START, 2000)}
    assert any(n >= constant.MC_GRID_START for n in lengths)
    assert {n for n in lengths if n >= constant.MC_GRID_START} <= grid


@pytest.mark.slow
def test_closed_form_agrees_with_monte_carlo_at_n_100():
    assert abs(significance(3.5, 100) - significance_mc(3.5, 100, 10_000, 11)) <= 0.03


@pytest.mark.slow
@pytest.mark.parametrize("n", [50, 200, 1000])
def test_closed_form_calibration_over_upper_tail(n):
    null = null_max_t(n, 10_000, 2024)
    for level in (0.90, 0.95, 0.99, 0.995, 0.999):
        t = float(np.quantile(null, level))
        assert abs(significance(t, n) - significance_mc(t, n, 10_000, 2024)) <= 0.05


def test_segment_constant_series_has_no_cuts():
    seg = segment(make_series(np.full(200, 3.0)))

    assert seg.boundaries == (0, 200)


def test_segment_short_and_empty_series():
    assert segment(make_series([1.0, -2.0, 3.0])).boundaries == (0, 3)
    assert segment(make_series([])).boundaries == (0,)


def test_segment_noiseless_levels_exactly():
    values = np.repeat([1.0, 6.0, 1.0], 50)

    seg = segment(make_series(values, firm_id="F9", stock_id="TEF"))

    assert seg.boundaries == (0, 50, 100, 150)
    assert (seg.firm_id, seg.stock_id) == ("F9", "TEF")


def test_segment_finds_both_steps(step_series):
    seg = segment(step_series)

    assert seg.boundaries[0] == 0 and seg.boundaries[-1] == 900
    assert all(b > a for a, b in zip(seg.boundaries, seg.boundaries[1:]))
    assert _near(seg.interior, 300, 15)
    assert _near(seg.interior, 600, 15)


def test_segment_is_idempotent_on_noiseless_levels():
    values = np.repeat([2.0, -3.0, 4.0, 4.5], 40)
    seg = segment(values)

    for lo, hi in seg.ranges:
        assert segment(values[lo:hi]).boundaries == (0, hi - lo)


@pytest.mark.parametrize("seed", range(30))
def test_noisy_resplits_only_where_a_neighbour_check_withdrew_the_cut(seed):
    values = np.random.default_rng(seed).standard_normal(400)
    seg = segment(values, threshold=0.5)

    for lo, hi in seg.ranges:
        again = segment(values[lo:hi], threshold=0.5)
        if again.n_segments > 1:
            first = max_t(values[lo:hi]).position
            assert first in again.interior
            assert lo + first in seg.withdrawn


def test_noise_at_a_loose_threshold_withdraws_cuts():
    withdrawn = [
        segment(np.random.default_rng(seed).standard_normal(400), threshold=0.5).withdrawn
        for seed in range(30)
    ]

    assert any(withdrawn)


def test_best_cut_carries_its_significance(step_series):
    candidate = best_cut(step_series)

    assert candidate.position == max_t(step_series).position
    assert candidate.significance == significance(candidate.t_value, step_series.size)
    assert candidate.significance >= 0.99
    assert best_cut([1.0, 2.0, 3.0]) is None


def test_segment_is_affine_invariant(step_series):
    assert segment(2.5 * step_series + 40.0).boundaries == segment(step_series).boundaries


def test_raising_threshold_never_adds_cuts(step_series):
    loose = segment(step_series, threshold=0.9)
    strict = segment(step_series, threshold=0.999)

    assert strict.n_segments <= loose.n_segments


def test_segment_rejects_bad_threshold():
    with pytest.raises(ValueError):
        segment(np.zeros(10), threshold=1.0)


def test_segment_key_rebuilds_the_series(step_series):
    series = make_series(step_series, firm_id="A", stock_id="X")

    key, seg = segment_key(
        ("A", "X", series.timestamps, series.values, 0.99, SignificanceModel())
    )

    assert key == ("A", "X")
    assert seg == segment(series)


@pytest.mark.slow
def test_false_cut_rate_on_gaussian_noise():
    with_cuts = sum(
        segment(np.random.default_rng(seed).standard_normal(1000)).n_segments > 1
        for seed in range(500)
    )

    assert with_cuts / 500 <= 0.03


@pytest.mark.slow
def test_step_recovery_rate():
    levels = np.repeat([0.0, 8.0, 0.0], 300)
    hits = 0
    for seed in range(200):
        x = levels + np.random.default_rng(seed).standard_normal(levels.size)
        cuts = segment(x).interior
        hits += len(cuts) == 2 and _near(cuts, 300, 15) and _near(cuts, 600, 15)

    assert hits / 200 >= 0.95
