"""Allometric exponents between patch variables by PCA in log space.

Points are natural-log coordinates (log T, log N_m, log V_m). A scaling
exponent is the ratio of leading-eigenvector components of the covariance
matrix of the cloud, i.e. the slope of its major axis.
"""

from typing import Callable, NamedTuple

import numpy as np
from tqdm import tqdm

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core.errors import InsufficientDataError, NumericalError
from patchscale.enums.enums import AllometryEstimator, AllometryMode
from patchscale.schema.fits import AllometricFit
from patchscale.schema.patch import DirectionalPatch
from patchscale.utils.rng import rng_for

# column of each variable in a log-point array
COLUMNS = {"T": 0, "N_m": 1, "V_m": 2}


class LogPoint(NamedTuple):
    log_T: float
    log_N: float
    log_V: float


class FirmExponents(NamedTuple):
    n_patches: int
    g1: float
    g2: float
    g3: float


def log_points(patches: list[DirectionalPatch]) -> tuple[np.ndarray, int]:
    """(n, 3) array of (log T, log N_m, log V_m) and the number of patches skipped.

    Patches with T = 0 (or any other zero coordinate) have no log point.
    """
    rows = []
    skipped = 0
    for patch in patches:
        coords = patch.log_coordinates()
        if coords is None:
            skipped += 1
            continue
        rows.append(coords)
    if skipped:
        State.logger.debug(f"Skipped {skipped} patches with a zero coordinate")
    points = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return points, skipped


def _leading_axis(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading covariance eigenvector and its share of the total variance."""
    cov = np.atleast_2d(np.cov(points, rowvar=False))
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    total = float(eigenvalues.sum())
    if not np.isfinite(total) or total <= 0:
        raise NumericalError("degenerate covariance: the points have no spread")
    return eigenvectors[:, -1], float(eigenvalues[-1] / total)


def pca2(points: np.ndarray) -> tuple[float, float]:
    """Major-axis slope of (u, v) points and the explained variance share."""
    xy = np.asarray(points, dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError("pca2 expects an (n, 2) array")
    if xy.shape[0] < 3:
        raise InsufficientDataError(f"pca2 needs at least 3 points, got {xy.shape[0]}")
    axis, explained = _leading_axis(xy)
    if abs(axis[0]) < constant.AXIS_DEGENERATE:
        raise NumericalError("axis-degenerate configuration: the major axis has no u component")
    if axis[0] < 0:
        axis = -axis
    return float(axis[1] / axis[0]), explained


def _pca3_axis(points: np.ndarray) -> tuple[np.ndarray, float]:
    xyz = np.asarray(points, dtype=np.float64)
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise ValueError("pca3 expects an (n, 3) array of (log T, log N_m, log V_m)")
    if xyz.shape[0] < 4:
        raise InsufficientDataError(f"pca3 needs at least 4 points, got {xyz.shape[0]}")
    axis, explained = _leading_axis(xyz)
    a_t, _, a_v = axis
    if abs(a_v) < constant.AXIS_DEGENERATE or abs(a_t) < constant.AXIS_DEGENERATE:
        raise NumericalError("axis-degenerate configuration: a_V or a_T is numerically zero")
    if a_v < 0:
        axis = -axis
    return axis, explained


def _ratios(axis: np.ndarray) -> tuple[float, float, float]:
    a_t, a_n, a_v = (float(c) for c in axis)
    return a_n / a_v, a_t / a_v, a_n / a_t


def pca3(points: np.ndarray) -> AllometricFit:
    """Trivariate fit: g1 = a_N/a_V, g2 = a_T/a_V, g3 = a_N/a_T."""
    axis, explained = _pca3_axis(points)
    g1, g2, g3 = _ratios(axis)
    return AllometricFit(
        mode=AllometryMode.TRIVARIATE,
        g1=g1,
        g2=g2,
        g3=g3,
        explained_variance=(explained,),
        n_points=int(np.asarray(points).shape[0]),
    )


def _pca3_component(index: int) -> Callable[[np.ndarray], float]:
    return lambda pts: _ratios(_pca3_axis(pts)[0])[index]


_ESTIMATORS: dict[AllometryEstimator, Callable[[np.ndarray], float]] = {
    AllometryEstimator.PCA2_G: lambda pts: pca2(pts)[0],
    AllometryEstimator.PCA3_G1: _pca3_component(0),
    AllometryEstimator.PCA3_G2: _pca3_component(1),
    AllometryEstimator.PCA3_G3: _pca3_component(2),
}


def bootstrap_ci(
    points: np.ndarray,
    estimator: AllometryEstimator,
    B: int = constant.BOOTSTRAP_SAMPLES,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile 95% interval of an exponent over B resamples with replacement."""
    if B < constant.MIN_BOOTSTRAP_SAMPLES:
        raise ValueError(f"B must be >= {constant.MIN_BOOTSTRAP_SAMPLES}, got {B}")
    pts = np.asarray(points, dtype=np.float64)
    estimate = _ESTIMATORS[estimator]
    rng = rng_for(seed, "allometry-bootstrap", estimator.value)
    n = pts.shape[0]
    estimates = []
    failures = 0
    progress = State.get_settings().progress
    for _ in tqdm(range(B), desc=f"bootstrap {estimator.value}", disable=not progress, leave=False):
        sample = pts[rng.integers(0, n, size=n)]
        try:
            estimates.append(estimate(sample))
        except NumericalError:
            failures += 1
    if failures > constant.MAX_BOOTSTRAP_FAILURE_RATE * B:
        raise NumericalError(
            f"{estimator.value} failed on {failures} of {B} bootstrap resamples (degenerate data)"
        )
    low, high = np.percentile(np.asarray(estimates), [2.5, 97.5])
    return float(low), float(high)


def _pair(points: np.ndarray, name: str) -> np.ndarray:
    u, v = constant.ALLOMETRIC_PAIRS[name]
    return points[:, [COLUMNS[u], COLUMNS[v]]]


def bivariate_fit(
    points: np.ndarray, B: int = constant.BOOTSTRAP_SAMPLES, seed: int = 0
) -> AllometricFit:
    """Three separate pca2 fits: N_m vs V_m, T vs V_m and N_m vs T."""
    slopes, shares, ci95, centroids = {}, [], {}, {}
    for name in constant.ALLOMETRIC_PAIRS:
        pair = _pair(points, name)
        slopes[name], explained = pca2(pair)
        shares.append(explained)
        ci95[name] = bootstrap_ci(pair, AllometryEstimator.PCA2_G, B, seed)
        centroids[name] = tuple(float(c) for c in pair.mean(axis=0))
    return AllometricFit(
        mode=AllometryMode.BIVARIATE,
        **slopes,
        ci95=ci95,
        explained_variance=tuple(shares),
        n_points=int(points.shape[0]),
        B=B,
        seed=seed,
        centroids=centroids,
    )


def trivariate_fit(
    points: np.ndarray, B: int = constant.BOOTSTRAP_SAMPLES, seed: int = 0
) -> AllometricFit:
    fit = pca3(points)
    ci95 = {
        "g1": bootstrap_ci(points, AllometryEstimator.PCA3_G1, B, seed),
        "g2": bootstrap_ci(points, AllometryEstimator.PCA3_G2, B, seed),
        "g3": bootstrap_ci(points, AllometryEstimator.PCA3_G3, B, seed),
    }
    return fit.model_copy(update={"ci95": ci95, "B": B, "seed": seed})


def per_firm_exponents(
    grouped: dict[str, list[DirectionalPatch]],
    min_patches: int = constant.MIN_FIRM_PATCHES,
) -> dict[str, FirmExponents]:
    """Bivariate PCA exponents of every firm with at least `min_patches` usable patches."""
    out: dict[str, FirmExponents] = {}
    for firm_id in sorted(grouped):
        points, _ = log_points(grouped[firm_id])
        if points.shape[0] < max(min_patches, 3):
            continue
        try:
            g = {name: pca2(_pair(points, name))[0] for name in constant.ALLOMETRIC_PAIRS}
        except NumericalError as e:
            State.logger.warning(f"Per-firm exponents skipped for {firm_id}: {e}")
            continue
        out[firm_id] = FirmExponents(points.shape[0], g["g1"], g["g2"], g["g3"])
    State.logger.info(f"Per-firm exponents for {len(out)} of {len(grouped)} firms")
    return out


def exponent_dispersion(per_firm: dict[str, FirmExponents]) -> dict[str, dict[str, float]]:
    """Mean, standard deviation, median and IQR of each per-firm exponent."""
    out = {}
    for name in ("g1", "g2", "g3"):
        values = np.array([getattr(f, name) for f in per_firm.values()], dtype=np.float64)
        if values.size == 0:
            out[name] = {"n": 0}
            continue
        q1, median, q3 = np.percentile(values, [25, 50, 75])
        out[name] = {
            "n": int(values.size),
            "mean": float(values.mean()),
            "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
            "median": float(median),
            "iqr": float(q3 - q1),
        }
    return out


def ols_slope(points: np.ndarray) -> float:
    """Least-squares slope of v on u. Diagnostic only."""
    u, v = np.asarray(points, dtype=np.float64).T
    var_u = float(np.var(u))
    if var_u <= 0:
        raise NumericalError("zero variance in u")
    return float(np.mean((u - u.mean()) * (v - v.mean())) / var_u)


def rma_slope(points: np.ndarray) -> float:
    """Reduced-major-axis slope sign(cov) * sd(v) / sd(u). Diagnostic only."""
    u, v = np.asarray(points, dtype=np.float64).T
    sd_u = float(np.std(u))
    if sd_u <= 0:
        raise NumericalError("zero variance in u")
    cov = float(np.mean((u - u.mean()) * (v - v.mean())))
    return float(np.sign(cov) * np.std(v) / sd_u)


def diagnostic_slopes(points: np.ndarray) -> dict[str, dict[str, float]]:
    return {
        name: {"ols": ols_slope(_pair(points, name)), "rma": rma_slope(_pair(points, name))}
        for name in constant.ALLOMETRIC_PAIRS
    }
