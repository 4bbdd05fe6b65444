"""Synthetic trade tapes with planted packages.

Firms have Zipf-distributed sizes; each firm splits lognormally sized
packages into same-sign child trades spread over the package duration,
with a few opposite-sign noise trades inside. Packages of one firm in one
stock never overlap in time, so planted ranges map to series indices.
"""

import math

import numpy as np
import pandas as pd

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core.market_data import TradeTape
from patchscale.enums.enums import PatchDirection, Side
from patchscale.schema.synth import (
    ChurnTruth,
    GroundTruth,
    PackageTruth,
    PlannedPackage,
    SynthConfig,
)
from patchscale.utils.rng import rng_for

_CHURN_SPACING = 60.0


def firm_ids(n_firms: int) -> list[str]:
    width = max(4, len(str(n_firms)))
    return [f"{constant.SYNTH_FIRM_PREFIX}{i:0{width}d}" for i in range(n_firms)]


def gen_firm_sizes(n: int, zipf_exponent: float = 1.0, seed: int = 0) -> np.ndarray:
    """i.i.d. Pareto sizes with P(S > x) = x^-zipf_exponent for x >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if zipf_exponent <= 0:
        raise ValueError("zipf_exponent must be positive")
    return rng_for(seed, "firm-sizes").pareto(zipf_exponent, size=n) + 1.0


def gen_packages(
    firm_size: float, config: SynthConfig, seed: int, key: tuple = ()
) -> list[PlannedPackage]:
    """Packages of one firm in one stock, in execution order."""
    if firm_size <= 0:
        raise ValueError("firm_size must be positive")
    rng = rng_for(seed, "packages", *key)
    count = max(config.packages_min, int(rng.poisson(config.packages_mean)))
    mu = config.mu0 + config.size_elasticity * math.log(firm_size)
    log_v = mu + config.sigma * rng.standard_normal(count)
    excess = log_v - config.mu0
    log_n = (
        math.log(config.trades_at_mu0)
        + config.trades_exponent * excess
        + config.trades_sigma * rng.standard_normal(count)
    )
    log_t = (
        math.log(config.duration_at_mu0)
        + config.duration_exponent * excess
        + config.duration_sigma * rng.standard_normal(count)
    )
    n_trades = np.maximum(np.rint(np.exp(log_n)), config.min_trades).astype(np.int64)
    durations = np.maximum(np.rint(np.exp(log_t)), 1).astype(np.int64)

    first_buy = bool(rng.integers(0, 2))
    packages = []
    for i in range(count):
        if config.alternate_directions:
            buy = first_buy == (i % 2 == 0)
        else:
            buy = bool(rng.integers(0, 2))
        packages.append(
            PlannedPackage(
                direction=PatchDirection.BUY if buy else PatchDirection.SELL,
                V_m=float(np.exp(log_v[i])),
                N_m=int(n_trades[i]),
                T=int(durations[i]),
            )
        )
    return packages


def _weights(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    w = np.exp(sigma * rng.standard_normal(size)) if sigma > 0 else np.ones(size)
    return w / w.sum()


def _emit_package(
    package: PlannedPackage, start: int, noise_fraction: float, child_sigma: float, rng
) -> tuple[list[int], list[float], list[bool], float, int]:
    """Timestamps, unsigned values and dominant-side flags of one package, in order."""
    n = package.N_m
    inner = np.sort(rng.integers(start, start + package.T + 1, size=n - 2))
    stamps = np.concatenate(([start], inner, [start + package.T]))
    values = package.V_m * _weights(rng, n, child_sigma)

    n_noise = int(rng.binomial(n - 1, noise_fraction)) if noise_fraction > 0 else 0
    noise_values = np.empty(0)
    slots = np.empty(0, dtype=np.int64)
    if n_noise:
        cap = noise_fraction / (1 - noise_fraction) * package.V_m
        noise_values = package.V_m / n * np.exp(child_sigma * rng.standard_normal(n_noise))
        if noise_values.sum() > cap:
            noise_values *= cap / noise_values.sum()
        # slot j puts a noise trade between child j-1 and child j
        slots = np.sort(rng.integers(1, n, size=n_noise))

    ts, vals, dominant = [], [], []
    cursor = 0
    for j in range(n):
        while cursor < n_noise and slots[cursor] == j:
            ts.append(int(stamps[j - 1]))
            vals.append(float(noise_values[cursor]))
            dominant.append(False)
            cursor += 1
        ts.append(int(stamps[j]))
        vals.append(float(values[j]))
        dominant.append(True)
    return ts, vals, dominant, float(noise_values.sum()), n_noise


def emit_tape(
    packages: dict[tuple[str, str], list[PlannedPackage]],
    config: SynthConfig,
    seed: int,
) -> tuple[TradeTape, GroundTruth]:
    """Expand planned packages of every (firm, stock) into one time-ordered tape."""
    columns = {name: [] for name in constant.TRADE_CSV_HEADER}
    truths: list[PackageTruth] = []
    churns: list[ChurnTruth] = []
    lengths: dict[str, int] = {}

    for (firm_id, stock_id), planned in sorted(packages.items()):
        rng = rng_for(seed, "emit", firm_id, stock_id)
        clock = config.start_timestamp + int(rng.uniform(0, config.gap_mean))
        index = 0

        def _append(stamp: int, value: float, buy: bool):
            columns["timestamp"].append(stamp)
            columns["firm_id"].append(firm_id)
            columns["stock_id"].append(stock_id)
            columns["side"].append(Side.BUY.value if buy else Side.SELL.value)
            columns["value"].append(value)

        for package in planned:
            if config.churn_probability and rng.random() < config.churn_probability:
                mean_child = package.V_m / package.N_m
                for _ in range(config.churn_trades):
                    value = mean_child * math.exp(config.child_sigma * rng.standard_normal())
                    _append(clock, value, bool(rng.integers(0, 2)))
                    clock += 1 + int(rng.exponential(_CHURN_SPACING))
                churns.append(
                    ChurnTruth(
                        firm_id=firm_id,
                        stock_id=stock_id,
                        start=index,
                        end=index + config.churn_trades,
                    )
                )
                index += config.churn_trades
                clock += 1 + int(rng.exponential(config.gap_mean))

            buy = package.direction is PatchDirection.BUY
            ts, vals, dominant, noise_value, n_noise = _emit_package(
                package, clock, config.noise_fraction, config.child_sigma, rng
            )
            for stamp, value, is_dominant in zip(ts, vals, dominant):
                _append(stamp, value, buy == is_dominant)
            truths.append(
                PackageTruth(
                    firm_id=firm_id,
                    stock_id=stock_id,
                    direction=package.direction,
                    true_V_m=float(np.sum(np.array(vals)[np.array(dominant)])),
                    true_N_m=package.N_m,
                    true_T=package.T,
                    start=index,
                    end=index + len(ts),
                    noise_value=noise_value,
                    n_noise=n_noise,
                )
            )
            index += len(ts)
            clock += package.T + 1 + int(rng.exponential(config.gap_mean))
        lengths[GroundTruth.series_name(firm_id, stock_id)] = index

    frame = pd.DataFrame(columns)
    frame["timestamp"] = frame["timestamp"].astype(np.int64)
    frame["value"] = frame["value"].astype(np.float64)
    # merge by time; stable so each series keeps its emission order
    frame = frame.sort_values("timestamp", kind="stable")
    truth = GroundTruth(seed=seed, series_lengths=lengths, packages=truths, churn=churns)
    return TradeTape(frame), truth


def generate_market(config: SynthConfig) -> tuple[TradeTape, GroundTruth]:
    """Full synthetic market of `config`: sizes, packages and the merged tape."""
    ids = firm_ids(config.n_firms)
    sizes = gen_firm_sizes(config.n_firms, config.zipf_exponent, config.seed)
    planned = {
        (firm_id, stock_id): gen_packages(size, config, config.seed, key=(firm_id, stock_id))
        for firm_id, size in zip(ids, sizes)
        for stock_id in config.stocks
    }
    tape, truth = emit_tape(planned, config, config.seed)
    truth = truth.model_copy(
        update={"firm_sizes": {firm_id: float(s) for firm_id, s in zip(ids, sizes)}}
    )
    State.logger.info(
        f"Synthesized {len(tape)} trades from {len(truth.packages)} packages "
        f"of {config.n_firms} firms in {len(config.stocks)} stock(s)"
    )
    return tape, truth
