"""Stage orchestration: synth, ingest, segment, analyze, report.

Every stage reads its inputs from and writes its outputs to the run's
output directory, so any stage can be re-run on its own.
"""

from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core import allometry, lognorm, tail_stats
from patchscale.core.errors import (
    DataError,
    InsufficientDataError,
    NumericalError,
    PipelineStageError,
)
from patchscale.core.market_data import (
    build_all_series,
    filter_active_firms,
    firm_activity,
    inventory,
    parse_trades,
    restrict_to_firms,
    write_trades,
)
from patchscale.core.patches import (
    classify,
    cut_patches,
    group_by_firm,
    patch_summary,
    to_directional,
    variable_values,
)
from patchscale.core.segmenter import SignificanceModel, segment_key
from patchscale.core.synth import generate_market
from patchscale.enums.enums import KPolicyKind, PatchDirection, PatchVariable, Stage
from patchscale.schema.patch import DirectionalPatch, Patch
from patchscale.schema.run_config import Report, RunConfig, StockReport
from patchscale.schema.segmentation import Segmentation
from patchscale.schema.synth import SynthConfig
from patchscale.schema.trade import SignedSeries
from patchscale.services.worker_pool import WorkerPool
from patchscale.utils import exporters
from patchscale.utils.rng import derive_seed

TAPE = "tape.csv"
GROUND_TRUTH = "ground_truth.json"
TRADES = "trades.csv"
FIRMS = "firms.json"
SEGMENTATIONS = "segmentations.json"
PATCHES = "patches.csv"
TAIL_FITS = "tail_fits.json"
ALLOMETRY = "allometry.json"
PER_FIRM_EXPONENTS = "per_firm_exponents.csv"
LOGNORMALITY = "lognormality.csv"
LOGNORMALITY_SUMMARY = "lognormality_summary.json"
REPORT = "report.json"
TABLE_SUMMARY = "table_summary.csv"
PLOTS = "plots"
FAILED = "_FAILED.json"

VARIABLES = tuple(PatchVariable)


def _insufficient(e: Exception, **extra) -> dict:
    return {"status": "insufficient_data", "reason": str(e), **extra}


def synth_stage(config: RunConfig) -> Path:
    if config.synth is None:
        raise ValueError("the synth stage needs a synth preset or config")
    synth_config = SynthConfig.load(config.synth, seed=config.seed)
    tape, truth = generate_market(synth_config)
    out = config.output_dir
    write_trades(tape, out / TAPE)
    exporters.write_json(
        {"config": synth_config.model_dump(mode="json"), **truth.model_dump(mode="json")},
        out / GROUND_TRUTH,
    )
    return out / TAPE


def ingest_stage(config: RunConfig) -> Path:
    """Parse the tape, apply the activity filter and keep the active firms' trades."""
    source = config.tape if config.tape is not None else exporters.require(config.output_dir / TAPE)
    tape = parse_trades(source)
    activity = firm_activity(tape)
    if config.synthetic and not config.filter_synthetic:
        active = set(activity)
        State.logger.info(f"Activity filter skipped for synthetic tape ({len(active)} firms)")
    else:
        active = filter_active_firms(
            tape,
            config.min_trades_per_year,
            config.min_active_days,
            config.activity_mode,
            config.activity_years,
        )
    kept = restrict_to_firms(tape, active)
    write_trades(kept, config.output_dir / TRADES)
    exporters.write_json(
        {
            "active": sorted(active),
            "activity": {
                firm_id: {
                    "trades_per_year": a.trades_per_year,
                    "active_days_per_year": a.active_days_per_year,
                }
                for firm_id, a in sorted(activity.items())
            },
            "min_trades_per_year": config.min_trades_per_year,
            "min_active_days": config.min_active_days,
            "activity_mode": config.activity_mode.value,
            "activity_years": config.activity_years.value,
        },
        config.output_dir / FIRMS,
    )
    State.logger.info(f"Ingested {len(tape)} trades, kept {len(kept)} of {len(activity)} firms")
    return config.output_dir / TRADES


def segment_stage(config: RunConfig) -> Path:
    """Segment every (firm, stock) series and export segmentations and patches."""
    out = config.output_dir
    tape = parse_trades(exporters.require(out / TRADES))
    series = build_all_series(tape)
    model = SignificanceModel(
        mode=config.significance_mode,
        form=config.t_form,
        mc_trials=config.mc_trials,
        seed=derive_seed(config.seed, "segment"),
    )
    items = [
        (s.firm_id, s.stock_id, s.timestamps, s.values, config.threshold, model)
        for s in series.values()
    ]
    State.logger.info(f"Segmenting {len(items)} series with {config.jobs} worker(s)")
    results = dict(WorkerPool(config.jobs).map(segment_key, items, desc="segmenting"))

    segmentations, rows = [], []
    for key, s in series.items():
        seg = results[key]
        segmentations.append(seg)
        for patch in cut_patches(s, seg):
            direction = classify(patch, config.theta)
            directional = None
            if direction is not PatchDirection.NON_DIRECTIONAL:
                directional = to_directional(patch, direction)
            rows.append(exporters.patch_row(patch, direction, directional))
    exporters.write_segmentations(segmentations, out / SEGMENTATIONS)
    exporters.write_patches(rows, out / PATCHES)
    State.logger.info(
        f"{sum(seg.n_segments for seg in segmentations)} patches from {len(segmentations)} series"
    )
    return out / PATCHES


def load_patches(output_dir: Path) -> list[Patch]:
    return [patch for patch, _ in exporters.read_patches(Path(output_dir) / PATCHES)]


def directional_by_stock(
    patches: Iterable[Patch], theta: float, min_trades: int
) -> dict[str, list[DirectionalPatch]]:
    out: dict[str, list[DirectionalPatch]] = {}
    for patch in patches:
        if patch.n_trades < min_trades:
            continue
        direction = classify(patch, theta)
        if direction is not PatchDirection.NON_DIRECTIONAL:
            out.setdefault(patch.stock_id, []).append(to_directional(patch, direction))
    return dict(sorted(out.items()))


def _stocks(patches: list[Patch]) -> list[str]:
    return sorted({p.stock_id for p in patches})


def _tail_fit(values: np.ndarray, variable: PatchVariable, config: RunConfig, seed: int) -> dict:
    """Hill fit of one variable, or a marker when the sample cannot support one.

    An automatic k on fewer than MIN_AUTO_K_SAMPLE values falls back to the
    fraction policy.
    """
    values = values[values > 0]
    policy = tail_stats.KPolicy.parse(config.k_policy)
    if policy.kind is KPolicyKind.AUTO and values.size < constant.MIN_AUTO_K_SAMPLE:
        policy = tail_stats.KPolicy(KPolicyKind.FRACTION, constant.FALLBACK_K_FRACTION)
        State.logger.warning(
            f"{variable.value}: n={values.size} too small for automatic k, using {policy}"
        )
    try:
        fit = tail_stats.fit_tail(
            values, variable, policy, config.ci_method, config.bootstrap_samples, seed
        )
    except (NumericalError, ValueError) as e:
        State.logger.warning(f"No tail fit for {variable.value}: {e}")
        return _insufficient(e, n=int(values.size))
    return {**fit.to_export(), "k_policy": str(policy)}


def _allometry(patches: list[DirectionalPatch], config: RunConfig, seed: int) -> tuple[dict, dict]:
    points, skipped = allometry.log_points(patches)
    per_firm = allometry.per_firm_exponents(group_by_firm(patches), config.min_firm_patches)
    section = {
        "skipped_zero_coordinate": skipped,
        "per_firm_dispersion": allometry.exponent_dispersion(per_firm),
        "firms_with_exponents": len(per_firm),
    }
    if points.shape[0] < config.min_firm_patches:
        e = InsufficientDataError(
            f"{points.shape[0]} usable patches, need {config.min_firm_patches} for allometry"
        )
        State.logger.warning(str(e))
        return {**section, **_insufficient(e, n_points=int(points.shape[0]))}, per_firm
    bi = allometry.bivariate_fit(points, config.bootstrap_samples, seed)
    tri = allometry.trivariate_fit(points, config.bootstrap_samples, seed)
    section.update(
        {
            "status": "ok",
            "bivariate": bi.to_export(),
            "trivariate": tri.to_export(),
            "bi_tri_discrepancy": {g: getattr(bi, g) - getattr(tri, g) for g in ("g1", "g2", "g3")},
            "diagnostics": allometry.diagnostic_slopes(points),
        }
    )
    return section, per_firm


def _lognormality(patches: list[DirectionalPatch], config: RunConfig) -> tuple[dict, list]:
    grouped = group_by_firm(patches)
    section, rows = {}, []
    for variable in VARIABLES:
        try:
            summary = lognorm.per_firm_lognormality(grouped, variable, config.min_firm_patches)
            pooled = lognorm.pooled_lognormality(patches, variable)
        except (NumericalError, ValueError) as e:
            State.logger.warning(f"No lognormality test for {variable.value}: {e}")
            section[variable.value] = _insufficient(e)
            continue
        section[variable.value] = {"status": "ok", **lognorm.decompose(summary, pooled)}
        rows.extend(summary.results)
    return section, rows


def analyze_stage(config: RunConfig) -> dict[str, dict]:
    """Tail fits, allometry and lognormality per stock from the exported patches."""
    out = config.output_dir
    patches = load_patches(out)
    by_stock = directional_by_stock(patches, config.theta, config.min_patch_trades)
    tail_fits, allometric, lognormal = {}, {}, {}
    exponent_rows, lognormal_rows = [], []

    for stock_id in _stocks(patches):
        directional = by_stock.get(stock_id, [])
        if not directional:
            State.logger.warning(f"{stock_id}: no directional patches, analysis left empty")
            marker = {"status": "empty", "reason": "no directional patches"}
            tail_fits[stock_id] = {v.value: marker for v in VARIABLES}
            allometric[stock_id] = marker
            lognormal[stock_id] = {v.value: marker for v in VARIABLES}
            continue

        State.logger.info(f"{stock_id}: analysing {len(directional)} directional patches")
        tail_fits[stock_id] = {
            v.value: _tail_fit(
                variable_values(directional, v.value),
                v,
                config,
                derive_seed(config.seed, "tail", stock_id, v.value),
            )
            for v in VARIABLES
        }
        allometric[stock_id], per_firm = _allometry(
            directional, config, derive_seed(config.seed, "allometry", stock_id)
        )
        exponent_rows.extend(
            [stock_id, firm_id, e.n_patches, e.g1, e.g2, e.g3] for firm_id, e in per_firm.items()
        )
        lognormal[stock_id], results = _lognormality(directional, config)
        lognormal_rows.extend(
            [stock_id, r.firm_id, r.variable.value, r.n, r.jb_stat, r.critical_value, r.reject]
            for r in results
        )

    exporters.write_json(tail_fits, out / TAIL_FITS)
    exporters.write_json(allometric, out / ALLOMETRY)
    exporters.write_json(lognormal, out / LOGNORMALITY_SUMMARY)
    exporters.write_csv(
        exponent_rows,
        ["stock_id", "firm_id", "n_patches", "g1", "g2", "g3"],
        out / PER_FIRM_EXPONENTS,
    )
    exporters.write_csv(
        lognormal_rows,
        ["stock_id", "firm_id", "variable", "n", "jb_stat", "critical_value", "reject"],
        out / LOGNORMALITY,
    )
    return {"tail_fits": tail_fits, "allometry": allometric, "lognormality": lognormal}


def _table_rows(stock_id: str, stock: StockReport) -> list[list]:
    rows = []
    for variable in VARIABLES:
        fit = stock.tail_fits.get(variable.value, {})
        ci = fit.get("ci95") or [None, None]
        rows.append([stock_id, f"zeta_{variable.value}", fit.get("zeta"), ci[0], ci[1]])
    bi = stock.allometry.get("bivariate", {})
    for g in ("g1", "g2", "g3"):
        ci = bi.get("ci95s", {}).get(g) or [None, None]
        rows.append([stock_id, g, bi.get(g), ci[0], ci[1]])
    for variable in VARIABLES:
        row = stock.lognormality.get(variable.value, {})
        rows.append([stock_id, f"lognormal_{variable.value}", row.get("per_firm_row"), None, None])
    return rows


def report_stage(config: RunConfig) -> Report:
    """Assemble report.json and table_summary.csv from the analysis artifacts."""
    out = config.output_dir
    patches = load_patches(out)
    tail_fits = exporters.read_json(out / TAIL_FITS)
    allometric = exporters.read_json(out / ALLOMETRY)
    lognormal = exporters.read_json(out / LOGNORMALITY_SUMMARY)

    stocks = {}
    for stock_id in _stocks(patches):
        in_stock = [p for p in patches if p.stock_id == stock_id]
        summary = patch_summary(in_stock, config.theta, config.min_patch_trades)
        stock_allometry = allometric.get(stock_id, {})
        stocks[stock_id] = StockReport(
            stock_id=stock_id,
            status="ok" if summary.directional else "empty",
            patch_counts={**summary.to_export(), "firms": len({p.firm_id for p in in_stock})},
            tail_fits=tail_fits.get(stock_id, {}),
            allometry=stock_allometry,
            lognormality=lognormal.get(stock_id, {}),
            diagnostics={
                "non_directional_share": summary.non_directional_share,
                "skipped_zero_coordinate": stock_allometry.get("skipped_zero_coordinate", 0),
                "zero_duration": summary.zero_duration,
                "below_min_trades": summary.below_min_trades,
            },
        )

    report = Report(
        seed=config.seed,
        parameters=config.export(),
        stocks=stocks,
        totals={
            "stocks": len(stocks),
            "patches": len(patches),
            "directional": sum(s.patch_counts["directional"] for s in stocks.values()),
            "firms": len({p.firm_id for p in patches}),
        },
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT).write_text(report.to_json(), encoding="utf-8")
    exporters.write_csv(
        [row for stock_id, s in stocks.items() for row in _table_rows(stock_id, s)],
        ["stock_id", "row", "value", "ci_low", "ci_high"],
        out / TABLE_SUMMARY,
    )
    if config.plots:
        emit_plot_data(out, config.theta, config.min_patch_trades)
    State.logger.info(f"Report written to {out / REPORT}")
    return report


def _axis_line(points: np.ndarray, slope: float, centroid: list[float]) -> list[list[float]]:
    """Endpoints of the principal axis through the centroid, over the x range of the points."""
    cx, cy = centroid
    lo, hi = float(points[:, 0].min()), float(points[:, 0].max())
    return [[lo, cy + slope * (lo - cx)], [hi, cy + slope * (hi - cx)]]


def inventory_rows(
    series: SignedSeries, seg: Segmentation, theta: float = constant.THETA
) -> list[list]:
    """Inventory after each trade, with the index and direction of its patch."""
    try:
        patches = cut_patches(series, seg)
    except ValueError as e:
        raise DataError(f"{series.firm_id}/{series.stock_id}: {e}") from e
    rows = []
    steps = iter(inventory(series))
    for index, patch in enumerate(patches):
        direction = classify(patch, theta).value
        for _ in range(patch.start, patch.end):
            timestamp, level = next(steps)
            rows.append([timestamp, level, index, direction])
    return rows


def emit_plot_data(
    output_dir: Path, theta: float = constant.THETA, min_trades: int = constant.MIN_PATCH_TRADES
) -> list[Path]:
    """Plot-data files per stock.

    CCDFs of T, N_m and V_m, log-log scatters with their principal axes,
    per-firm exponent histograms, and the inventory paths of the
    INVENTORY_FIRMS firms with the most directional patches.
    """
    output_dir = Path(output_dir)
    for name in (PATCHES, ALLOMETRY, PER_FIRM_EXPONENTS, TRADES, SEGMENTATIONS):
        exporters.require(output_dir / name)
    segmentations = {
        (s.firm_id, s.stock_id): s
        for s in exporters.read_segmentations(output_dir / SEGMENTATIONS)
    }
    series = build_all_series(parse_trades(output_dir / TRADES))
    by_stock = directional_by_stock(load_patches(output_dir), theta, min_trades)
    allometric = exporters.read_json(output_dir / ALLOMETRY)
    exponents = exporters.read_csv(
        output_dir / PER_FIRM_EXPONENTS, text_columns=("stock_id", "firm_id")
    )
    written = []

    def _plot(rows, columns, name):
        written.append(exporters.write_csv(rows, columns, output_dir / PLOTS / name))

    for stock_id, directional in by_stock.items():
        for variable in VARIABLES:
            values = variable_values(directional, variable.value)
            values = values[values > 0]
            if values.size:
                _plot(tail_stats.ccdf(values), ["x", "ccdf"], f"ccdf_{variable.value}_{stock_id}.csv")

        points, _ = allometry.log_points(directional)
        bivariate = allometric.get(stock_id, {}).get("bivariate")
        if points.shape[0]:
            for g, (u, v) in constant.ALLOMETRIC_PAIRS.items():
                pair = points[:, [allometry.COLUMNS[u], allometry.COLUMNS[v]]]
                _plot(pair.tolist(), ["log_x", "log_y"], f"scatter_{g}_{stock_id}.csv")
                if bivariate:
                    line = _axis_line(pair, bivariate[g], bivariate["centroids"][g])
                    _plot(line, ["log_x", "log_y"], f"axis_{g}_{stock_id}.csv")

        in_stock = exponents[exponents["stock_id"] == stock_id]
        for g in ("g1", "g2", "g3"):
            values = in_stock[g].to_numpy(dtype=np.float64)
            if values.size == 0:
                continue
            counts, edges = np.histogram(values, bins="auto")
            rows = [[float(a), float(b), int(c)] for a, b, c in zip(edges[:-1], edges[1:], counts)]
            _plot(rows, ["bin_left", "bin_right", "count"], f"hist_{g}_{stock_id}.csv")

        grouped = group_by_firm(directional)
        busiest = sorted(grouped, key=lambda f: (-len(grouped[f]), f))
        for firm_id in busiest[: constant.INVENTORY_FIRMS]:
            key = (firm_id, stock_id)
            if key not in segmentations or key not in series:
                raise DataError(f"no segmented series for {firm_id}/{stock_id}")
            _plot(
                inventory_rows(series[key], segmentations[key], theta),
                ["timestamp", "inventory", "patch", "direction"],
                f"inventory_{firm_id}_{stock_id}.csv",
            )
    State.logger.info(f"Wrote {len(written)} plot-data files to {output_dir / PLOTS}")
    return written


STAGES: dict[Stage, Callable[[RunConfig], object]] = {
    Stage.SYNTH: synth_stage,
    Stage.INGEST: ingest_stage,
    Stage.SEGMENT: segment_stage,
    Stage.ANALYZE: analyze_stage,
    Stage.REPORT: report_stage,
}


class Pipeline:
    """Runs stages of one configured run against its output directory."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = config.output_dir

    def __mark_failed(self, stage: Stage, e: Exception) -> PipelineStageError:
        exporters.write_json(
            {"stage": stage.value, "error_type": type(e).__name__, "message": str(e)},
            self.output_dir / FAILED,
        )
        State.logger.error(f"Stage {stage.value} failed: {e}")
        return PipelineStageError(stage.value, e)

    @property
    def stages(self) -> list[Stage]:
        """Stages of a full run; synth only when the config names a synthetic market."""
        stages = [Stage.SYNTH] if self.config.synthetic else []
        return stages + [Stage.INGEST, Stage.SEGMENT, Stage.ANALYZE, Stage.REPORT]

    def run_stage(self, stage: Stage):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        (self.output_dir / FAILED).unlink(missing_ok=True)
        State.logger.info(f"Stage {stage.value} started")
        try:
            return STAGES[stage](self.config)
        except Exception as e:
            raise self.__mark_failed(stage, e) from e

    def run(self) -> Report:
        if self.config.tape is None and self.config.synth is None:
            raise DataError("a run needs a tape or a synth config")
        report = None
        for stage in self.stages:
            report = self.run_stage(stage)
        return report


def run_pipeline(config: RunConfig) -> Report:
    """All stages in order."""
    return Pipeline(config).run()
