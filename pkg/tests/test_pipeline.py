import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from main import main
from patchscale.config import constant
from patchscale.core import pipeline
from patchscale.core.errors import DataError, NumericalError, PipelineStageError
from patchscale.enums.enums import Stage
from patchscale.schema.run_config import RunConfig
from patchscale.schema.segmentation import Segmentation
from patchscale.schema.trade import SignedSeries
from patchscale.utils import exporters

FAST = ["--bootstrap-samples", "200"]


def _write_tape(path, rows):
    path.write_text("timestamp,firm_id,stock_id,side,value\n" + "".join(r + "\n" for r in rows))
    return path


def _small_run(output_dir, seed=5) -> RunConfig:
    return RunConfig(synth="small", output_dir=output_dir, seed=seed, bootstrap_samples=200)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    output_dir = tmp_path_factory.mktemp("small")
    report = pipeline.run_pipeline(_small_run(output_dir))
    return output_dir, report


def test_small_preset_populates_every_table_row(small_run):
    output_dir, report = small_run
    stock = report.stocks["SYN"]

    assert stock.status == "ok"
    assert stock.patch_counts["directional"] > 0
    for variable in ("T", "N_m", "V_m"):
        assert stock.tail_fits[variable]["convention"] == "ccdf"
        assert stock.tail_fits[variable]["zeta"] > 0
    assert stock.allometry["status"] == "ok"
    assert set(stock.allometry["bivariate"]["ci95s"]) == {"g1", "g2", "g3"}
    table = pd.read_csv(output_dir / pipeline.TABLE_SUMMARY)
    assert len(table) == 9
    assert set(table["row"]) >= {"zeta_V_m", "g1", "lognormal_N_m"}


def test_every_artifact_is_written(small_run):
    output_dir, _ = small_run

    for name in (
        pipeline.TAPE,
        pipeline.GROUND_TRUTH,
        pipeline.TRADES,
        pipeline.FIRMS,
        pipeline.SEGMENTATIONS,
        pipeline.PATCHES,
        pipeline.TAIL_FITS,
        pipeline.ALLOMETRY,
        pipeline.PER_FIRM_EXPONENTS,
        pipeline.LOGNORMALITY,
        pipeline.LOGNORMALITY_SUMMARY,
        pipeline.REPORT,
        pipeline.TABLE_SUMMARY,
    ):
        assert (output_dir / name).is_file(), name
    assert not (output_dir / pipeline.FAILED).exists()


def test_report_is_internally_consistent(small_run):
    output_dir, report = small_run
    stock = report.stocks["SYN"]
    patches = pd.read_csv(output_dir / pipeline.PATCHES)

    tri = stock.allometry["trivariate"]
    assert abs(tri["g1"] - tri["g2"] * tri["g3"]) <= 1e-12
    assert report.totals["patches"] == len(patches)
    counts = stock.patch_counts
    assert counts["total"] == counts["directional"] + counts["non_directional"] + counts["below_min_trades"]
    on_disk = json.loads((output_dir / pipeline.REPORT).read_text())
    assert on_disk["stocks"]["SYN"]["patch_counts"] == counts
    assert on_disk["schema_version"] == 1


def test_segmentations_tile_every_series(small_run):
    output_dir, _ = small_run
    segmentations = json.loads((output_dir / pipeline.SEGMENTATIONS).read_text())
    trades = pd.read_csv(output_dir / pipeline.TRADES, dtype={"firm_id": str, "stock_id": str})
    lengths = trades.groupby(["firm_id", "stock_id"]).size()

    assert len(segmentations) == len(lengths)
    for seg in segmentations:
        assert seg["boundaries"][0] == 0
        assert seg["boundaries"][-1] == lengths[(seg["firm_id"], seg["stock_id"])]
        assert seg["threshold"] == 0.99


def test_plot_data_files(small_run):
    output_dir, _ = small_run
    plots = output_dir / pipeline.PLOTS

    assert sorted(p.name for p in plots.glob("ccdf_*")) == [
        "ccdf_N_m_SYN.csv",
        "ccdf_T_SYN.csv",
        "ccdf_V_m_SYN.csv",
    ]
    scatter = pd.read_csv(plots / "scatter_g1_SYN.csv")
    assert list(scatter.columns) == ["log_x", "log_y"]
    ccdf = pd.read_csv(plots / "ccdf_V_m_SYN.csv")
    assert ccdf["ccdf"].iloc[0] == 1.0
    assert ccdf["x"].is_monotonic_increasing


def test_inventory_files_follow_the_segmentation(small_run):
    output_dir, _ = small_run
    files = sorted((output_dir / pipeline.PLOTS).glob("inventory_*_SYN.csv"))
    segmentations = {
        s.firm_id: s for s in exporters.read_segmentations(output_dir / pipeline.SEGMENTATIONS)
    }
    trades = pd.read_csv(output_dir / pipeline.TRADES, dtype={"firm_id": str, "stock_id": str})

    assert 1 <= len(files) <= constant.INVENTORY_FIRMS
    for path in files:
        firm_id = path.name.removeprefix("inventory_").removesuffix("_SYN.csv")
        frame = pd.read_csv(path)
        seg = segmentations[firm_id]
        own = trades[(trades["firm_id"] == firm_id) & (trades["stock_id"] == "SYN")]
        signed = np.where(own["side"] == "B", own["value"], -own["value"]).sum()

        assert list(frame.columns) == ["timestamp", "inventory", "patch", "direction"]
        assert len(frame) == seg.boundaries[-1]
        assert frame["patch"].is_monotonic_increasing
        assert frame["patch"].iloc[-1] == seg.n_segments - 1
        assert frame["inventory"].iloc[-1] == pytest.approx(signed)
        assert set(frame["direction"]) <= {"Buy", "Sell", "NonDirectional"}


def test_inventory_rows_label_each_trade_with_its_patch():
    series = SignedSeries("F", "S", np.array([1, 2, 3, 4]), np.array([5.0, 1.0, -2.0, -3.0]))
    seg = Segmentation(firm_id="F", stock_id="S", boundaries=(0, 2, 4))

    assert pipeline.inventory_rows(series, seg) == [
        [1, 5.0, 0, "Buy"],
        [2, 6.0, 0, "Buy"],
        [3, 4.0, 1, "Sell"],
        [4, 1.0, 1, "Sell"],
    ]
    with pytest.raises(DataError):
        pipeline.inventory_rows(series, Segmentation(boundaries=(0, 3)))


def test_principal_axis_passes_through_centroid(small_run):
    output_dir, _ = small_run
    bivariate = json.loads((output_dir / pipeline.ALLOMETRY).read_text())["SYN"]["bivariate"]

    for g in ("g1", "g2", "g3"):
        (x0, y0), (x1, y1) = pd.read_csv(output_dir / pipeline.PLOTS / f"axis_{g}_SYN.csv").to_numpy()
        cx, cy = bivariate["centroids"][g]
        assert (y1 - y0) / (x1 - x0) == pytest.approx(bivariate[g])
        assert y0 + (cx - x0) * (y1 - y0) / (x1 - x0) == pytest.approx(cy)


def test_plot_data_needs_pipeline_artifacts(tmp_path):
    with pytest.raises(DataError, match="patches.csv"):
        pipeline.emit_plot_data(tmp_path)


def test_same_seed_gives_byte_identical_report(small_run, tmp_path):
    output_dir, _ = small_run

    pipeline.run_pipeline(_small_run(tmp_path))

    for name in (pipeline.REPORT, pipeline.TABLE_SUMMARY, pipeline.PATCHES):
        assert (tmp_path / name).read_bytes() == (output_dir / name).read_bytes()


def test_stages_rerun_from_artifacts(small_run, tmp_path):
    output_dir, _ = small_run
    common = ["--synth", "small", "--seed", "5", "--output-dir", str(tmp_path), *FAST]

    for stage in ("synth", "ingest", "segment", "analyze", "report"):
        assert main([stage, *common]) == 0

    assert (tmp_path / pipeline.REPORT).read_bytes() == (output_dir / pipeline.REPORT).read_bytes()


def test_jobs_do_not_change_results(small_run, tmp_path):
    output_dir, _ = small_run

    config = _small_run(tmp_path).model_copy(update={"jobs": 2})
    pipeline.run_pipeline(config)

    assert (tmp_path / pipeline.SEGMENTATIONS).read_bytes() == (
        output_dir / pipeline.SEGMENTATIONS
    ).read_bytes()


def test_tape_without_directional_patches_reports_empty(tmp_path):
    tape = _write_tape(
        tmp_path / "tape.csv",
        [f"{1009843200 + i},F01,TEF,{'B' if i % 2 else 'S'},100.0" for i in range(6)],
    )
    out = tmp_path / "out"

    code = main(
        ["all", "--tape", str(tape), "--output-dir", str(out),
         "--min-trades-per-year", "0", "--min-active-days", "0", *FAST]
    )

    assert code == 0
    report = json.loads((out / pipeline.REPORT).read_text())
    stock = report["stocks"]["TEF"]
    assert stock["status"] == "empty"
    assert stock["tail_fits"]["V_m"]["status"] == "empty"
    assert stock["allometry"]["status"] == "empty"
    assert report["totals"]["directional"] == 0


def test_activity_filter_can_drop_every_firm(tmp_path):
    tape = _write_tape(tmp_path / "tape.csv", ["1009843200,F01,TEF,B,10.0"])
    out = tmp_path / "out"

    assert main(["all", "--tape", str(tape), "--output-dir", str(out), *FAST]) == 0

    firms = json.loads((out / pipeline.FIRMS).read_text())
    assert firms["active"] == []
    assert json.loads((out / pipeline.REPORT).read_text())["totals"]["firms"] == 0


def test_bad_tape_is_a_data_error_with_failure_marker(tmp_path):
    tape = _write_tape(tmp_path / "tape.csv", ["1,F01,TEF,B,10.0", "2,F01,TEF,S,-5.0"])
    out = tmp_path / "out"

    assert main(["all", "--tape", str(tape), "--output-dir", str(out)]) == 2

    marker = json.loads((out / pipeline.FAILED).read_text())
    assert marker == {
        "stage": "ingest",
        "error_type": "TradeRejectedError",
        "message": "line 3: non-positive value '-5.0'",
    }


def test_missing_upstream_artifact_names_the_stage(tmp_path):
    config = RunConfig(output_dir=tmp_path)

    with pytest.raises(PipelineStageError) as excinfo:
        pipeline.Pipeline(config).run_stage(Stage.ANALYZE)

    assert excinfo.value.stage == "analyze"
    assert isinstance(excinfo.value.cause, DataError)
    assert json.loads((tmp_path / pipeline.FAILED).read_text())["error_type"] == "DataError"


def test_successful_stage_clears_a_stale_marker(small_run, tmp_path):
    output_dir, _ = small_run
    (tmp_path / pipeline.PATCHES).write_bytes((output_dir / pipeline.PATCHES).read_bytes())
    (tmp_path / pipeline.FAILED).write_text("{}")

    pipeline.Pipeline(_small_run(tmp_path)).run_stage(Stage.ANALYZE)

    assert not (tmp_path / pipeline.FAILED).exists()


def test_numerical_failure_exits_three(tmp_path, monkeypatch):
    def degenerate(config):
        raise NumericalError("degenerate covariance: the points have no spread")

    monkeypatch.setitem(pipeline.STAGES, Stage.SYNTH, degenerate)

    assert main(["synth", "--synth", "small", "--output-dir", str(tmp_path)]) == 3
    assert json.loads((tmp_path / pipeline.FAILED).read_text())["error_type"] == "NumericalError"


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as no_command:
        main([])
    with pytest.raises(SystemExit) as no_input:
        main(["all", "--output-dir", str(tmp_path)])

    assert no_command.value.code == 1
    assert no_input.value.code == 1
    assert main(["report", "--threshold", "1.5", "--output-dir", str(tmp_path)]) == 1
    assert main(["ingest", "--tape", str(tmp_path / "missing.csv")]) == 1


def test_run_config_precedence(tmp_path):
    document = tmp_path / "run.json"
    document.write_text(json.dumps({"theta": 0.85, "seed": 3, "k_policy": "FRACTION:0.2"}))

    config = RunConfig.from_sources(document, {"seed": 1, "jobs": 4}, seed=9, theta=None)

    assert (config.seed, config.theta, config.jobs) == (9, 0.85, 4)
    assert config.k_policy == "fraction:0.2"
    assert "output_dir" not in config.export()


def test_run_config_rejects_two_inputs(tmp_path):
    tape = _write_tape(tmp_path / "tape.csv", [])

    with pytest.raises(ValidationError):
        RunConfig(tape=tape, synth="small")
    with pytest.raises(ValidationError):
        RunConfig(synth="no-such-preset")
    with pytest.raises(ValidationError):
        RunConfig(bootstrap_samples=50)


def test_full_run_plans_synth_only_for_synthetic_markets(tmp_path):
    tape = _write_tape(tmp_path / "tape.csv", [])

    planned = pipeline.Pipeline(RunConfig(tape=tape, output_dir=tmp_path)).stages

    assert planned == [Stage.INGEST, Stage.SEGMENT, Stage.ANALYZE, Stage.REPORT]
    assert pipeline.Pipeline(_small_run(tmp_path)).stages == [Stage.SYNTH, *planned]
    with pytest.raises(DataError):
        pipeline.Pipeline(RunConfig(output_dir=tmp_path)).run()


@pytest.fixture(scope="module")
def paper_like(tmp_path_factory):
    """Full paper-like runs, one per seed, built on first use."""
    runs = {}

    def run(seed):
        if seed not in runs:
            output_dir = tmp_path_factory.mktemp(f"paper_like_{seed}")
            config = RunConfig(
                synth="paper-like", output_dir=output_dir, seed=seed, bootstrap_samples=200
            )
            runs[seed] = (config, pipeline.run_pipeline(config).stocks["SYN"])
        return runs[seed]

    return run


@pytest.mark.slow
@pytest.mark.parametrize("seed", [2001, 7, 42])
def test_paper_like_market_reproduces_the_heterogeneity_mechanism(paper_like, seed):
    _, stock = paper_like(seed)

    lognormality = stock.lognormality
    assert lognormality["N_m"]["per_firm_percentage"] >= 80
    assert lognormality["V_m"]["per_firm_percentage"] >= 80
    assert all(lognormality[v]["pooled_reject"] for v in ("T", "N_m", "V_m"))

    for variable, target in (("V_m", 2.0), ("N_m", 1.8), ("T", 1.3)):
        assert abs(stock.tail_fits[variable]["zeta"] - target) <= 0.3, variable

    bivariate = stock.allometry["bivariate"]
    for g, target in (("g1", 1.1), ("g2", 1.9), ("g3", 0.66)):
        assert abs(bivariate[g] - target) <= 0.2, g


def _half_width(ci):
    low, high = ci
    return (high - low) / 2


@pytest.mark.slow
def test_exponents_are_robust_to_the_directional_threshold(paper_like, tmp_path):
    config, base = paper_like(2001)
    patches = (config.output_dir / pipeline.PATCHES).read_bytes()
    base_count = base.patch_counts["directional"]

    for theta in (0.85, 0.95):
        output_dir = tmp_path / f"theta_{theta}"
        output_dir.mkdir()
        (output_dir / pipeline.PATCHES).write_bytes(patches)
        results = pipeline.analyze_stage(
            config.model_copy(update={"theta": theta, "output_dir": output_dir})
        )

        directional = pipeline.directional_by_stock(
            pipeline.load_patches(output_dir), theta, config.min_patch_trades
        )["SYN"]
        assert len(directional) >= 0.9 * base_count, theta
        for variable in ("T", "N_m", "V_m"):
            fit = results["tail_fits"]["SYN"][variable]
            reference = base.tail_fits[variable]
            shift = abs(fit["zeta"] - reference["zeta"])
            assert shift <= _half_width(reference["ci95"]), (theta, variable)
        bivariate = results["allometry"]["SYN"]["bivariate"]
        for g in ("g1", "g2", "g3"):
            reference = base.allometry["bivariate"]
            shift = abs(bivariate[g] - reference[g])
            assert shift <= _half_width(reference["ci95s"][g]), (theta, g)
