import json
import math

import numpy as np
import pytest

from patchscale.config.settings import Settings
from patchscale.core.errors import DataError
from patchscale.core.patches import to_directional
from patchscale.enums.enums import PatchDirection
from patchscale.schema.patch import Patch
from patchscale.schema.segmentation import Segmentation
from patchscale.services.worker_pool import WorkerPool
from patchscale.utils import exporters
from patchscale.utils.rng import derive_seed, rng_for


def test_streams_are_reproducible_and_independent():
    first = rng_for(7, "F0001", "SYN").standard_normal(5)

    assert np.array_equal(first, rng_for(7, "F0001", "SYN").standard_normal(5))
    assert not np.array_equal(first, rng_for(7, "F0002", "SYN").standard_normal(5))
    assert not np.array_equal(first, rng_for(8, "F0001", "SYN").standard_normal(5))


def test_derived_seeds_are_stable_integers():
    seed = derive_seed(20010101, "tail", "SYN", "V_m")

    assert seed == derive_seed(20010101, "tail", "SYN", "V_m")
    assert seed != derive_seed(20010101, "tail", "SYN", "T")
    assert 0 <= seed < 2**32


@pytest.mark.parametrize("jobs", [1, 2])
def test_worker_pool_keeps_submission_order(jobs):
    items = list(range(-20, 20))

    assert WorkerPool(jobs, progress=False).map(abs, items) == [abs(i) for i in items]


def test_worker_pool_rejects_zero_jobs():
    with pytest.raises(ValueError):
        WorkerPool(0)


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("PATCHSCALE_JOBS", "3")
    monkeypatch.setenv("PATCHSCALE_SEED", "42")

    settings = Settings()

    assert (settings.jobs, settings.seed) == (3, 42)


def test_json_artifacts_are_sorted_and_drop_non_finite_values(tmp_path):
    path = exporters.write_json({"b": math.inf, "a": [1.5, math.nan]}, tmp_path / "x" / "a.json")

    assert path.read_text() == json.dumps({"a": [1.5, None], "b": None}, indent=2) + "\n"
    assert exporters.read_json(path) == {"a": [1.5, None], "b": None}


def test_csv_floats_round_trip_exactly(tmp_path):
    values = [0.1 + 0.2, 1 / 3, 166.386, 1e-300]

    exporters.write_csv([[v] for v in values], ["x"], tmp_path / "x.csv")

    assert exporters.read_csv(tmp_path / "x.csv")["x"].tolist() == values


def test_missing_artifact_is_a_data_error(tmp_path):
    with pytest.raises(DataError, match="missing artifact"):
        exporters.read_json(tmp_path / "nope.json")


def test_segmentations_round_trip_with_withdrawn_cuts(tmp_path):
    segmentations = [
        Segmentation(firm_id="F1", stock_id="TEF", threshold=0.95, boundaries=(0, 5, 9), withdrawn=(3,)),
        Segmentation(firm_id="F2", stock_id="TEF", boundaries=(0,)),
    ]

    path = exporters.write_segmentations(segmentations, tmp_path / "segmentations.json")

    assert exporters.read_segmentations(path) == segmentations


def test_corrupt_segmentation_artifact_is_a_data_error(tmp_path):
    path = exporters.write_json([{"boundaries": [0, 4, 2]}], tmp_path / "segmentations.json")

    with pytest.raises(DataError, match="invalid segmentation"):
        exporters.read_segmentations(path)


def test_patch_file_leads_with_the_published_columns(tmp_path):
    patch = Patch(
        firm_id="F1", stock_id="TEF", start=0, end=12, V_b=90.0, V_s=10.0, V=100.0,
        n_buy=10, n_sell=2, t_first=5, t_last=65,
    )
    row = exporters.patch_row(patch, PatchDirection.BUY, to_directional(patch, PatchDirection.BUY))

    path = exporters.write_patches([row], tmp_path / "patches.csv")

    header, line = path.read_text().splitlines()
    assert header.startswith("firm_id,stock_id,start,end,direction,T,N_m,V_m,V_b,V_s,")
    assert line.startswith("F1,TEF,0,12,Buy,60,10,90.0,90.0,10.0,")
    assert exporters.read_patches(path) == [(patch, PatchDirection.BUY)]
