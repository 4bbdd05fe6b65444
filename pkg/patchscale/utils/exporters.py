"""JSON and CSV artifact writers and readers for the pipeline stages.

JSON is written with sorted keys and a trailing newline and CSV with LF line
endings and round-trip floats, so equal inputs give byte-identical files.
"""

import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import pandas as pd

from patchscale.core.errors import DataError
from patchscale.enums.enums import PatchDirection
from patchscale.schema.patch import DirectionalPatch, Patch
from patchscale.schema.segmentation import Segmentation

PATCH_COLUMNS = [
    "firm_id",
    "stock_id",
    "start",
    "end",
    "direction",
    "T",
    "N_m",
    "V_m",
    "V_b",
    "V_s",
    # extras needed to rebuild the patch
    "V",
    "n_buy",
    "n_sell",
    "t_first",
    "t_last",
]


def require(path: Path) -> Path:
    if not Path(path).is_file():
        raise DataError(f"missing artifact {path}")
    return Path(path)


def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_json(data: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(data), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(require(path).read_text(encoding="utf-8"))


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return "" if value is None else value


def write_csv(rows: Iterable[Sequence[Any]], columns: Sequence[str], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([[_cell(v) for v in row] for row in rows], columns=list(columns))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def read_csv(path: Path, text_columns: Sequence[str] = ()) -> pd.DataFrame:
    return pd.read_csv(
        require(path),
        float_precision="round_trip",
        dtype={c: str for c in text_columns},
    )


def write_segmentations(segmentations: Iterable[Segmentation], path: Path) -> Path:
    return write_json([s.to_export() for s in segmentations], path)


def read_segmentations(path: Path) -> list[Segmentation]:
    try:
        return [Segmentation(**item) for item in read_json(path)]
    except (TypeError, ValueError) as e:
        raise DataError(f"invalid segmentation artifact {path}: {e}") from e


def patch_row(patch: Patch, direction: PatchDirection, directional: DirectionalPatch | None):
    """Export row of one patch; T, N_m and V_m stay empty unless it is directional."""
    return [
        patch.firm_id,
        patch.stock_id,
        patch.start,
        patch.end,
        direction.value,
        directional.T if directional else None,
        directional.N_m if directional else None,
        directional.V_m if directional else None,
        patch.V_b,
        patch.V_s,
        patch.V,
        patch.n_buy,
        patch.n_sell,
        patch.t_first,
        patch.t_last,
    ]


def write_patches(rows: Iterable[list], path: Path) -> Path:
    return write_csv(rows, PATCH_COLUMNS, path)


def read_patches(path: Path) -> list[tuple[Patch, PatchDirection]]:
    frame = read_csv(path, text_columns=("firm_id", "stock_id", "direction"))
    if list(frame.columns) != PATCH_COLUMNS:
        raise DataError(f"{path}: expected columns {','.join(PATCH_COLUMNS)}")
    out = []
    try:
        for row in frame.itertuples(index=False):
            patch = Patch(
                firm_id=row.firm_id,
                stock_id=row.stock_id,
                start=int(row.start),
                end=int(row.end),
                V_b=float(row.V_b),
                V_s=float(row.V_s),
                V=float(row.V),
                n_buy=int(row.n_buy),
                n_sell=int(row.n_sell),
                t_first=int(row.t_first),
                t_last=int(row.t_last),
            )
            out.append((patch, PatchDirection(row.direction)))
    except (TypeError, ValueError) as e:
        raise DataError(f"invalid patch artifact {path}: {e}") from e
    return out
