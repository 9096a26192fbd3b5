import re
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.errors import DataError, DatasetParseError
from app.core.logger import logger
from app.module.fingerprints.dataset import FingerprintDataset
from app.module.fingerprints.schemas import MAX_DBM, SENTINEL_DBM

META_COLUMNS = ["device_id", "region_id", "rp_id", "x", "y", "z", "time_index"]
INT_COLUMNS = ["region_id", "rp_id", "time_index"]

_PANDAS_LINE = re.compile(r"line (\d+)")


def rss_columns(n_aps: int) -> list[str]:
    return [f"rssi_{j}" for j in range(n_aps)]


def _format_float(value: float) -> str:
    return "-100" if value == SENTINEL_DBM else repr(float(value))


def dataset_to_frame(dataset: FingerprintDataset) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "device_id": dataset.device_ids.astype(str),
            "region_id": dataset.region_ids.astype(np.int64),
            "rp_id": dataset.rp_ids.astype(np.int64),
            "x": dataset.coords[:, 0],
            "y": dataset.coords[:, 1],
            "z": dataset.coords[:, 2],
            "time_index": dataset.time_index.astype(np.int64),
        }
    )
    rss = pd.DataFrame(dataset.rss, columns=rss_columns(dataset.n_aps))
    return pd.concat([frame, rss], axis=1)


def save_dataset_csv(dataset: FingerprintDataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_to_frame(dataset).to_csv(path, index=False, float_format=_format_float, lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(dataset)} fingerprints ({dataset.n_aps} APs) to {path}")
    return path


def _check_header(columns: list[str]) -> int:
    if columns[: len(META_COLUMNS)] != META_COLUMNS:
        raise DatasetParseError(f"header must start with {','.join(META_COLUMNS)}", line=1)
    rss = columns[len(META_COLUMNS) :]
    if not rss or rss != rss_columns(len(rss)):
        raise DatasetParseError("header must continue with rssi_0,...,rssi_{D-1}", line=1)
    return len(rss)


def _read_fields(path: Path) -> pd.DataFrame:
    """Every cell as text, header included, so a too-wide row fails on its own line."""
    try:
        return pd.read_csv(path, header=None, index_col=False, dtype=str, keep_default_na=False, na_values=[""], encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DatasetParseError("empty file, header expected", line=1) from None
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise DatasetParseError("wrong column count", line=int(match.group(1)) if match else None, details=str(e)) from None


def load_dataset_csv(path: Path) -> FingerprintDataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Dataset file not found: {path}")
    raw = _read_fields(path)

    header = raw.iloc[0]
    if header.isna().any():
        raise DatasetParseError("header has empty column names", line=1)
    n_aps = _check_header(header.tolist())
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header.tolist()

    text = frame.drop(columns="device_id")
    numeric = text.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1) | frame["device_id"].isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DatasetParseError("missing or non-numeric field", line=row + 2)
    # str -> float64 through numpy keeps the shortest-repr round trip exact
    values = text.to_numpy(dtype=object).astype(np.float64)
    numeric = pd.DataFrame(values, columns=text.columns)
    for column in INT_COLUMNS:
        column_values = numeric[column].to_numpy()
        fractional = column_values != np.round(column_values)
        if fractional.any():
            raise DatasetParseError(f"{column} must be an integer", line=int(np.flatnonzero(fractional)[0]) + 2)
    rss = numeric[rss_columns(n_aps)].to_numpy(dtype=np.float64)
    out_of_range = (rss < SENTINEL_DBM).any(axis=1) | (rss > MAX_DBM).any(axis=1)
    if out_of_range.any():
        raise DatasetParseError(f"RSS outside [{SENTINEL_DBM:g}, {MAX_DBM:g}] dBm", line=int(np.flatnonzero(out_of_range)[0]) + 2)

    dataset = FingerprintDataset(
        rss=rss,
        device_ids=frame["device_id"].to_numpy(dtype=object),
        region_ids=numeric["region_id"].to_numpy().astype(np.int64),
        rp_ids=numeric["rp_id"].to_numpy().astype(np.int64),
        coords=numeric[["x", "y", "z"]].to_numpy(dtype=np.float64),
        time_index=numeric["time_index"].to_numpy().astype(np.int64),
    )
    logger.info(f"Loaded {len(dataset)} fingerprints ({n_aps} APs) from {path}")
    return dataset
