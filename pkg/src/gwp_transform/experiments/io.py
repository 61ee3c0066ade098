"""Deterministic CSV output: shortest round-trip floats, '.' separator, '\\n' line endings."""
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from ..core.errors import ConfigError
from ..reconstruction import ErrorSweepRecord

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "rule",
    "N",
    "M",
    "gamma",
    "eps",
    "L_p",
    "sup_error",
    "predicted_bound",
    "wall_time_s",
]


def records_frame(records: Sequence[ErrorSweepRecord]) -> pd.DataFrame:
    rows = [dataclasses.asdict(record) for record in records]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS).astype({"N": "int64", "M": "int64"})


def write_csv(frame: pd.DataFrame, path: Optional[Union[str, Path]] = None) -> None:
    """Write ``frame`` to ``path`` or stdout. Missing values become empty fields."""
    if path is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n", na_rep="")
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", na_rep="")
    logger.info(f"Wrote {len(frame)} rows to {path}")


def read_records(path: Union[str, Path]) -> List[ErrorSweepRecord]:
    """Sweep records back from a CSV written by ``write_csv``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Sweep file not found: {path}")
    frame = pd.read_csv(path)
    missing = [column for column in SWEEP_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigError(f"missing columns {missing}", str(path))
    frame = frame.astype(object).where(frame.notna(), None)
    return [
        ErrorSweepRecord(
            rule=str(row["rule"]),
            N=int(row["N"]),
            M=int(row["M"]),
            gamma=float(row["gamma"]),
            eps=float(row["eps"]),
            L_p=None if row["L_p"] is None else float(row["L_p"]),
            sup_error=float(row["sup_error"]),
            predicted_bound=None if row["predicted_bound"] is None else float(row["predicted_bound"]),
            wall_time_s=None if row["wall_time_s"] is None else float(row["wall_time_s"]),
        )
        for row in frame.to_dict("records")
    ]
