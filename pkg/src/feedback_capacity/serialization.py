import dataclasses
import json
from pathlib import Path
from typing import Any, TextIO, Union

import numpy as np
import pandas as pd

SCHEMA = "feedcap/1"


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, dataclasses and DataFrames into plain JSON types."""
    if isinstance(value, pd.DataFrame):
        return value.to_dict(orient="records")
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dump_json(payload: dict) -> str:
    document = {"schema": SCHEMA}
    document.update(to_jsonable(payload))
    return json.dumps(document, indent=2)


def write_csv(frame: pd.DataFrame, target: Union[str, Path, TextIO]) -> None:
    frame.to_csv(target, index=False, float_format="%.12g")
