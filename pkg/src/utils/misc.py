from typing import Any, Dict
import json
import math
import os

import numpy as np
import pandas as pd
import yaml


def format_float(value) -> str:
    """Shortest round-trip decimal of a float; integers and None pass through as text."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def to_builtin(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays so that json can write them."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(data: Dict[str, Any], file_path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(to_builtin(data), f, indent=4)
        f.write("\n")


def write_csv(frame: pd.DataFrame, file_path: str) -> None:
    """CSV with ',' separator, header row and LF line endings; values preformatted."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    frame.to_csv(file_path, index=False, lineterminator="\n")


def dict_to_markdown_yaml(data, wrap_in_code_block: bool = False) -> str:
    yaml_str = yaml.dump(
        to_builtin(data), sort_keys=False, allow_unicode=True, width=float("inf")
    )
    if wrap_in_code_block:
        return f"```yaml\n{yaml_str}\n```"
    return yaml_str
