"""
pycorv.reports - CSV, manifest and error-report writers

CSVs are RFC-4180 with LF line endings; floats are written with repr() so a
re-run with the same config and seed produces the same bytes.
"""

import csv
import json
import logging
import math
import platform
import re
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError, PycorvError

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    logger.debug(f"wrote {path}")
    return path


def file_label(label: str) -> str:
    """'corv_sgld[softplus]' -> 'corv_sgld_softplus'."""
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def write_manifest(out_dir: Path, config: ExperimentConfig, files: List[Path]) -> Path:
    """key=value lines pinning the config, seed and library versions."""
    config_path = out_dir / "config.toml"
    config_path.write_text(config.to_toml(), encoding="utf-8")
    files = [*files, config_path]
    entries = {
        "kind": config.kind,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "threads": config.threads,
        "pycorv": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "files": ",".join(sorted(p.name for p in files)),
    }
    path = out_dir / "manifest"
    path.write_text("".join(f"{k}={v}\n" for k, v in entries.items()), encoding="utf-8")
    return path


def write_error_report(out_dir: Union[str, Path], err: PycorvError) -> Path:
    """error.json for a failed run: {"error", "message", "problems"}."""
    report = {
        "error": type(err).__name__,
        "message": str(err).split("\n")[0],
        "problems": list(getattr(err, "problems", [])) if isinstance(err, ConfigError) else [],
    }
    for key in ("step_index", "line"):
        value = getattr(err, key, None)
        if value is not None:
            report[key] = value
    path = Path(out_dir) / "error.json"
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return path


def rows_from(records: Iterable[Mapping[str, Any]], header: Sequence[str]) -> List[List[Any]]:
    return [[r.get(k) for k in header] for r in records]
