"""Structured documents and ensemble directories.

JSON documents carry a ``schema`` string, are written with sorted keys and
contain no wall-clock information, so identical inputs give identical bytes.
Floats are written with Python's shortest round-trip repr (lossless).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import PrecipPanel, load_panel, save_panel
from .errors import ConfigError, DataError
from .generator import SimulationEnsemble
from .inference import FitResult, ModelParams

FIT_SCHEMA = "precipgen.fit/1"
ENSEMBLE_SCHEMA = "precipgen.ensemble/1"
REPORT_SCHEMA = "precipgen.report/1"
CONFIG_SCHEMA = "precipgen.config/1"
OCCURRENCE_SCHEMA = "precipgen.occurrence/1"
TRUTH_SCHEMA = "precipgen.truth/1"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path, schema=None) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if schema is not None and doc.get("schema") != schema:
        raise DataError(f"{path}: expected schema {schema!r}, found {doc.get('schema')!r}")
    return doc


def save_fit(fit: FitResult, path, extra=None) -> None:
    doc = {"schema": FIT_SCHEMA, **fit.to_dict()}
    if extra:
        doc.update(extra)
    write_json(path, doc)


def load_fit(path) -> FitResult:
    doc = read_json(path, FIT_SCHEMA)
    try:
        return FitResult.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed fit document ({exc})") from None


def replicate_name(k) -> str:
    return f"replicate_{k:03d}.csv"


def save_ensemble(ens: SimulationEnsemble, out_dir, extra=None) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k in range(ens.K):
        name = replicate_name(ens.streams[k])
        save_panel(ens.panel(k), out / name)
        files.append(name)
    doc = {
        "schema": ENSEMBLE_SCHEMA,
        "mode": ens.mode,
        "seed": ens.seed,
        "K": ens.K,
        "T": ens.T,
        "N": ens.N,
        "streams": list(ens.streams),
        "files": files,
        "params": ens.params.to_dict(),
    }
    if extra:
        doc.update(extra)
    write_json(out / "manifest.json", doc)
    return files


def load_ensemble(out_dir) -> SimulationEnsemble:
    out = Path(out_dir)
    doc = read_json(out / "manifest.json", ENSEMBLE_SCHEMA)
    panels = [load_panel(out / f) for f in doc["files"]]
    if not panels:
        raise DataError(f"{out}: ensemble has no replicates")
    first = panels[0]
    for f, p in zip(doc["files"], panels):
        if p.shape != first.shape or p.sites != first.sites:
            raise DataError(f"{out / f}: replicate shape or sites differ from {doc['files'][0]}")
    reps = np.stack([p.values for p in panels])
    return SimulationEnsemble(
        reps, doc["mode"], doc["seed"], ModelParams.from_dict(doc["params"]), None,
        list(doc["streams"]), first.timestamps, first.sites,
    )


def write_table(path, header, rows) -> None:
    """Comma-separated table; floats with 17 significant digits."""

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, (float, np.floating)):
            return "%.17g" % v
        return str(v)

    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


def check_panel_shape(panel: PrecipPanel, other: PrecipPanel, what) -> None:
    if panel.shape != other.shape or panel.sites != other.sites:
        raise ConfigError(f"{what} {other.shape} {other.sites} does not match panel {panel.shape} {panel.sites}")
