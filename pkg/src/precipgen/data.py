"""Precipitation panels and gauge-network files.

Panels are comma-separated text with a ``timestamp,site_1,...,site_N``
header, ISO-8601 timestamps at a constant step and nonnegative rain rates.
Network files are either ``site,x_m,y_m`` coordinate tables or a square
distance matrix whose header is ``site,<label_1>,...,<label_N>``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .spatial import GaugeNetwork

FLOAT_FMT = "%.17g"
DEFAULT_ORIGIN = np.datetime64("2016-04-04T00:00:00", "ms")


@dataclass
class PrecipPanel:
    """T x N rain rates (mm/hr) on a regular time grid."""

    timestamps: np.ndarray
    sites: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ms]")
        self.sites = [str(s) for s in self.sites]
        if self.values.ndim != 2:
            raise DataError("panel values must be a T x N matrix")
        T, N = self.values.shape
        if len(self.sites) != N:
            raise DataError(f"{len(self.sites)} site labels for {N} columns")
        if len(set(self.sites)) != N:
            raise DataError("duplicate site labels in panel")
        if self.timestamps.shape != (T,):
            raise DataError(f"{self.timestamps.shape[0]} timestamps for {T} rows")
        bad = ~np.isfinite(self.values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"non-finite value at row {r}, site {self.sites[c]!r}")
        neg = self.values < 0
        if neg.any():
            r, c = np.argwhere(neg)[0]
            raise DataError(f"negative value {self.values[r, c]!r} at row {r}, site {self.sites[c]!r}")
        _check_time_grid(self.timestamps)

    @classmethod
    def from_array(cls, values, sites=None, step_seconds=30, origin=DEFAULT_ORIGIN):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        T, N = values.shape
        if sites is None:
            sites = [f"site_{i + 1}" for i in range(N)]
        step = np.timedelta64(int(round(step_seconds * 1000)), "ms")
        ts = np.datetime64(origin, "ms") + step * np.arange(T)
        return cls(ts, sites, values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def step(self):
        return self.timestamps[1] - self.timestamps[0] if self.T > 1 else None

    def day_of_year(self) -> np.ndarray:
        days = self.timestamps.astype("datetime64[D]")
        return (days - days.astype("datetime64[Y]")).astype(int) + 1

    def with_values(self, values):
        return PrecipPanel(self.timestamps.copy(), list(self.sites), values)

    def slice(self, start=None, stop=None):
        return PrecipPanel(self.timestamps[start:stop], list(self.sites), self.values[start:stop])


def _check_time_grid(ts):
    if len(ts) < 2:
        return
    steps = np.diff(ts).astype("int64")
    if np.any(steps <= 0):
        i = int(np.argmax(steps <= 0))
        raise DataError(f"timestamps not strictly increasing at row {i + 1}")
    step = steps[0]
    if np.any(steps != step):
        i = int(np.argmax(steps != step))
        missing = []
        t = ts[i] + np.timedelta64(int(step), "ms")
        while t < ts[i + 1] and len(missing) < 10:
            missing.append(str(t))
            t = t + np.timedelta64(int(step), "ms")
        raise DataError(
            f"irregular time step after row {i}: expected {int(step)} ms, "
            f"got {int(steps[i])} ms; missing instants: {', '.join(missing) or 'none'}"
        )


def _parse_time(text, lineno):
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise DataError(f"line {lineno}: cannot parse timestamp {text!r}") from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "ms")


def _format_times(ts):
    ts = np.asarray(ts, dtype="datetime64[ms]")
    whole = np.all(ts.astype("int64") % 1000 == 0)
    return np.datetime_as_string(ts, unit="s" if whole else "ms")


def load_panel(path) -> PrecipPanel:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read panel file {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "timestamp":
            raise DataError(f"{path}: line 1: header must be timestamp,site_1,...,site_N")
        sites = [h.strip() for h in header[1:]]
        times, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            times.append(_parse_time(rec[0], lineno))
            try:
                vals = [float(c) for c in rec[1:]]
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric value") from None
            for j, v in enumerate(vals):
                if not math.isfinite(v):
                    raise DataError(f"{path}: line {lineno}: non-finite value at site {sites[j]!r}")
                if v < 0:
                    raise DataError(
                        f"{path}: negative value {v!r} at row {lineno - 2} (line {lineno}), site {sites[j]!r}"
                    )
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return PrecipPanel(np.array(times, dtype="datetime64[ms]"), sites, np.array(rows))


def save_panel(panel: PrecipPanel, path) -> None:
    path = Path(path)
    times = _format_times(panel.timestamps)
    with path.open("w", newline="") as fh:
        fh.write(",".join(["timestamp", *panel.sites]) + "\n")
        for t, row in zip(times, panel.values):
            fh.write(t + "," + ",".join(FLOAT_FMT % v for v in row) + "\n")


def load_network(path) -> GaugeNetwork:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read network file {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty network file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    try:
        if header[0].lower() == "site" and [h.lower() for h in header[1:]] in (["x_m", "y_m"], ["x", "y"]):
            ids = [r[0].strip() for r in body]
            coords = np.array([[float(r[1]), float(r[2])] for r in body])
            return GaugeNetwork(ids, coords)
        labels = header[1:]
        if len(body) != len(labels):
            raise DataError(f"{path}: distance matrix has {len(body)} rows for {len(labels)} columns")
        ids = [r[0].strip() for r in body]
        if ids != labels:
            raise DataError(f"{path}: row labels {ids} do not match column labels {labels}")
        dist = np.array([[float(c) for c in r[1:]] for r in body])
    except (ValueError, IndexError):
        raise DataError(f"{path}: malformed network file") from None
    return GaugeNetwork(ids, None, dist)


def save_network(net: GaugeNetwork, path, as_matrix=False) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if net.coords is not None and not as_matrix:
            fh.write("site,x_m,y_m\n")
            for s, (x, y) in zip(net.site_ids, net.coords):
                fh.write(f"{s},{FLOAT_FMT % x},{FLOAT_FMT % y}\n")
        else:
            fh.write(",".join(["site", *net.site_ids]) + "\n")
            for s, row in zip(net.site_ids, net.dist):
                fh.write(s + "," + ",".join(FLOAT_FMT % v for v in row) + "\n")


def align_network(panel: PrecipPanel, net: GaugeNetwork) -> GaugeNetwork:
    """Network restricted and ordered to the panel's site columns."""
    unknown = [s for s in panel.sites if s not in net.site_ids]
    if unknown:
        raise DataError(f"panel sites missing from network: {unknown}")
    return net.subset(panel.sites)
