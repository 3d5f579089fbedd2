"""Ingestion of raw residential power records into daily profile matrices.

Pipeline: load_power_csv / ev_sessions_to_load -> resample_mean ->
clean_full_days -> split_train_test -> normalize.  A daily profile set is a
matrix of day rows by 96 quarter-hour power samples (watts).  All functions
are pure and safe to call concurrently.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    ContractError,
    DegenerateChannelError,
    EmptyDataError,
    ParameterError,
    RowParseError,
    SchemaError,
    ValidationError,
)

logger = logging.getLogger(__name__)

CHANNELS = ("load", "pv", "ev")
STEP_SECONDS = 900          # 15-minute grid
DAY_SECONDS = 86400
SLOTS_PER_DAY = DAY_SECONDS // STEP_SECONDS   # 96

EV_LEVEL_POWERS_KW = (3.6, 7.2)


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 timestamp to UTC epoch seconds (naive times = UTC)."""
    dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _epoch_day_to_date(day: int) -> str:
    return datetime.fromtimestamp(day * DAY_SECONDS, tz=timezone.utc).date().isoformat()


@dataclass(frozen=True)
class RawSeries:
    """Irregular or gridded power samples for one channel.

    timestamps: UTC epoch seconds, strictly increasing.
    values: watts; finite everywhere, non-negative for load and pv.
    """

    timestamps: np.ndarray
    values: np.ndarray
    channel: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValidationError(f"unknown channel {self.channel!r}, expected one of {CHANNELS}")
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise ValidationError("timestamps and values must be equal-length 1-D arrays")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValidationError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("values contain NaN or infinity")
        if self.channel in ("load", "pv") and np.any(vals < 0):
            raise ValidationError(f"{self.channel} power must be non-negative")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class EvSession:
    """One charging event at the shared station."""

    plug_in: int
    plug_out: int
    energy_kwh: float
    user_id: str

    def __post_init__(self):
        if self.plug_out <= self.plug_in:
            raise ValidationError(
                f"session {self.user_id!r}: plug_out must be after plug_in"
            )
        if not math.isfinite(self.energy_kwh) or self.energy_kwh < 0:
            raise ValidationError(f"session {self.user_id!r}: energy_kwh must be >= 0")

    @property
    def duration_hours(self) -> float:
        return (self.plug_out - self.plug_in) / 3600.0


@dataclass(frozen=True)
class NormalizationRecord:
    """Per-channel min-max statistics, computed on the train split only."""

    vmin: float
    vmax: float

    def __post_init__(self):
        if not (math.isfinite(self.vmin) and math.isfinite(self.vmax)):
            raise ValidationError("normalization bounds must be finite")
        if self.vmin >= self.vmax:
            raise DegenerateChannelError(
                f"channel is constant (min {self.vmin} >= max {self.vmax})"
            )


@dataclass(frozen=True)
class DailyProfileSet:
    """n_days x 96 matrix of quarter-hour power samples for one channel."""

    profiles: np.ndarray
    channel: str
    dates: tuple
    norm: NormalizationRecord | None = None
    normalized: bool = False

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValidationError(f"unknown channel {self.channel!r}")
        prof = np.asarray(self.profiles, dtype=np.float64)
        if prof.ndim != 2 or prof.shape[1] != SLOTS_PER_DAY:
            raise ValidationError(
                f"profiles must be n_days x {SLOTS_PER_DAY}, got shape {prof.shape}"
            )
        if not np.all(np.isfinite(prof)):
            raise ValidationError("profiles contain NaN or infinity")
        dates = tuple(self.dates)
        if len(dates) != prof.shape[0]:
            raise ValidationError("dates length must equal the number of day rows")
        if self.normalized:
            if self.norm is None:
                raise ContractError("normalized set requires a normalization record")
            if prof.size and (prof.min() < -1e-9 or prof.max() > 1 + 1e-9):
                raise ValidationError("normalized values must lie in [0, 1]")
        object.__setattr__(self, "profiles", prof)
        object.__setattr__(self, "dates", dates)

    @property
    def n_days(self) -> int:
        return self.profiles.shape[0]

    def flat_samples(self) -> np.ndarray:
        return self.profiles.reshape(-1)


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------

DEFAULT_POWER_COLUMNS = {"timestamp": "timestamp", "power_w": "power"}
EV_SESSION_COLUMNS = ("user_id", "plug_in", "plug_out", "energy_kwh")


def load_power_csv(path, column_map=None, channel: str = "load") -> RawSeries:
    """Read a power CSV (header row, ISO timestamps, decimal watts).

    column_map maps CSV column name -> role, roles being "timestamp" and
    "power".  Extra columns are ignored.  Rows are re-sorted by timestamp;
    duplicate timestamps are rejected.
    """
    path = Path(path)
    colmap = dict(DEFAULT_POWER_COLUMNS if column_map is None else column_map)
    roles = {role: name for name, role in colmap.items()}
    if "timestamp" not in roles or "power" not in roles:
        raise SchemaError("column map must assign both 'timestamp' and 'power' roles")

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [name for name in (roles["timestamp"], roles["power"]) if name not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) {missing}, header was {header}")
        timestamps, values = [], []
        for row in reader:
            line = reader.line_num
            try:
                ts = parse_timestamp(row[roles["timestamp"]])
                val = float(row[roles["power"]])
            except (ValueError, TypeError) as exc:
                raise RowParseError(f"{path.name}: {exc}", line) from exc
            if not math.isfinite(val):
                raise RowParseError(f"{path.name}: non-finite power {val!r}", line)
            timestamps.append(ts)
            values.append(val)

    ts = np.asarray(timestamps, dtype=np.int64)
    vals = np.asarray(values, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    ts, vals = ts[order], vals[order]
    if len(ts) > 1 and np.any(np.diff(ts) == 0):
        dup = int(ts[np.flatnonzero(np.diff(ts) == 0)[0]])
        raise SchemaError(f"{path.name}: duplicated timestamp at epoch {dup}")
    return RawSeries(timestamps=ts, values=vals, channel=channel)


def load_ev_sessions_csv(path) -> list[EvSession]:
    """Read charging sessions from a CSV with columns user_id,plug_in,plug_out,energy_kwh."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [name for name in EV_SESSION_COLUMNS if name not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) {missing}, header was {header}")
        sessions = []
        for row in reader:
            line = reader.line_num
            try:
                sessions.append(
                    EvSession(
                        plug_in=parse_timestamp(row["plug_in"]),
                        plug_out=parse_timestamp(row["plug_out"]),
                        energy_kwh=float(row["energy_kwh"]),
                        user_id=row["user_id"],
                    )
                )
            except ValidationError:
                raise
            except (ValueError, TypeError) as exc:
                raise RowParseError(f"{path.name}: {exc}", line) from exc
    return sessions


# ---------------------------------------------------------------------------
# Resampling and cleaning
# ---------------------------------------------------------------------------

def resample_mean(series: RawSeries, step_seconds: int = STEP_SECONDS) -> RawSeries:
    """Downsample to fixed windows aligned to midnight; each output value is
    the arithmetic mean of the source samples falling in its window.

    Windows containing no source sample are simply absent from the output
    (clean_full_days later drops the affected days).
    """
    if step_seconds <= 0 or DAY_SECONDS % step_seconds != 0:
        raise ParameterError(f"step_seconds must divide a day, got {step_seconds}")
    if len(series) == 0:
        raise EmptyDataError("cannot resample an empty series")
    if len(series) > 1:
        src_res = int(np.min(np.diff(series.timestamps)))
        if src_res > step_seconds:
            raise ParameterError(
                f"source resolution {src_res}s is coarser than target step {step_seconds}s"
            )

    window = series.timestamps // step_seconds
    uniq, inverse, counts = np.unique(window, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=series.values)
    return RawSeries(
        timestamps=uniq * step_seconds,
        values=sums / counts,
        channel=series.channel,
    )


def clean_full_days(series: RawSeries, step_seconds: int = STEP_SECONDS) -> DailyProfileSet:
    """Keep only days with all windows present and stack them into day rows."""
    if DAY_SECONDS % step_seconds != 0 or DAY_SECONDS // step_seconds != SLOTS_PER_DAY:
        raise ParameterError(f"step_seconds must be {STEP_SECONDS} for {SLOTS_PER_DAY}-slot days")
    if len(series) == 0:
        raise EmptyDataError("empty series")
    if np.any(series.timestamps % step_seconds != 0):
        raise ParameterError("series is not aligned to the resampled grid; run resample_mean first")

    days = series.timestamps // DAY_SECONDS
    slots = (series.timestamps % DAY_SECONDS) // step_seconds
    uniq_days, day_index = np.unique(days, return_inverse=True)
    counts = np.bincount(day_index, minlength=len(uniq_days))
    complete = counts == SLOTS_PER_DAY

    n_complete = int(complete.sum())
    logger.info(
        "clean_full_days[%s]: %d of %d days complete", series.channel, n_complete, len(uniq_days)
    )
    if n_complete == 0:
        raise EmptyDataError("no day has a full 24-hour record")

    keep = complete[day_index]
    kept_days = uniq_days[complete]
    row_of_day = {d: i for i, d in enumerate(kept_days)}
    profiles = np.zeros((n_complete, SLOTS_PER_DAY))
    rows = np.fromiter((row_of_day[d] for d in days[keep]), dtype=np.int64)
    profiles[rows, slots[keep]] = series.values[keep]
    dates = tuple(_epoch_day_to_date(int(d)) for d in kept_days)
    return DailyProfileSet(profiles=profiles, channel=series.channel, dates=dates)


def ev_sessions_to_load(sessions, level_power_kw: float) -> RawSeries:
    """Convert charging sessions to a 15-min EV power series.

    Each session draws level_power_kw from plug-in until its energy is
    delivered, then zero until plug-out; window powers are energy-conserving
    averages over the grid.  Overlapping sessions (shared station) sum.
    """
    if level_power_kw not in EV_LEVEL_POWERS_KW:
        raise ParameterError(
            f"level_power_kw must be one of {EV_LEVEL_POWERS_KW}, got {level_power_kw}"
        )
    sessions = list(sessions)
    if not sessions:
        raise EmptyDataError("no charging sessions")

    for s in sessions:
        deliverable = level_power_kw * s.duration_hours
        if s.energy_kwh > deliverable + 1e-9:
            raise ValidationError(
                f"session {s.user_id!r}: energy {s.energy_kwh} kWh exceeds deliverable "
                f"{deliverable:.6f} kWh at {level_power_kw} kW"
            )

    first_day = min(s.plug_in for s in sessions) // DAY_SECONDS
    last_day = (max(s.plug_out for s in sessions) - 1) // DAY_SECONDS
    grid_start = first_day * DAY_SECONDS
    n_slots = (last_day - first_day + 1) * SLOTS_PER_DAY
    step_hours = STEP_SECONDS / 3600.0
    power_w = np.zeros(n_slots)

    for s in sessions:
        charge_seconds = s.energy_kwh / level_power_kw * 3600.0
        charge_end = s.plug_in + charge_seconds
        if charge_seconds <= 0:
            continue
        w0 = (s.plug_in - grid_start) // STEP_SECONDS
        w1 = int(math.ceil((charge_end - grid_start) / STEP_SECONDS))
        for w in range(w0, min(w1, n_slots)):
            wstart = grid_start + w * STEP_SECONDS
            overlap = min(charge_end, wstart + STEP_SECONDS) - max(float(s.plug_in), wstart)
            if overlap > 0:
                power_w[w] += level_power_kw * 1000.0 * (overlap / 3600.0) / step_hours

    timestamps = grid_start + np.arange(n_slots, dtype=np.int64) * STEP_SECONDS
    return RawSeries(timestamps=timestamps, values=power_w, channel="ev")


# ---------------------------------------------------------------------------
# Splitting and normalization
# ---------------------------------------------------------------------------

def split_train_test(profile_set: DailyProfileSet, ratio: float = 0.8):
    """Chronological split: earliest floor(ratio * n) days train, rest test."""
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"ratio must be in (0, 1), got {ratio}")
    n = profile_set.n_days
    if n < 2:
        raise ParameterError("need at least 2 days to split")

    order = np.argsort(np.asarray(profile_set.dates), kind="stable")
    n_train = int(math.floor(ratio * n))
    train_idx, test_idx = order[:n_train], order[n_train:]

    def subset(idx):
        return replace(
            profile_set,
            profiles=profile_set.profiles[idx],
            dates=tuple(profile_set.dates[i] for i in idx),
        )

    return subset(train_idx), subset(test_idx)


def normalize(profile_set: DailyProfileSet, record: NormalizationRecord | None = None) -> DailyProfileSet:
    """Min-max scale to [0, 1].  Without an explicit record the statistics come
    from the set itself (use the train split's record for the test split)."""
    if profile_set.normalized:
        raise ContractError("set is already normalized")
    if record is None:
        vmin = float(profile_set.profiles.min())
        vmax = float(profile_set.profiles.max())
        record = NormalizationRecord(vmin=vmin, vmax=vmax)
    scaled = (profile_set.profiles - record.vmin) / (record.vmax - record.vmin)
    # Test-split values outside the train range are clipped into [0, 1].
    scaled = np.clip(scaled, 0.0, 1.0)
    return replace(profile_set, profiles=scaled, norm=record, normalized=True)


def denormalize(profile_set: DailyProfileSet) -> DailyProfileSet:
    """Invert min-max scaling using the attached record."""
    if not profile_set.normalized:
        raise ContractError("set is not normalized")
    record = profile_set.norm
    raw = profile_set.profiles * (record.vmax - record.vmin) + record.vmin
    return replace(profile_set, profiles=raw, normalized=False)


# ---------------------------------------------------------------------------
# Persistence: CSV matrix + JSON sidecar
# ---------------------------------------------------------------------------

def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_profile_set(profile_set: DailyProfileSet, csv_path) -> None:
    """Write the day matrix as CSV (one row per day, 96 columns) plus a JSON
    metadata sidecar (channel, dates, normalization)."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        for row in profile_set.profiles:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    meta = {
        "channel": profile_set.channel,
        "dates": list(profile_set.dates),
        "normalized": profile_set.normalized,
        "normalization": (
            None
            if profile_set.norm is None
            else {"min": profile_set.norm.vmin, "max": profile_set.norm.vmax}
        ),
        "step_seconds": STEP_SECONDS,
    }
    sidecar_path(csv_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_profile_set(csv_path) -> DailyProfileSet:
    """Read a day matrix written by save_profile_set."""
    csv_path = Path(csv_path)
    meta_path = sidecar_path(csv_path)
    if not csv_path.exists():
        raise SchemaError(f"profile CSV not found: {csv_path}")
    if not meta_path.exists():
        raise SchemaError(f"metadata sidecar not found: {meta_path}")
    meta = json.loads(meta_path.read_text())
    rows = []
    with csv_path.open(newline="") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    profiles = np.asarray(rows, dtype=np.float64).reshape(len(rows), -1)
    norm = meta.get("normalization")
    record = None if norm is None else NormalizationRecord(vmin=norm["min"], vmax=norm["max"])
    return DailyProfileSet(
        profiles=profiles,
        channel=meta["channel"],
        dates=tuple(meta["dates"]),
        norm=record,
        normalized=bool(meta.get("normalized", False)),
    )
