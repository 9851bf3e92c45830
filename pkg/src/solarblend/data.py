"""Hourly solar dataset ingestion and day-level assembly.

The forecasting day covers hours 7..19 inclusive (13 daytime hours); GHI
outside that window is dropped at ingest. A loaded ``Dataset`` is immutable
in practice: all downstream stages only read it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import date as date_t
from datetime import datetime

import numpy as np

DAY_HOURS = tuple(range(7, 20))  # 7am .. 7pm inclusive
N_DAY_HOURS = len(DAY_HOURS)

#: Column order of the ingest CSV. ghi_clr, img_* and image_path are optional.
CSV_COLUMNS = (
    "timestamp", "ghi", "ghi_clr", "dni", "dhi", "temp", "rh", "pres",
    "ws", "wd", "img_mu", "img_sigma", "img_entropy", "image_path",
)
OPTIONAL_COLUMNS = frozenset({"ghi_clr", "img_mu", "img_sigma", "img_entropy", "image_path"})

#: The 13 per-hour features used by the recognition stage, in canonical order.
FEATURE_ORDER = (
    "ghi", "ghi_clr", "csi", "img_mu", "img_sigma", "img_entropy",
    "dni", "dhi", "temp", "rh", "pres", "ws", "wd",
)


class DataError(Exception):
    pass


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing required column: {name}")
        self.name = name


class UnparseableRow(DataError):
    def __init__(self, line_no, detail=""):
        super().__init__(f"unparseable row at line {line_no}: {detail}")
        self.line_no = line_no


class EmptyFile(DataError):
    pass


class MonthTooSmall(DataError):
    def __init__(self, month):
        super().__init__(f"month {month} has fewer than 2 days; cannot split")
        self.month = month


class IncompleteDay(DataError):
    def __init__(self, date):
        super().__init__(f"day {date} is missing hours in the 7-19 window")
        self.date = date


class NoLocationConfigured(DataError):
    pass


@dataclass(frozen=True)
class HourRecord:
    date: date_t
    hour: int
    ghi: float
    dni: float
    dhi: float
    temp: float
    rh: float
    pres: float
    ws: float
    wd: float
    ghi_clr: float | None = None
    img_mu: float | None = None
    img_sigma: float | None = None
    img_entropy: float | None = None
    image_path: str | None = None


@dataclass(frozen=True)
class DayProfile:
    date: date_t
    records: tuple[HourRecord, ...]

    def __post_init__(self):
        hours = [r.hour for r in self.records]
        if hours != list(DAY_HOURS):
            raise IncompleteDay(self.date)

    @property
    def ghi_vector(self) -> np.ndarray:
        return np.array([r.ghi for r in self.records], dtype=float)

    def record_at(self, hour: int) -> HourRecord:
        return self.records[hour - DAY_HOURS[0]]


@dataclass
class Dataset:
    days: list[DayProfile]
    split_tags: dict[date_t, str] = field(default_factory=dict)
    incomplete: list[date_t] = field(default_factory=list)

    def subset(self, which: str) -> list[DayProfile]:
        if which == "all":
            return list(self.days)
        return [d for d in self.days if self.split_tags.get(d.date) == which]

    def day_by_date(self, d: date_t) -> DayProfile | None:
        for day in self.days:
            if day.date == d:
                return day
        return None


def _parse_float(text, line_no, col):
    text = text.strip()
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise UnparseableRow(line_no, f"bad value {text!r} in column {col}")


def load_dataset(path, schema: dict[str, str] | None = None) -> Dataset:
    """Load an hourly CSV into day profiles.

    ``schema`` optionally remaps canonical column names to file column
    names. Days with missing hours inside the 7-19 window are flagged in
    ``Dataset.incomplete`` and excluded from ``days``.
    """
    schema = schema or {}
    with open(path, newline="", encoding="utf-8") as fh:
        return _load_from_stream(fh, schema)


def loads_dataset(text: str, schema: dict[str, str] | None = None) -> Dataset:
    return _load_from_stream(io.StringIO(text), schema or {})


def _load_from_stream(fh, schema) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyFile("no header row")
    header = [h.strip() for h in header]
    col_idx = {}
    for canon in CSV_COLUMNS:
        name = schema.get(canon, canon)
        if name in header:
            col_idx[canon] = header.index(name)
        elif canon not in OPTIONAL_COLUMNS:
            raise MissingColumn(name)

    by_day: dict[date_t, dict[int, HourRecord]] = {}
    n_rows = 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(c.strip() == "" for c in row):
            continue
        n_rows += 1
        raw = row[col_idx["timestamp"]].strip()
        try:
            ts = datetime.fromisoformat(raw)
        except ValueError:
            raise UnparseableRow(line_no, f"bad timestamp {raw!r}")

        def fval(col, required=True):
            idx = col_idx.get(col)
            if idx is None or idx >= len(row):
                return None
            v = _parse_float(row[idx], line_no, col)
            return v

        if ts.hour not in DAY_HOURS:
            continue
        img_path_idx = col_idx.get("image_path")
        rec = HourRecord(
            date=ts.date(), hour=ts.hour,
            ghi=_require(fval("ghi"), line_no, "ghi"),
            dni=_require(fval("dni"), line_no, "dni"),
            dhi=_require(fval("dhi"), line_no, "dhi"),
            temp=_require(fval("temp"), line_no, "temp"),
            rh=_require(fval("rh"), line_no, "rh"),
            pres=_require(fval("pres"), line_no, "pres"),
            ws=_require(fval("ws"), line_no, "ws"),
            wd=_require(fval("wd"), line_no, "wd"),
            ghi_clr=fval("ghi_clr"),
            img_mu=fval("img_mu"),
            img_sigma=fval("img_sigma"),
            img_entropy=fval("img_entropy"),
            image_path=(row[img_path_idx].strip() or None)
            if img_path_idx is not None and img_path_idx < len(row) else None,
        )
        by_day.setdefault(rec.date, {})[rec.hour] = rec

    if n_rows == 0:
        raise EmptyFile("no data rows")

    days, incomplete = [], []
    for d in sorted(by_day):
        hours = by_day[d]
        if set(hours) == set(DAY_HOURS):
            days.append(DayProfile(d, tuple(hours[h] for h in DAY_HOURS)))
        else:
            incomplete.append(d)
    return Dataset(days=days, incomplete=incomplete)


def _require(v, line_no, col):
    if v is None:
        raise UnparseableRow(line_no, f"empty value in required column {col}")
    return v


def validate_records(ds: Dataset) -> list[str]:
    """Report invariant violations as human-readable strings (never raises)."""
    report = []
    for day in ds.days:
        for r in day.records:
            tag = f"{r.date} {r.hour:02d}h"
            if r.ghi < 0:
                report.append(f"{tag}: ghi negative ({r.ghi})")
            if r.dni < 0:
                report.append(f"{tag}: dni negative ({r.dni})")
            if r.dhi < 0:
                report.append(f"{tag}: dhi negative ({r.dhi})")
            if not (0 <= r.rh <= 100):
                report.append(f"{tag}: rh out of range ({r.rh})")
            if r.pres <= 0:
                report.append(f"{tag}: pres non-positive ({r.pres})")
            if r.ws < 0:
                report.append(f"{tag}: ws negative ({r.ws})")
            if not (0 <= r.wd < 360):
                report.append(f"{tag}: wd out of range ({r.wd})")
            if r.ghi_clr is not None:
                if r.ghi_clr < 0:
                    report.append(f"{tag}: ghi_clr negative ({r.ghi_clr})")
                elif r.ghi > 1.05 * r.ghi_clr and r.ghi_clr > 0:
                    # Measurement noise above clear sky is tolerated; warn only.
                    report.append(f"{tag}: warning: ghi exceeds 1.05x ghi_clr")
    return report


def split_train_test(ds: Dataset, ratio: float = 0.75, seed: int = 0) -> Dataset:
    """Tag each day train/test, drawing the train days per calendar month.

    Per month with n days, round-half-up: |train| = floor(ratio*n + 0.5).
    Deterministic for a given seed.
    """
    if not (0 < ratio < 1):
        raise ValueError(f"ratio must be in (0,1), got {ratio}")
    by_month: dict[tuple[int, int], list[date_t]] = {}
    for day in ds.days:
        by_month.setdefault((day.date.year, day.date.month), []).append(day.date)
    tags: dict[date_t, str] = {}
    rng = np.random.default_rng(seed)
    for month in sorted(by_month):
        dates = sorted(by_month[month])
        if len(dates) < 2:
            raise MonthTooSmall(f"{month[0]}-{month[1]:02d}")
        n_train = int(math.floor(ratio * len(dates) + 0.5))
        perm = rng.permutation(len(dates))
        train_idx = set(perm[:n_train].tolist())
        for i, d in enumerate(dates):
            tags[d] = "train" if i in train_idx else "test"
    return replace(ds, split_tags=tags)


def build_day_matrix(ds: Dataset, subset: str = "all") -> np.ndarray:
    """Stack daily GHI vectors into an (n_days, 13) matrix, chronological order."""
    days = ds.subset(subset)
    if not days:
        return np.empty((0, N_DAY_HOURS))
    return np.vstack([d.ghi_vector for d in days])


# --- clear-sky provider -----------------------------------------------------

def solar_zenith_deg(lat_deg: float, day_of_year: int, hour: float) -> float:
    """Solar zenith angle from standard declination/hour-angle geometry.

    The hour is treated as local solar time (hour angle 15 deg per hour
    from solar noon).
    """
    decl = math.radians(23.45) * math.sin(2 * math.pi * (284 + day_of_year) / 365.0)
    hour_angle = math.radians(15.0 * (hour - 12.0))
    lat = math.radians(lat_deg)
    cos_z = (math.sin(lat) * math.sin(decl)
             + math.cos(lat) * math.cos(decl) * math.cos(hour_angle))
    cos_z = min(1.0, max(-1.0, cos_z))
    return math.degrees(math.acos(cos_z))


def haurwitz_clear_sky(lat_deg: float, day_of_year: int, hour: float) -> float:
    """Simple clear-sky GHI: 1098 * cos(z) * exp(-0.057 / cos(z)), 0 below horizon."""
    z = math.radians(solar_zenith_deg(lat_deg, day_of_year, hour))
    cos_z = math.cos(z)
    if cos_z <= 0.0:
        return 0.0
    return 1098.0 * cos_z * math.exp(-0.057 / cos_z)


class HaurwitzClearSky:
    """Pluggable clear-sky provider backed by the Haurwitz formula."""

    def __init__(self, latitude: float, longitude: float = 0.0, elevation: float = 0.0):
        self.latitude = latitude
        self.longitude = longitude
        self.elevation = elevation

    def ghi_clr(self, date: date_t, hour: float) -> float:
        return haurwitz_clear_sky(self.latitude, date.timetuple().tm_yday, hour)


def attach_clear_sky(ds: Dataset, model=None) -> Dataset:
    """Fill in ghi_clr on every record; existing values pass through unchanged."""
    needs_model = any(r.ghi_clr is None for day in ds.days for r in day.records)
    if needs_model and model is None:
        raise NoLocationConfigured(
            "ghi_clr column absent and no clear-sky provider configured")
    new_days = []
    for day in ds.days:
        recs = []
        for r in day.records:
            if r.ghi_clr is None:
                recs.append(replace(r, ghi_clr=model.ghi_clr(r.date, r.hour)))
            else:
                recs.append(r)
        new_days.append(DayProfile(day.date, tuple(recs)))
    return Dataset(days=new_days, split_tags=dict(ds.split_tags),
                   incomplete=list(ds.incomplete))
