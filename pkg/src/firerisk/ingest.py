"""Record schemas, the 2 km department grid, datacube construction and storage.

A datacube holds one department's daily feature stack as a float32 array
indexed [time][y][x][feature]. Cubes are immutable after construction and
round-trip bit-exactly through the on-disk format (meta.json + values.bin).
"""

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

CELL_SIZE_M = 2000


class IngestError(ValueError):
    """Invalid input records or layers."""


class IntegrityError(IOError):
    """Stored cube is corrupted or truncated."""


@dataclass(frozen=True)
class FireEvent:
    """One dated ignition record."""

    date: dt.date
    department_id: str
    location_ref: str
    burned_area_ha: float

    def __post_init__(self):
        if self.burned_area_ha < 0:
            raise IngestError(
                f"negative burned area {self.burned_area_ha} on {self.date}"
            )


@dataclass(frozen=True)
class GridSpec:
    """Projected 2 km grid covering one department."""

    department_id: str
    origin_x: float
    origin_y: float
    n_x: int
    n_y: int
    cell_size_m: int = CELL_SIZE_M

    def __post_init__(self):
        if self.cell_size_m != CELL_SIZE_M:
            raise IngestError(f"cell size must be {CELL_SIZE_M} m")
        if self.n_x < 1 or self.n_y < 1:
            raise IngestError("grid must have at least one cell per axis")


@dataclass(frozen=True)
class WeatherRecord:
    """One observation on the 11x11 department weather grid."""

    date: dt.date
    department_id: str
    row: int
    col: int
    hour: int
    temperature_c: float
    dew_point_c: float
    precipitation_mm: float
    wind_speed_kmh: float
    wind_direction_deg: float
    snow_height_cm: float

    def __post_init__(self):
        if not (0 <= self.row <= 10 and 0 <= self.col <= 10):
            raise IngestError(f"weather grid point ({self.row},{self.col}) off 11x11 grid")
        if self.hour not in (12, 16):
            raise IngestError(f"observation hour {self.hour} not in {{12, 16}}")


@dataclass(frozen=True)
class TemporalSplit:
    """Disjoint year sets for train / validation / test."""

    train_years: frozenset
    val_years: frozenset
    test_years: frozenset

    def __post_init__(self):
        sets = [self.train_years, self.val_years, self.test_years]
        for i in range(3):
            for j in range(i + 1, 3):
                if sets[i] & sets[j]:
                    raise IngestError(f"split year sets overlap: {sorted(sets[i] & sets[j])}")

    def assign(self, date):
        """Map a date to 'train' | 'val' | 'test' | 'excluded' by calendar year."""
        y = date.year
        if y in self.train_years:
            return "train"
        if y in self.val_years:
            return "val"
        if y in self.test_years:
            return "test"
        return "excluded"


def default_split():
    """Year assignment used throughout: 2017-2020 and 2022 train, 2021/2024 val, 2023 test."""
    return TemporalSplit(
        train_years=frozenset({2017, 2018, 2019, 2020, 2022}),
        val_years=frozenset({2021, 2024}),
        test_years=frozenset({2023}),
    )


@dataclass
class DataCube:
    """Per-department daily feature stack on the 2 km grid."""

    department_id: str
    grid: GridSpec
    dates: list  # ordered, contiguous daily datetime.date
    feature_names: list
    values: np.ndarray  # float32, [time][y][x][feature]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        _check_dates_contiguous(self.dates)
        if len(set(self.feature_names)) != len(self.feature_names):
            raise IngestError("duplicate feature names")
        expected = (len(self.dates), self.grid.n_y, self.grid.n_x, len(self.feature_names))
        if self.values.shape != expected:
            raise IngestError(f"cube shape {self.values.shape} != expected {expected}")

    def feature(self, name):
        """View of one feature as [time][y][x]."""
        return self.values[..., self.feature_names.index(name)]


def _check_dates_contiguous(dates):
    if not dates:
        raise IngestError("cube has no dates")
    missing = []
    for a, b in zip(dates, dates[1:]):
        if (b - a).days != 1:
            missing.extend(
                (a + dt.timedelta(days=k)) for k in range(1, (b - a).days)
            )
    if missing:
        raise IngestError(
            "date gaps in cube: missing " + ", ".join(d.isoformat() for d in missing[:10])
        )


def rasterize_events(events, grid, gazetteer):
    """Turn fire events into daily count and burned-area rasters.

    gazetteer maps each location_ref to a single (row, col) cell. Returns
    (dates, counts, ba) where counts is int64 [time][y][x] and ba float64.
    The date axis spans min..max event date; with no events both rasters
    are empty with an empty date list.
    """
    bad = [e for e in events if e.location_ref not in gazetteer]
    if bad:
        refs = ", ".join(f"{e.location_ref}@{e.date}" for e in bad[:10])
        raise IngestError(f"unresolvable location_ref for {len(bad)} events: {refs}")
    if not events:
        return [], np.zeros((0, grid.n_y, grid.n_x), np.int64), np.zeros(
            (0, grid.n_y, grid.n_x)
        )
    d0 = min(e.date for e in events)
    d1 = max(e.date for e in events)
    dates = [d0 + dt.timedelta(days=k) for k in range((d1 - d0).days + 1)]
    counts = np.zeros((len(dates), grid.n_y, grid.n_x), np.int64)
    ba = np.zeros((len(dates), grid.n_y, grid.n_x))
    for e in events:
        r, c = gazetteer[e.location_ref]
        t = (e.date - d0).days
        counts[t, r, c] += 1
        ba[t, r, c] += e.burned_area_ha
    return dates, counts, ba


def build_cube(department_id, layers, grid, dates):
    """Assemble named daily layers into a DataCube.

    layers is an ordered mapping name -> array [time][y][x]; feature order
    is insertion order. All layers must match the grid and date range.
    """
    names = list(layers)
    expected = (len(dates), grid.n_y, grid.n_x)
    arrays = []
    for name in names:
        arr = np.asarray(layers[name])
        if arr.shape != expected:
            raise IngestError(
                f"layer '{name}' shape {arr.shape} != expected {expected}"
            )
        arrays.append(arr)
    values = np.stack(arrays, axis=-1).astype(np.float32)
    cube = DataCube(department_id, grid, list(dates), names, values)
    if np.isnan(cube.values).any():
        raise IngestError("cube contains NaN after construction")
    return cube


def store_cube(cube, path):
    """Write a cube as meta.json + values.bin (little-endian float32)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "department_id": cube.department_id,
        "grid": {
            "department_id": cube.grid.department_id,
            "origin_x": cube.grid.origin_x,
            "origin_y": cube.grid.origin_y,
            "n_x": cube.grid.n_x,
            "n_y": cube.grid.n_y,
            "cell_size_m": cube.grid.cell_size_m,
        },
        "dates": [d.isoformat() for d in cube.dates],
        "feature_names": cube.feature_names,
        "shape": list(cube.values.shape),
        "dtype": "<f4",
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    (out / "values.bin").write_bytes(cube.values.astype("<f4").tobytes())


def load_cube(path):
    """Read a cube written by store_cube; bit-exact inverse."""
    src = Path(path)
    try:
        meta = json.loads((src / "meta.json").read_text())
        shape = tuple(meta["shape"])
        dates = [dt.date.fromisoformat(d) for d in meta["dates"]]
        g = meta["grid"]
    except (OSError, KeyError, ValueError) as exc:
        raise IntegrityError(f"corrupted cube header at {src}: {exc}") from exc
    payload = (src / "values.bin").read_bytes()
    expected_bytes = int(np.prod(shape)) * 4
    if len(payload) != expected_bytes:
        raise IntegrityError(
            f"values.bin at {src} has {len(payload)} bytes, expected {expected_bytes}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(shape)
    grid = GridSpec(g["department_id"], g["origin_x"], g["origin_y"], g["n_x"], g["n_y"])
    return DataCube(meta["department_id"], grid, dates, list(meta["feature_names"]), values.copy())


def read_events_csv(path):
    """Parse events.csv (date,department,location_ref,burned_area_ha)."""
    df = pd.read_csv(path, dtype={"department": str, "location_ref": str})
    required = {"date", "department", "location_ref", "burned_area_ha"}
    missing = required - set(df.columns)
    if missing:
        raise IngestError(f"events.csv missing columns: {sorted(missing)}")
    return [
        FireEvent(
            date=dt.date.fromisoformat(str(r.date)),
            department_id=str(r.department),
            location_ref=str(r.location_ref),
            burned_area_ha=float(r.burned_area_ha),
        )
        for r in df.itertuples()
    ]


def read_weather_csv(path):
    """Parse weather.csv into a DataFrame validated against the record schema."""
    df = pd.read_csv(path, dtype={"department": str})
    required = {
        "date", "department", "row", "col", "hour", "temp_c", "dew_c",
        "precip_mm", "wind_kmh", "wind_dir_deg", "snow_cm",
    }
    missing = required - set(df.columns)
    if missing:
        raise IngestError(f"weather.csv missing columns: {sorted(missing)}")
    if not df["hour"].isin([12, 16]).all():
        bad = sorted(df.loc[~df["hour"].isin([12, 16]), "hour"].unique())
        raise IngestError(f"weather.csv has observation hours outside {{12,16}}: {bad}")
    if not (df["row"].between(0, 10).all() and df["col"].between(0, 10).all()):
        raise IngestError("weather.csv has grid points off the 11x11 grid")
    df["date"] = pd.to_datetime(df["date"]).dt.date
    return df


def resample_weather_to_grid(weather, grid, hour):
    """Nearest-neighbor resample of 11x11 weather fields onto the 2 km grid.

    weather is the frame from read_weather_csv for one department. Returns
    (dates, fields) where fields maps variable name -> [time][y][x] arrays.
    Missing values are forward-filled up to 3 days per weather grid point,
    then filled with the point's period mean.
    """
    sub = weather[weather["hour"] == hour]
    if sub.empty:
        raise IngestError(f"no weather records at hour {hour}")
    dates = sorted(sub["date"].unique())
    date_ix = {d: i for i, d in enumerate(dates)}
    variables = ["temp_c", "dew_c", "precip_mm", "wind_kmh", "wind_dir_deg", "snow_cm"]
    raw = {v: np.full((len(dates), 11, 11), np.nan) for v in variables}
    t = sub["date"].map(date_ix).to_numpy()
    r = sub["row"].to_numpy()
    c = sub["col"].to_numpy()
    for v in variables:
        raw[v][t, r, c] = sub[v].to_numpy(float)
    for v in variables:
        raw[v] = _impute_series(raw[v])
    # each 2 km cell takes its nearest of the 11x11 points (proportional mapping)
    rows = np.minimum((np.arange(grid.n_y) + 0.5) * 11 // grid.n_y, 10).astype(int)
    cols = np.minimum((np.arange(grid.n_x) + 0.5) * 11 // grid.n_x, 10).astype(int)
    fields = {v: raw[v][:, rows[:, None], cols[None, :]] for v in variables}
    return dates, fields


def _impute_series(arr, max_ffill=3):
    """Forward-fill along time up to max_ffill days, then fill with the mean."""
    out = arr.copy()
    nt = out.shape[0]
    age = np.full(out.shape[1:], max_ffill + 1)
    last = np.full(out.shape[1:], np.nan)
    for t in range(nt):
        obs = ~np.isnan(out[t])
        last[obs] = out[t][obs]
        age[obs] = 0
        fill = ~obs & (age < max_ffill)
        out[t][fill] = last[fill]
        age[~obs] += 1
    col_mean = np.nanmean(out, axis=0)
    col_mean = np.where(np.isnan(col_mean), 0.0, col_mean)
    nan_ix = np.isnan(out)
    out[nan_ix] = np.broadcast_to(col_mean, out.shape)[nan_ix]
    return out


def snap_gazetteer(locations, grid):
    """Snap location coordinates (projected meters) to the nearest cell center.

    locations maps location_ref -> (x, y). Returns location_ref -> (row, col).
    """
    out = {}
    for ref, (x, y) in locations.items():
        c = int(np.clip(round((x - grid.origin_x) / grid.cell_size_m - 0.5), 0, grid.n_x - 1))
        r = int(np.clip(round((y - grid.origin_y) / grid.cell_size_m - 0.5), 0, grid.n_y - 1))
        out[ref] = (r, c)
    return out
