"""Synthetic desk-scale fixture generator.

Produces a small multi-department region (events, 11x11 weather grids,
static layers, gazetteer, grid specs) with per-department climate regimes:
a Mediterranean-like profile with a strong summer ignition peak and a
low-risk profile with sparse events. Everything is reproducible from the
seed; the same seed yields byte-identical CSV outputs.
"""

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .ingest import GridSpec


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class Regime:
    """Ignition and climate profile for one department."""

    name: str
    ignition_rate: float  # mean daily ignition count over the year
    seasonal_peak: float  # summer multiplier of the ignition rate
    ba_scale: float  # typical burned area per event [ha]
    temp_mean: float
    temp_amplitude: float
    rain_prob: float


MEDITERRANEAN = Regime("mediterranean", 2.0, 2.5, 8.0, 16.0, 11.0, 0.18)
LOW_RISK = Regime("lowrisk", 0.2, 2.5, 1.5, 11.0, 8.0, 0.35)

CITIES_PER_DEPARTMENT = 3


def _seasonal_shape(day_of_year, peak):
    """Summer-peaked multiplier with mean ~1 over the year."""
    base = 1.0 + (peak - 1.0) * 0.5 * (1.0 - np.cos(2 * np.pi * (day_of_year - 196) / 365.25))
    return base / (1.0 + (peak - 1.0) * 0.5)


def generate_synthetic_region(out_dir, seed=0, n_departments=3, n_years=2,
                              start_year=2021, regimes=None, grid_size=4):
    """Write a reproducible synthetic fixture under out_dir.

    regimes, when given, is one Regime per department; the default
    alternates Mediterranean-like and low-risk profiles starting with one
    Mediterranean department so the 4-level labeling is exercisable.
    Outputs: events.csv, weather.csv, gazetteer.csv, grids.json and
    static/<dep>_<layer>.csv grids. Returns the list of department ids.
    """
    if n_years < 2:
        raise SynthError("need at least 2 years so temporal splits are possible")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "static").mkdir(exist_ok=True)
    if regimes is None:
        regimes = [
            MEDITERRANEAN if i % 2 == 0 else LOW_RISK for i in range(n_departments)
        ]
    if len(regimes) != n_departments:
        raise SynthError("one regime per department required")

    d0 = dt.date(start_year, 1, 1)
    d1 = dt.date(start_year + n_years - 1, 12, 31)
    dates = pd.date_range(d0, d1, freq="D")
    doy = dates.dayofyear.to_numpy()
    depts = [f"D{i + 1:02d}" for i in range(n_departments)]

    rng = np.random.default_rng(seed)
    events_rows, weather_frames, gaz_rows = [], [], []
    grids = {}
    for dep, regime in zip(depts, regimes):
        grid = GridSpec(dep, 0.0, 0.0, grid_size, grid_size)
        grids[dep] = grid
        cities = [f"{dep}_city{j}" for j in range(CITIES_PER_DEPARTMENT)]
        for j, city in enumerate(cities):
            gaz_rows.append(
                {
                    "location_ref": city,
                    "department": dep,
                    "row": int(j * (grid.n_y - 1) / max(CITIES_PER_DEPARTMENT - 1, 1)),
                    "col": int((j * 2) % grid.n_x),
                }
            )

        lam = regime.ignition_rate * _seasonal_shape(doy, regime.seasonal_peak)
        counts = rng.poisson(lam) if regime.ignition_rate > 0 else np.zeros(len(dates), int)
        for t in np.flatnonzero(counts):
            for _ in range(int(counts[t])):
                events_rows.append(
                    {
                        "date": dates[t].date().isoformat(),
                        "department": dep,
                        "location_ref": cities[int(rng.integers(len(cities)))],
                        "burned_area_ha": round(
                            float(regime.ba_scale * rng.lognormal(0.0, 1.0)), 3
                        ),
                    }
                )

        weather_frames.append(_department_weather(rng, dep, dates, doy, regime))

        elev = 200.0 + 50.0 * np.add.outer(np.arange(grid.n_y), np.arange(grid.n_x))
        pop = np.round(rng.gamma(2.0, 500.0, size=(grid.n_y, grid.n_x)), 1)
        landcover = rng.integers(1, 11, size=(grid.n_y, grid.n_x))
        for name, layer in [("elevation", elev), ("population", pop), ("landcover", landcover)]:
            np.savetxt(out / "static" / f"{dep}_{name}.csv", layer, delimiter=",", fmt="%.3f")

    pd.DataFrame(
        events_rows, columns=["date", "department", "location_ref", "burned_area_ha"]
    ).to_csv(out / "events.csv", index=False)
    pd.concat(weather_frames, ignore_index=True).to_csv(out / "weather.csv", index=False)
    pd.DataFrame(gaz_rows).to_csv(out / "gazetteer.csv", index=False)
    (out / "grids.json").write_text(
        json.dumps(
            {
                dep: {
                    "origin_x": g.origin_x, "origin_y": g.origin_y,
                    "n_x": g.n_x, "n_y": g.n_y,
                }
                for dep, g in grids.items()
            },
            indent=1, sort_keys=True,
        )
    )
    return depts


def _department_weather(rng, dep, dates, doy, regime):
    """Daily 11x11 weather fields at the 12 h and 16 h observations."""
    nt = len(dates)
    season = -np.cos(2 * np.pi * (doy - 15) / 365.25)
    temp12 = (
        regime.temp_mean
        + regime.temp_amplitude * season[:, None, None]
        + 0.2 * np.arange(11)[None, :, None]
        + rng.normal(0, 2.0, (nt, 11, 11))
    )
    temp16 = temp12 + rng.normal(1.5, 0.5, (nt, 11, 11))
    deficit = rng.gamma(2.0, 3.0, (nt, 11, 11))
    rain_day = rng.random(nt) < regime.rain_prob
    precip = np.where(
        rain_day[:, None, None], rng.gamma(1.5, 4.0, (nt, 11, 11)), 0.0
    )
    wind = rng.gamma(2.5, 5.0, (nt, 11, 11))
    wind_dir = rng.uniform(0, 360, (nt, 11, 11))
    snow = np.where(temp12 < -1.0, rng.gamma(1.0, 3.0, (nt, 11, 11)), 0.0)

    rows, cols = np.meshgrid(np.arange(11), np.arange(11), indexing="ij")
    frames = []
    for hour, temp, dfct in ((12, temp12, deficit), (16, temp16, deficit * 1.2)):
        frames.append(
            pd.DataFrame(
                {
                    "date": np.repeat([d.date().isoformat() for d in dates], 121),
                    "department": dep,
                    "row": np.tile(rows.ravel(), nt),
                    "col": np.tile(cols.ravel(), nt),
                    "hour": hour,
                    "temp_c": np.round(temp.reshape(nt, -1).ravel(), 2),
                    "dew_c": np.round((temp - dfct).reshape(nt, -1).ravel(), 2),
                    "precip_mm": np.round(precip.reshape(nt, -1).ravel(), 2),
                    "wind_kmh": np.round(wind.reshape(nt, -1).ravel(), 2),
                    "wind_dir_deg": np.round(wind_dir.reshape(nt, -1).ravel(), 1),
                    "snow_cm": np.round(snow.reshape(nt, -1).ravel(), 2),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)
