"""Daily fire-danger indices on the 2 km grid, with annual reset.

Canadian FWI system (FFMC, DMC, DC, ISI, BUI, FWI, DSR) after Van Wagner
(1987) / Van Wagner & Pickett (1985), with the cffdrs day-length and
drying-factor tables for 30-90N latitudes (metropolitan France). Also
Nesterov, Munger, KBDI (Crane 1982, SI units) and the Angstroem index,
plus precipitation derivatives (trailing sums, days since rain, and
discounted short-term precipitation indices over 3/5/9-day windows).

All step functions are elementwise over numpy arrays, so a whole raster
advances one day per call; time stays strictly sequential per cell.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

FFMC_START = 85.0
DMC_START = 6.0
DC_START = 15.0

# Van Wagner day-length (DMC) and drying-factor (DC) tables, 30-90N band.
DAY_LENGTH_N = np.array([6.5, 7.5, 9.0, 12.8, 13.9, 13.9, 12.4, 10.9, 9.4, 8.0, 7.0, 6.0])
DRYING_FACTOR_N = np.array([-1.6, -1.6, -1.6, 0.9, 3.8, 5.8, 6.4, 5.0, 2.4, 0.4, -1.6, -1.6])

PRECIP_WINDOWS = (3, 5, 9)
DAYS_SINCE_RAIN_CAP = 99


def relative_humidity(temp_c, dew_c):
    """Relative humidity [%] from temperature and dew point (Magnus form).

    Values outside [0,100] (dew point above temperature) are clamped with
    a warning rather than rejected.
    """
    a, b = 17.67, 243.5
    rh = 100.0 * np.exp(a * dew_c / (b + dew_c) - a * temp_c / (b + temp_c))
    if np.any(rh > 100.0) or np.any(rh < 0.0):
        warnings.warn("relative humidity outside [0,100] clamped", stacklevel=2)
    return np.clip(rh, 0.0, 100.0)


def ffmc_step(temp_c, rain_mm, wind_kmh, rh, ffmc0):
    """One-day fine fuel moisture code update."""
    t, p, w, h, f0 = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (temp_c, rain_mm, wind_kmh, rh, ffmc0))
    )
    mo = 147.2 * (101.0 - f0) / (59.5 + f0)
    wet = p > 0.5
    rf = np.where(wet, p - 0.5, 1.0)  # safe placeholder where dry
    soak = 42.5 * rf * np.exp(-100.0 / (251.0 - mo)) * (1.0 - np.exp(-6.93 / rf))
    mo_rain = mo + soak + np.where(
        mo > 150.0, 0.0015 * (mo - 150.0) ** 2 * np.sqrt(rf), 0.0
    )
    mo = np.where(wet, np.minimum(mo_rain, 250.0), mo)

    ed = (
        0.942 * h**0.679
        + 11.0 * np.exp((h - 100.0) / 10.0)
        + 0.18 * (21.1 - t) * (1.0 - np.exp(-0.115 * h))
    )
    ew = (
        0.618 * h**0.753
        + 10.0 * np.exp((h - 100.0) / 10.0)
        + 0.18 * (21.1 - t) * (1.0 - np.exp(-0.115 * h))
    )
    temp_rate = 0.581 * np.exp(0.0365 * t)
    k_dry = (
        0.424 * (1.0 - (h / 100.0) ** 1.7)
        + 0.0694 * np.sqrt(w) * (1.0 - (h / 100.0) ** 8)
    ) * temp_rate
    k_wet = (
        0.424 * (1.0 - ((100.0 - h) / 100.0) ** 1.7)
        + 0.0694 * np.sqrt(w) * (1.0 - ((100.0 - h) / 100.0) ** 8)
    ) * temp_rate
    m = np.where(
        mo < ed,
        np.where(mo < ew, ew - (ew - mo) / 10.0**k_wet, mo),
        np.where(mo > ed, ed + (mo - ed) / 10.0**k_dry, mo),
    )
    return np.clip(59.5 * (250.0 - m) / (147.2 + m), 0.0, 101.0)


def dmc_step(temp_c, rain_mm, rh, month, dmc0):
    """One-day duff moisture code update."""
    t, p, h, d0 = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (temp_c, rain_mm, rh, dmc0))
    )
    dl = DAY_LENGTH_N[month - 1]
    rk = np.where(t < -1.1, 0.0, 1.894 * (t + 1.1) * (100.0 - h) * dl * 1e-4)

    wet = p > 1.5
    rw = 0.92 * p - 1.27
    wmi = 20.0 + 280.0 / np.exp(0.023 * d0)
    b = np.where(
        d0 <= 33.0,
        100.0 / (0.5 + 0.3 * d0),
        np.where(d0 <= 65.0, 14.0 - 1.3 * np.log(np.maximum(d0, 1e-9)),
                 6.2 * np.log(np.maximum(d0, 1e-9)) - 17.2),
    )
    rw_safe = np.where(wet, rw, 1.0)
    wmr = wmi + 1000.0 * rw_safe / (48.77 + b * rw_safe)
    pr_wet = 43.43 * (5.6348 - np.log(np.maximum(wmr - 20.0, 1e-9)))
    pr = np.where(wet, np.maximum(pr_wet, 0.0), d0)
    return np.maximum(pr + rk, 0.0)


def dc_step(temp_c, rain_mm, month, dc0):
    """One-day drought code update."""
    t, p, d0 = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (temp_c, rain_mm, dc0))
    )
    fl = DRYING_FACTOR_N[month - 1]
    pe = np.maximum((0.36 * (np.maximum(t, -2.8) + 2.8) + fl) / 2.0, 0.0)
    wet = p > 2.8
    rw = 0.83 * p - 1.27
    smi = 800.0 * np.exp(-d0 / 400.0)
    dr = d0 - 400.0 * np.log(1.0 + 3.937 * np.where(wet, rw, 0.0) / smi)
    after_rain = np.where(dr > 0.0, dr + pe, pe)
    return np.maximum(np.where(wet, after_rain, d0 + pe), 0.0)


def isi_from(wind_kmh, ffmc):
    """Initial spread index from wind and today's FFMC."""
    w, f = np.broadcast_arrays(np.asarray(wind_kmh, float), np.asarray(ffmc, float))
    mo = 147.2 * (101.0 - f) / (59.5 + f)
    ff = 19.1152 * np.exp(-0.1386 * mo) * (1.0 + mo**5.31 / 4.93e7)
    return ff * np.exp(0.05039 * w)


def bui_from(dmc, dc):
    """Buildup index from today's DMC and DC."""
    m, d = np.broadcast_arrays(np.asarray(dmc, float), np.asarray(dc, float))
    denom = np.where(m + 0.4 * d > 0.0, m + 0.4 * d, 1.0)
    low = 0.8 * d * m / denom
    high = m - (1.0 - 0.8 * d / denom) * (0.92 + (0.0114 * m) ** 1.7)
    bui = np.where(m + 0.4 * d <= 0.0, 0.0, np.where(m <= 0.4 * d, low, high))
    return np.maximum(bui, 0.0)


def fwi_from(isi, bui):
    """Fire weather index (S-scale) from ISI and BUI."""
    i, b = np.broadcast_arrays(np.asarray(isi, float), np.asarray(bui, float))
    fd = np.where(
        b <= 80.0,
        0.626 * b**0.809 + 2.0,
        1000.0 / (25.0 + 108.64 * np.exp(-0.023 * b)),
    )
    bb = 0.1 * i * fd
    return np.where(
        bb > 1.0,
        np.exp(2.72 * (0.434 * np.log(np.maximum(bb, 1.0 + 1e-12))) ** 0.647),
        bb,
    )


def dsr_from(fwi):
    """Daily severity rating."""
    return 0.0272 * np.asarray(fwi, float) ** 1.77


def angstroem(temp_c, rh):
    """Angstroem index B = RH/20 + (27 - T)/10 (stateless)."""
    return np.asarray(rh, float) / 20.0 + (27.0 - np.asarray(temp_c, float)) / 10.0


def nesterov_step(temp_c, dew_c, rain_mm, prev):
    """Cumulative Nesterov ignition index; resets when daily rain > 3 mm."""
    t, td, p, n0 = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (temp_c, dew_c, rain_mm, prev))
    )
    return np.where(p > 3.0, 0.0, np.maximum(n0 + (t - td) * t, 0.0))


def munger_step(rain_mm, prev):
    """Munger drought index; resets when daily rain >= 1.27 mm."""
    p, m0 = np.broadcast_arrays(np.asarray(rain_mm, float), np.asarray(prev, float))
    return np.where(p >= 1.27, 0.0, 0.5 * (np.sqrt(2.0 * np.maximum(m0, 0.0)) + 1.0) ** 2)


def kbdi_step(temp_max_c, rain_mm, kbdi0, rain_consec0, rain_7d,
              annual_rain_mm=800.0, week_threshold_mm=30.0):
    """Keetch-Byram drought index in SI units (Crane 1982).

    rain_consec0 is the running sum of the current consecutive-rain spell
    before today; returns (kbdi, new consecutive-rain sum). The first
    5.08 mm of each spell are withheld from the effective rainfall, and a
    wet week (trailing 7-day rain >= week_threshold_mm) resets the index.
    """
    t, p, q0, s0, p7 = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (temp_max_c, rain_mm, kbdi0, rain_consec0, rain_7d))
    )
    pnet = np.maximum(0.0, p - np.maximum(0.0, 5.08 - s0))
    q = np.where(p7 >= week_threshold_mm, 0.0, np.maximum(0.0, q0 - pnet))
    et = (
        (203.2 - q)
        * (0.968 * np.exp(0.0875 * t + 1.5552) - 8.30)
        / (1.0 + 10.88 * np.exp(-0.001736 * annual_rain_mm))
        * 1e-3
    )
    rain_consec = np.where(p > 0.0, s0 + p, 0.0)
    return q + np.maximum(et, 0.0), rain_consec


@dataclass
class IndexState:
    """Carry-over state for all cumulative indices, one value per cell."""

    ffmc: np.ndarray
    dmc: np.ndarray
    dc: np.ndarray
    nesterov: np.ndarray
    munger: np.ndarray
    kbdi: np.ndarray
    rain_consec: np.ndarray
    days_since_rain: np.ndarray
    last_reset_year: int = -1

    @classmethod
    def startup(cls, shape):
        z = lambda v: np.full(shape, float(v))
        return cls(
            ffmc=z(FFMC_START), dmc=z(DMC_START), dc=z(DC_START),
            nesterov=z(0.0), munger=z(0.0), kbdi=z(0.0), rain_consec=z(0.0),
            days_since_rain=z(DAYS_SINCE_RAIN_CAP),
        )

    def reset(self):
        """Annual reset: FWI codes to startup values, cumulative indices to 0."""
        self.ffmc[...] = FFMC_START
        self.dmc[...] = DMC_START
        self.dc[...] = DC_START
        self.nesterov[...] = 0.0
        self.munger[...] = 0.0
        self.kbdi[...] = 0.0
        self.rain_consec[...] = 0.0


def annual_reset(state, date, season_start=(1, 1)):
    """Reset the state on the first day of the configured fire-season year."""
    if (date.month, date.day) == tuple(season_start) and state.last_reset_year != date.year:
        state.reset()
        state.last_reset_year = date.year
    return state


INDEX_FEATURES = [
    "ffmc", "dmc", "dc", "isi", "bui", "fwi", "dsr",
    "nesterov", "munger", "kbdi", "angstroem",
    "rain_24h", "rain_sum_7d", "days_since_rain",
    "precip_index_3d", "precip_index_5d", "precip_index_9d",
]


def precip_features(precip, rain_threshold_mm=1.0):
    """Precipitation derivatives from a daily series (time-first array).

    Returns dict with rain_24h, rain_sum_7d (trailing, includes today,
    partial over the available prefix), days_since_rain (days since last
    day with rain > threshold, startup capped at 99), and the discounted
    short-term precipitation indices over 3/5/9-day windows:
    sum over d=1..w of p(t-d) * (w-d+1)/w, strictly past days only.
    """
    p = np.asarray(precip, float)
    nt = p.shape[0]
    out = {"rain_24h": p.copy()}

    csum = np.cumsum(p, axis=0)
    s7 = csum.copy()
    s7[7:] = csum[7:] - csum[:-7]
    out["rain_sum_7d"] = s7

    dsr = np.empty_like(p)
    prev = np.full(p.shape[1:] if p.ndim > 1 else (), float(DAYS_SINCE_RAIN_CAP))
    for t in range(nt):
        today = np.where(p[t] > rain_threshold_mm, 0.0, np.minimum(prev + 1, DAYS_SINCE_RAIN_CAP))
        dsr[t] = today
        prev = today
    out["days_since_rain"] = dsr

    for w in PRECIP_WINDOWS:
        idx = np.zeros_like(p)
        for d in range(1, w + 1):
            if d >= nt:
                break
            idx[d:] += p[:-d] * (w - d + 1) / w
        out[f"precip_index_{w}d"] = idx
    return out


def compute_index_layers(dates, noon, evening, season_start=(1, 1),
                         rain_threshold_mm=1.0):
    """Run every index over a department's daily weather fields.

    noon/evening map variable name -> [time][y][x] arrays for the 12 h and
    16 h observations (noon drives the FWI system and precipitation
    derivatives; the 16 h record drives Nesterov and Angstroem). Returns an
    ordered dict of feature layers, same shape, keyed by INDEX_FEATURES.
    """
    shape = noon["temp_c"].shape
    nt = shape[0]
    if len(dates) != nt:
        raise ValueError("dates and weather fields disagree on length")
    state = IndexState.startup(shape[1:])
    layers = {name: np.zeros(shape) for name in INDEX_FEATURES}

    rh_noon = relative_humidity(noon["temp_c"], noon["dew_c"])
    rh_eve = relative_humidity(evening["temp_c"], evening["dew_c"])
    pf = precip_features(noon["precip_mm"], rain_threshold_mm)
    for name in ("rain_24h", "rain_sum_7d", "days_since_rain",
                 "precip_index_3d", "precip_index_5d", "precip_index_9d"):
        layers[name] = pf[name]

    for t in range(nt):
        date = dates[t]
        annual_reset(state, date, season_start)
        p = noon["precip_mm"][t]
        state.ffmc = ffmc_step(noon["temp_c"][t], p, noon["wind_kmh"][t], rh_noon[t], state.ffmc)
        state.dmc = dmc_step(noon["temp_c"][t], p, rh_noon[t], date.month, state.dmc)
        state.dc = dc_step(noon["temp_c"][t], p, date.month, state.dc)
        isi = isi_from(noon["wind_kmh"][t], state.ffmc)
        bui = bui_from(state.dmc, state.dc)
        fwi = fwi_from(isi, bui)
        state.nesterov = nesterov_step(
            evening["temp_c"][t], evening["dew_c"][t], p, state.nesterov
        )
        state.munger = munger_step(p, state.munger)
        state.kbdi, state.rain_consec = kbdi_step(
            np.maximum(noon["temp_c"][t], evening["temp_c"][t]), p,
            state.kbdi, state.rain_consec, pf["rain_sum_7d"][t],
        )
        layers["ffmc"][t] = state.ffmc
        layers["dmc"][t] = state.dmc
        layers["dc"][t] = state.dc
        layers["isi"][t] = isi
        layers["bui"][t] = bui
        layers["fwi"][t] = fwi
        layers["dsr"][t] = dsr_from(fwi)
        layers["nesterov"][t] = state.nesterov
        layers["munger"][t] = state.munger
        layers["kbdi"][t] = state.kbdi
        layers["angstroem"][t] = angstroem(evening["temp_c"][t], rh_eve[t])
    return layers
