"""Walk through the fire-danger index chain on one year of daily weather.

We simulate a single grid cell, step the Canadian FWI system day by day,
and compute the cumulative indices (Nesterov, Munger, KBDI) plus the
instantaneous Angstroem index alongside. The point of interest is how the
codes build up through a dry spell and collapse after heavy rain.
"""

import datetime as dt

import numpy as np

from firerisk import indices

rng = np.random.default_rng(7)
n_days = 365
dates = [dt.date(2022, 1, 1) + dt.timedelta(days=k) for k in range(n_days)]

# a mediterranean-flavoured year: hot dry summer, wet shoulders
doy = np.arange(n_days)
temp = 12.0 + 14.0 * np.sin((doy - 105) / 365.0 * 2 * np.pi) + rng.normal(0, 2, n_days)
dew = temp - rng.uniform(2, 14, n_days)
rain_prob = 0.35 - 0.25 * np.sin((doy - 105) / 365.0 * 2 * np.pi)
rain = np.where(rng.random(n_days) < rain_prob, rng.gamma(1.5, 6.0, n_days), 0.0)
wind = rng.uniform(5, 35, n_days)

shape = (n_days, 1, 1)
noon = {
    "temp_c": temp.reshape(shape),
    "dew_c": dew.reshape(shape),
    "precip_mm": rain.reshape(shape),
    "wind_kmh": wind.reshape(shape),
}
evening = {"temp_c": (temp + 1.5).reshape(shape), "dew_c": dew.reshape(shape)}

layers = indices.compute_index_layers(dates, noon, evening)

print("available index layers:", ", ".join(sorted(layers)))
print()

fwi = layers["fwi"][:, 0, 0]
nesterov = layers["nesterov"][:, 0, 0]
kbdi = layers["kbdi"][:, 0, 0]

peak = int(np.argmax(fwi))
print(f"peak FWI {fwi[peak]:.1f} on {dates[peak]} "
      f"(nesterov {nesterov[peak]:.0f}, kbdi {kbdi[peak]:.0f})")

# the wettest day should knock the fine-fuel code down hard
wettest = int(np.argmax(rain))
before, after = layers["ffmc"][wettest - 1, 0, 0], layers["ffmc"][wettest, 0, 0]
print(f"heaviest rain {rain[wettest]:.1f} mm on {dates[wettest]}: "
      f"FFMC {before:.1f} -> {after:.1f}")

print()
print("monthly mean of selected indices")
print(f"{'month':>5} {'fwi':>7} {'isi':>7} {'bui':>7} {'nesterov':>9} {'kbdi':>7}")
for month in range(1, 13):
    sel = np.array([d.month == month for d in dates])
    row = [layers[k][sel, 0, 0].mean() for k in ("fwi", "isi", "bui")]
    print(f"{month:>5} {row[0]:>7.2f} {row[1]:>7.2f} {row[2]:>7.2f} "
          f"{nesterov[sel].mean():>9.0f} {kbdi[sel].mean():>7.1f}")
