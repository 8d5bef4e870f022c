#!/usr/bin/env python3
"""Generate the bundled gaseous specific-attenuation table (100-200 GHz).

Reduced line-set model: Van Vleck-Weisskopf shapes for the O2 118.7503 GHz
line and the H2O 183.310087 GHz line plus empirical dry/wet continua.  Line
strengths are normalized to sea-level reference peaks (O2 line ~2 dB/km,
H2O line ~27 dB/km at 7.5 g/m^3, both at 15 degC / 1013.25 hPa), which keeps
the 110-170 GHz window in the few-tenths dB/km range consistent with the
full ITU-R line-by-line computation's order of magnitude while staying a
compact bundled table.

Writes src/thzsounder/data/gas_attenuation_100_200ghz_v1.npz
"""

import math
from pathlib import Path

import numpy as np

F_O2 = 118.7503   # GHz
F_H2O = 183.310087  # GHz
P_REF = 1013.25   # hPa
T_REF_C = 15.0


def _vvw(f_ghz, f0_ghz, width_ghz):
    """Van Vleck-Weisskopf line shape (1/GHz)."""
    return (f_ghz / f0_ghz) ** 2 * (
        width_ghz / ((f_ghz - f0_ghz) ** 2 + width_ghz ** 2)
        + width_ghz / ((f_ghz + f0_ghz) ** 2 + width_ghz ** 2)) / math.pi


def _o2_width(pn, theta):
    return 1.90 * pn * theta ** 0.8


def _h2o_width(pn, theta, vapor):
    return 3.10 * pn * theta ** 0.7 + 0.10 * (vapor / 7.5)


def specific_attenuation(f_ghz, temp_c, vapor_g_m3, pressure_hpa,
                         a_o2, a_h2o):
    theta = 300.0 / (temp_c + 273.15)
    pn = pressure_hpa / P_REF
    gamma_o2 = a_o2 * pn * theta ** 3 * _vvw(f_ghz, F_O2, _o2_width(pn, theta))
    gamma_dry_cont = 0.010 * (f_ghz / 100.0) ** 2 * pn ** 2 * theta ** 2.8
    gamma_h2o = (a_h2o * vapor_g_m3 * theta ** 3.5
                 * _vvw(f_ghz, F_H2O, _h2o_width(pn, theta, vapor_g_m3)))
    gamma_wet_cont = 0.0020 * vapor_g_m3 * pn * (f_ghz / 100.0) ** 2 * theta ** 3
    return gamma_o2 + gamma_dry_cont + gamma_h2o + gamma_wet_cont


def calibrated_strengths():
    theta = 300.0 / (T_REF_C + 273.15)
    a_o2 = 2.0 / (theta ** 3 * _vvw(F_O2, F_O2, _o2_width(1.0, theta)))
    a_h2o = 27.0 / (7.5 * theta ** 3.5
                    * _vvw(F_H2O, F_H2O, _h2o_width(1.0, theta, 7.5)))
    return a_o2, a_h2o


def main():
    a_o2, a_h2o = calibrated_strengths()
    freq = np.arange(100.0, 200.0 + 0.5, 1.0)
    temp = np.arange(-30.0, 40.0 + 0.5, 5.0)
    vapor = np.arange(0.0, 16.0 + 0.5, 2.0)
    pressure = np.arange(950.0, 1070.0 + 0.5, 20.0)

    grid = np.empty((freq.size, temp.size, vapor.size, pressure.size),
                    dtype=np.float32)
    for i, f in enumerate(freq):
        for j, t in enumerate(temp):
            for k, v in enumerate(vapor):
                for l, p in enumerate(pressure):
                    grid[i, j, k, l] = specific_attenuation(f, t, v, p,
                                                            a_o2, a_h2o)

    out = Path(__file__).resolve().parents[1] / "src" / "thzsounder" / "data"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gas_attenuation_100_200ghz_v1.npz"
    np.savez_compressed(path, freq_ghz=freq, temp_c=temp, vapor_g_m3=vapor,
                        pressure_hpa=pressure, gamma_db_km=grid,
                        version=np.array([1]))
    print(f"wrote {path} ({path.stat().st_size/1024:.0f} KiB)")
    # spot values
    for f, t, v, p in [(140.0, 12.23, 5.15, 1026.0),
                       (140.0, 7.23, 7.09, 1014.0),
                       (140.0, -2.32, 3.54, 1020.0),
                       (183.31, 15.0, 7.5, 1013.25),
                       (118.75, 15.0, 7.5, 1013.25)]:
        g = specific_attenuation(f, t, v, p, a_o2, a_h2o)
        print(f"  gamma({f} GHz, {t} C, {v} g/m3, {p} hPa) = {g:.4f} dB/km "
              f"-> {g*0.07:.5f} dB over 70 m")


if __name__ == "__main__":
    main()
