#!/usr/bin/env python3
"""Scan the snow model's wetness knob and report the calibrated default.

The liquid-water fraction is the single free parameter of the snow
scattering model; this scan picks the value whose link-scale excess loss at
the mean campaign snowfall rate (0.45 mm/hr, 140 GHz, 70 m) sits closest to
the ~13 dB campaign-scale target.  The chosen value is frozen as
weather.DEFAULT_SNOW_WETNESS.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from thzsounder.weather import SnowModelParams, snow_attenuation  # noqa: E402

TARGET_DB = 13.0
RATE = 0.45
FREQ = 140e9


def main():
    best = None
    for w in np.arange(0.0, 1.0001, 0.05):
        params = SnowModelParams(wetness=float(w))
        loss = snow_attenuation(RATE, params, FREQ)
        gap = abs(loss - TARGET_DB)
        marker = ""
        if best is None or gap < best[2]:
            best = (float(w), loss, gap)
            marker = "  <-"
        print(f"wetness {w:4.2f}: L_snow = {loss:6.3f} dB{marker}")
    print(f"\ncalibrated wetness = {best[0]:.2f} "
          f"(L = {best[1]:.3f} dB, |gap| = {best[2]:.3f} dB)")


if __name__ == "__main__":
    main()
