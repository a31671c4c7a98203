#!/usr/bin/env python3
"""Regenerate the bundled synthetic day-ahead load fixture.

48 half-hourly points over one day: a 3000 MW base with a 600 MW diurnal
sine (trough at midnight, peak at noon) plus seed-fixed Gaussian noise,
sigma = 25 MW.  The shape mimics a small national grid's winter day; the
values are synthetic and carry no provenance beyond this formula.

Run from the repository root:  python scripts/make_fixture.py
"""

from pathlib import Path

import numpy as np

SEED = 0
N_POINTS = 48
STEP_HOURS = 0.5
BASE_MW = 3000.0
SWING_MW = 600.0
NOISE_MW = 25.0
PEAK_HOUR = 12.0

OUT = Path(__file__).resolve().parents[1] / "src" / "voltaic" / "fixtures" / "synthetic_ireland_24h.csv"


def main() -> None:
    rng = np.random.default_rng(SEED)
    t = np.arange(N_POINTS) * STEP_HOURS
    load = (
        BASE_MW
        + SWING_MW * np.sin(2.0 * np.pi * (t - (PEAK_HOUR - 6.0)) / 24.0)
        + rng.normal(0.0, NOISE_MW, N_POINTS)
    )
    load = np.round(load, 6)
    lines = ["time_hours,load_mw"]
    for ti, li in zip(t, load):
        lines.append(f"{ti:.1f},{li:.6f}")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({N_POINTS} points, seed {SEED})")


if __name__ == "__main__":
    main()
