"""Regenerate the bundled annual wind profile (one-minute resolution).

Usage: python3 scripts/make_synthetic_wind.py [out_path]
"""
import sys
from pathlib import Path

from electro_coord.scenarios import synthetic_wind, write_wind_csv

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "data" / "wind_annual_synthetic.csv.gz"


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_OUT
    profile = synthetic_wind(days=365, dt=60.0, seed=2019)
    write_wind_csv(profile, out)
    print(f"wrote {len(profile)} samples to {out}")


if __name__ == "__main__":
    main()
