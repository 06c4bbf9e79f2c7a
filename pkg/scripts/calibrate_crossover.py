"""Fit the crossover slope cross_c1 to the low-load HTO target.

Holds one unit at 10% of rated current for 12 h from a hydrogen-free start
and bisects cross_c1 until HTO settles at 95% of hto_max. Thin wrapper over
``electro-coord calibrate``; extra flags are passed through.

Usage: python3 scripts/calibrate_crossover.py [--config cfg.json --out new.json]
"""
import sys

from electro_coord.cli import main

if __name__ == "__main__":
    sys.exit(main(["calibrate", *sys.argv[1:]]))
