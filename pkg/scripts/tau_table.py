#!/usr/bin/env python3
"""Roll-bias bound tau against the symmetric pitch limit, grid search and closed form."""

import argparse
import math

import numpy as np

from rcmstab.stability import derive_tau


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--limits", type=float, nargs="+", default=[0, 10, 20, 30, 40, 53, 60, 70, 80])
    p.add_argument("--resolution", type=float, default=0.25, help="grid step in degrees")
    args = p.parse_args()
    print(f"{'pitch limit':>12s} {'tau grid':>10s} {'closed form':>12s}")
    for lim in args.limits:
        r = math.radians(lim)
        res = derive_tau(np.array([-r, r]), math.radians(args.resolution))
        print(f"{lim:11.1f}° {res.tau_deg:9.2f}° {math.degrees(res.tau_closed_form):11.2f}°")


if __name__ == "__main__":
    main()
