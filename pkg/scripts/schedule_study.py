"""Accuracy and cost of the cluster-point solver against schedule length.

Runs the dyadic schedule k_n = 1 - 2^-n on the quarter-turn rotation with
offset (1, 0), whose unique fixed point is (0.5, 0.5).
"""

import argparse
import math
import time

import numpy as np

from modfix import Schedule, check_regular_growth, make_rotation_map, power_modular, schauder_fixed_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lengths", default="4,6,8,10,11,12")
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    rho = power_modular(2, 2.0)
    growth = check_regular_growth(rho, np.linspace(0.0, 0.99, 34))
    T = make_rotation_map(math.pi / 2, [1.0, 0.0])
    xstar = np.array([0.5, 0.5])
    print("length  inner iterations  certificate bound  rho(y - x*)  converged  seconds")
    for n in (int(v) for v in args.lengths.split(",")):
        t0 = time.perf_counter()
        res = schauder_fixed_point(T, None, Schedule.from_rule("dyadic", n), rho, growth, args.tol)
        dt = time.perf_counter() - t0
        print(f"{n:6d}  {res.iterations:16d}  {res.info['certificate_bound']:17.3e}  "
              f"{rho(res.point - xstar):11.3e}  {str(res.converged):9}  {dt:7.2f}")


if __name__ == "__main__":
    main()
