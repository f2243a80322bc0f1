"""Check the a-priori distance envelope on random affine strong contractions.

Prints violations split by iteration index (m = 0 versus m >= 1) and by
the ratio c/l, which is where the first-row envelope breaks down.
"""

import argparse

import numpy as np

from modfix import StrongContractionCertificate, brute_force_fixed_point, make_affine_map, solve_strong
from modfix.problems import random_affine_contraction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    buckets = {}
    for _ in range(args.count):
        spec, rho, c, l, k = random_affine_contraction(rng)
        T = make_affine_map(spec)
        z = brute_force_fixed_point(T).point
        x0 = rng.uniform(-5.0, 5.0, size=spec.dimension)
        res = solve_strong(T, rho, StrongContractionCertificate(c, l, k), x0, 1e-11, reference=z)
        tr = res.trace
        bad = tr.distance > tr.distance_bound * (1 + 1e-9)
        key = min(int((c / l - 1.0) / 0.5), 3)
        row = buckets.setdefault(key, [0, 0, 0])
        row[0] += 1
        row[1] += int(bad[tr.index == 0].any())
        row[2] += int(bad[tr.index > 0].sum())

    print("c/l range    instances  first-row violations  later-row violations")
    for key in sorted(buckets):
        lo = 1.0 + 0.5 * key
        label = f"[{lo:.1f}, {lo + 0.5:.1f})" if key < 3 else f"[{lo:.1f}, 3.0]"
        n, first, later = buckets[key]
        print(f"{label:12} {n:9d}  {first:20d}  {later:20d}")


if __name__ == "__main__":
    main()
