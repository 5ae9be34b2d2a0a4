"""Scale recovery error against GPS noise on a lawnmower survey.

    python3 scripts/scale_monte_carlo.py --noise 0 0.5 1 2 --seeds 50
"""

import argparse

import numpy as np

from uavinspect.scale import estimate_scale, sync_poses
from uavinspect.synthgen import gen_flight_fixture, lawnmower_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=4.0)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    traj, ts = lawnmower_trajectory()
    print(f"{'gps m':>6} {'median %':>9} {'p95 %':>8} {'within 1%':>10}")
    for noise in args.noise:
        errs = []
        for seed in range(args.seeds):
            poses, log = gen_flight_fixture(traj, args.scale, ts, gps_noise=noise, baro_noise=noise, seed=seed)
            errs.append(100 * abs(estimate_scale(sync_poses(poses, log)) / args.scale - 1))
        errs = np.array(errs)
        print(f"{noise:6.2f} {np.median(errs):9.4f} {np.percentile(errs, 95):8.4f} "
              f"{int((errs <= 1).sum()):>5}/{args.seeds}")


if __name__ == "__main__":
    main()
