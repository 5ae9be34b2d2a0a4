"""Rendered-roof area error against depth, with and without undistortion.

    python3 scripts/roof_area_depth.py --k1 -0.12 --depths 40 50 75 100 150
"""

import argparse

from uavinspect.imaging import CameraIntrinsics, threshold, undistort
from uavinspect.roof import roof_area
from uavinspect.synthgen import render_roof_image


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depths", type=float, nargs="+", default=[50.0, 75.0, 100.0])
    ap.add_argument("--k1", type=float, default=-0.12)
    ap.add_argument("--noise", type=float, default=4.0)
    args = ap.parse_args()
    K = CameraIntrinsics(1000.0, 1000.0, 479.5, 359.5, k1=args.k1)
    print(f"{'depth m':>8} {'truth m2':>9} {'raw %':>8} {'undist %':>9}")
    for d in args.depths:
        img, truth = render_roof_image(depth_m=d, intrinsics=K, noise_sigma=args.noise, seed=int(d))
        raw = roof_area(threshold(img, 128), d, K.fx).area
        fixed = roof_area(threshold(undistort(img, K), 128), d, K.fx).area
        t = truth["area_m2"]
        print(f"{d:8.1f} {t:9.1f} {100 * (raw - t) / t:+8.2f} {100 * (fixed - t) / t:+9.2f}")


if __name__ == "__main__":
    main()
