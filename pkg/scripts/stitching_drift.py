"""Per-frame corner error of a stitched synthetic sequence.

    python3 scripts/stitching_drift.py --frames 98 --rotation 0.4 --canvas /tmp/canvas.pgm
"""

import argparse
import time

import numpy as np

from uavinspect.imaging import write_gray
from uavinspect.stitching import AffineTransform, StitchConfig, compose, stitch_sequence
from uavinspect.synthgen import gen_roof_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--tx", type=float, default=22.0)
    ap.add_argument("--ty", type=float, default=3.5)
    ap.add_argument("--rotation", type=float, default=0.4, help="degrees per step")
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--max-corners", type=int, default=250)
    ap.add_argument("--canvas", default=None)
    args = ap.parse_args()
    w, h = 640, 480
    step = compose(AffineTransform.translation(args.tx, args.ty),
                   AffineTransform.rotation(args.rotation, center=(w / 2, h / 2)))
    frames, truths, _ = gen_roof_sequence(args.seed, args.frames, step, (w, h))
    t0 = time.perf_counter()
    res = stitch_sequence(frames, StitchConfig(max_corners=args.max_corners))
    elapsed = time.perf_counter() - t0
    c = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], float)
    print(f"{'frame':>5} {'inliers':>7} {'corner err px':>13}")
    errs = []
    for k, (e, t) in enumerate(zip(res.transforms, truths)):
        err = float(np.linalg.norm(e.apply(c) - t.apply(c), axis=1).mean())
        errs.append(err)
        inl = res.pair_inliers[k - 1] if k else "-"
        print(f"{k:5d} {inl!s:>7} {err:13.3f}")
    print(f"RMS {np.sqrt(np.mean(np.square(errs))):.3f} px, drift {errs[-1] / max(1, args.frames - 1):.4f} px/step, "
          f"{elapsed:.1f} s, canvas {res.canvas.shape[1]}x{res.canvas.shape[0]}")
    if args.canvas:
        write_gray(res.canvas.to_uint8(), args.canvas)


if __name__ == "__main__":
    main()
