"""Write one fixture per command into a directory, for trying the CLI by hand.

    python3 scripts/make_fixtures.py /tmp/fixtures
    inspect distances --cloud /tmp/fixtures/building/cloud.ply \
        --flight-log /tmp/fixtures/building/flight_log.csv --poses /tmp/fixtures/building/poses.txt
"""

import argparse
from pathlib import Path

from uavinspect.stitching import AffineTransform, compose
from uavinspect.synthgen import (
    SceneSpec, write_building_fixture, write_layout_fixture, write_roof_fixture, write_sequence_fixture,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    spec = SceneSpec(gap=16.2, density=5, noise_sigma=0.05, outlier_fraction=0.05, seed=args.seed)
    write_building_fixture(out / "building", spec, scale=2.5)
    write_roof_fixture(out / "roof", depth_m=50.0, noise_sigma=3.0, seed=args.seed)
    step = compose(AffineTransform.translation(22.0, 3.5), AffineTransform.rotation(0.4, center=(320, 240)))
    write_sequence_fixture(out / "sequence", args.seed, 10, step)
    write_layout_fixture(out / "layout", 38.73, seed=args.seed)
    for d in sorted(p for p in out.iterdir() if p.is_dir()):
        print(d)


if __name__ == "__main__":
    main()
