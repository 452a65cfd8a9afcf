"""Build a synthetic demo workspace: scenes, label tiles, legend, config.

The scenes carry deterministic nodata margins and the label tiles overlap
with a deliberate annotation gap on the last scene, so every validity rule
in the pipeline gets exercised by the demo.

Usage:
    python scripts/make_demo_data.py --root /tmp/demo_ws
"""

import argparse

from sarpatch.synthetic import build_workspace


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", required=True, help="workspace directory to create")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenes", type=int, default=3)
    parser.add_argument("--scene-size", type=int, default=512)
    parser.add_argument("--patch-size", type=int, default=64)
    parser.add_argument("--points", type=int, default=400,
                        help="sampling budget written into the config")
    args = parser.parse_args()
    config_path = build_workspace(
        args.root, seed=args.seed, n_scenes=args.scenes,
        scene_size=args.scene_size, patch_size=args.patch_size,
        sample_points=args.points,
    )
    print(f"workspace ready; config at {config_path}")
    print(f"next: python scripts/run_demo.py --config {config_path}")


if __name__ == "__main__":
    main()
