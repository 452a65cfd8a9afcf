"""Run the full pipeline over a workspace and summarize each stage.

Chains downsample -> labels -> patchify -> sample -> loss-check through
the same entry points the CLI uses, then prints the numbers worth reading
from each report.

Usage:
    python scripts/run_demo.py --config /tmp/demo_ws/config.ini
"""

import argparse
import sys

from sarpatch.cli import main as cli_main
from sarpatch.config import load_config, resolve_path
from sarpatch.patches import read_manifest


def run_stage(stage, config, seed, jobs, out):
    code = cli_main([
        stage, "--config", config, "--seed", str(seed),
        "--jobs", str(jobs), "--out", str(out),
    ])
    if code != 0:
        sys.exit(f"{stage} exited with {code}; see stderr above")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="workspace INI config")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    cfg = load_config(args.config)
    reports_dir = resolve_path(cfg, "reports_dir")
    reports_dir.mkdir(parents=True, exist_ok=True)

    import json

    for stage in ("downsample", "labels", "patchify", "sample", "loss-check"):
        out = reports_dir / f"demo_{stage}.json"
        run_stage(stage, args.config, args.seed, args.jobs, out)
        report = json.loads(out.read_text())
        if stage == "downsample":
            print(f"downsample: {len(report['scenes'])} scenes halved")
        elif stage == "labels":
            print(f"labels:     {len(report['scenes'])} scenes mosaicked and masked")
        elif stage == "patchify":
            print(f"patchify:   {report['patches_total']} valid patches "
                  f"of size {report['patch_size']}")
        elif stage == "sample":
            print(f"sample:     {report['points_drawn']} points -> "
                  f"{report['patches_after_forest_filter']} patches "
                  f"(splits {report['split_counts']})")
        else:
            grads = report["gradient_checks"]
            print(f"loss-check: gradients pass={grads['pass']} "
                  f"(threshold {grads['threshold']})")

    manifest = resolve_path(cfg, "patches_dir") / "manifest_sampled.jsonl"
    records = read_manifest(manifest)
    by_split = {}
    for record in records:
        by_split.setdefault(record.split, []).append(record)
    print(f"\n{manifest}:")
    for split in sorted(by_split):
        classes = set()
        for record in by_split[split]:
            classes.update(record.class_histogram)
        print(f"  {split:5s} {len(by_split[split]):4d} patches, "
              f"classes {sorted(classes)}")


if __name__ == "__main__":
    main()
