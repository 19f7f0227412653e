"""Train every desk-scale preset on synthetic gratings and summarize final accuracy."""

import argparse
import json
from pathlib import Path

from vix.cli import main as vix
from vix.presets import ARCH_MIXER


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/tiny")
    ap.add_argument("--archs", default=",".join(ARCH_MIXER))
    ap.add_argument("--hybrid", action="store_true", help="use the conv-stem variants")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()
    summary = {}
    for arch in args.archs.split(","):
        preset = f"tiny-{'hybrid-' if args.hybrid else ''}{arch}"
        run_dir = Path(args.out) / preset
        sets = [x for kv in args.set for x in ("--set", kv)]
        code = vix(["train", "--preset", preset, "--data", "synthetic", "--out", str(run_dir), *sets])
        if code:
            return code
        rep = json.loads((run_dir / "report.json").read_text())["results"]
        summary[preset] = {"train_top1": rep["train"]["top1"], "test_top1": rep["test"]["top1"],
                           "final_loss": rep["final_loss"], "wall_s": round(rep["wall_s"], 1)}
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
