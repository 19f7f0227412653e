"""Peak live scalars and wall time per mixer at n = 256, 512, 1024; one CSV per mixer."""

import argparse
from pathlib import Path

from vix.cli import main as vix


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/scaling")
    ap.add_argument("--lengths", default="256,512,1024")
    ap.add_argument("--repeats", default="3")
    args = ap.parse_args()
    out = Path(args.out)
    worst = 0
    for mixer in ("exact", "performer", "linformer", "nystrom", "fourier", "mlpmix"):
        code = vix(["bench-scaling", "--mixer", mixer, "--lengths", args.lengths, "--repeats", args.repeats,
                    "--csv", str(out / f"{mixer}.csv"), "--json", str(out / f"{mixer}.json")])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
