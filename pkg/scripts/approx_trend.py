"""Relative error of Nystrom, Linformer and ReLU-kernel attention against exact attention."""

import sys

from vix.cli import main as vix

if __name__ == "__main__":
    argv = sys.argv[1:] or ["--n", "256", "--trials", "5", "--landmarks", "8,16,32,64",
                            "--json", "results/approx_error.json"]
    raise SystemExit(vix(["approx-error", *argv]))
