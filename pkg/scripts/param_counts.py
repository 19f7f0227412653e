"""Registered parameter counts for every paper-geometry preset against the reported values."""

from vix.configfile import model_config_for
from vix.model import count_params
from vix.presets import PAPER_TARGETS


def main() -> int:
    bad = 0
    print(f"{'preset':24s} {'registered':>11s} {'reported':>11s} {'residual':>9s} {'all entries':>12s}")
    for name, target in PAPER_TARGETS.items():
        man = count_params(model_config_for(name))
        residual = man.registered_total - target
        bad += residual != 0
        print(f"{name:24s} {man.registered_total:>11,} {target:>11,} {residual:>+9,} {man.total:>12,}")
    print("\nhybrid - base (registered):")
    for name in PAPER_TARGETS:
        if name.startswith("hybrid-"):
            base = name.removeprefix("hybrid-")
            delta = count_params(model_config_for(name)).registered_total - count_params(model_config_for(base)).registered_total
            print(f"  {name:24s} {delta:+,}")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
