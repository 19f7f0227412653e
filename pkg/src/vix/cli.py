"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 data or
runtime error. Every command prints a human-readable table and can write a
schema-versioned JSON report (``--json PATH``) that echoes the resolved config.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import platform
import statistics
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import checkpoint as ckpt_io
from . import configfile
from . import tensor as T
from .complexity import estimate_mixer_peak, mixer_macs
from .errors import CheckpointError, ConfigError, DimensionError, IngestionError, NonFiniteError, VixError
from .mixers import ATTENTION_KINDS, MixerConfig, MixerKind, mix, mixer_param_specs
from .model import build_model, count_params
from .params import init_params
from .presets import PRESETS, paper_target
from .suites import SCOPES, run_case, select
from .training import (
    MetricsLog,
    TrainingError,
    evaluate,
    load_cifar10,
    synth_dataset,
    synth_split,
    train,
)

REPORT_SCHEMA = 1
CSV_SCHEMA = 1
BENCH_COLUMNS = (
    "schema_version", "mixer", "n", "wall_ms_median", "peak_scalars_measured",
    "peak_scalars_estimated", "macs_estimated", "growth", "band", "status",
)
EXACT_MIN_GROWTH = 3.5
LINEAR_MAX_GROWTH = 2.5
ESTIMATE_BAND = 2.0
NOISE_BAND = 0.05

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


# --------------------------------------------------------------------------
# reporting
# --------------------------------------------------------------------------

def environment(seed: int | None) -> dict[str, Any]:
    return {"seed": seed, "precision": "float64", "version": __version__,
            "numpy": np.__version__, "python": platform.python_version()}


def run_report(command: str, config: dict, results: dict, seed: int | None) -> dict:
    return {"schema_version": REPORT_SCHEMA, "command": command, "config": config,
            "results": results, "environment": environment(seed)}


def write_json(path, report: dict) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def table(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _emit(args, report: dict) -> None:
    if getattr(args, "json", None):
        write_json(args.json, report)


# --------------------------------------------------------------------------
# config plumbing
# --------------------------------------------------------------------------

def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="key=value config file")
    p.add_argument("--preset", help=f"named preset ({len(PRESETS)} available; see list-presets)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")


def _resolve(args) -> configfile.RunConfig:
    if not args.config and not args.preset:
        raise ConfigError("give a config file or --preset NAME")
    return configfile.load(args.config, args.set, args.preset)


# --------------------------------------------------------------------------
# count-params
# --------------------------------------------------------------------------

def cmd_count_params(args) -> int:
    run = _resolve(args)
    man = count_params(run.model)
    target = paper_target(run.preset) if run.preset else None
    rows = [(e.name, "x".join(map(str, e.shape)) or "scalar", e.count, "yes" if e.registered else "no")
            for e in man.entries]
    out = [table(rows, ("entry", "shape", "count", "registered")), ""]
    out.append(f"total (all entries)        {man.total:>12,}")
    out.append(f"registered total           {man.registered_total:>12,}")
    out.append(f"mixer subtotal             {man.mixer_total:>12,}")
    out.append(f"embedding subtotal         {man.subtotal('embed.'):>12,}")
    out.append("")
    out.append(table([(r["key"], r["value"], r["params"], r["note"]) for r in man.ledger],
                     ("ledger key", "value", "params", "note")))
    results: dict[str, Any] = {"manifest": man.to_dict(), "mixer_total": man.mixer_total,
                               "embedding_total": man.subtotal("embed.")}
    failed = False
    if target is not None:
        residual = man.registered_total - target
        out.append("")
        out.append(f"reported target ({run.preset})  {target:,}   residual {residual:+,}")
        if residual:
            out.append("residual not explained by the ledger; inspect registered entries above")
        results["target"] = {"preset": run.preset, "reported": target, "residual": residual}
    if args.against:
        other = configfile.resolve({}, {}, args.against)
        om = count_params(other.model)
        delta = man.registered_total - om.registered_total
        out.append("")
        out.append(f"delta vs {args.against}: {delta:+,} registered ({man.total - om.total:+,} all entries)")
        results["delta"] = {"against": args.against, "registered": delta, "total": man.total - om.total}
        t_other = paper_target(args.against)
        if target is not None and t_other is not None:
            expected = target - t_other
            ok = delta == expected
            out.append(f"reported delta {expected:+,}: {'match' if ok else 'MISMATCH'}")
            results["delta"]["reported"] = expected
            failed = not ok
    print("\n".join(out))
    _emit(args, run_report("count-params", run.flat, results, run.model_seed))
    return EXIT_CHECK if failed else EXIT_OK


# --------------------------------------------------------------------------
# gradcheck
# --------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    cases = select(args.scope)
    if args.only:
        wanted = set(args.only.split(","))
        unknown = wanted - {c.name for c in cases}
        if unknown:
            raise ConfigError(f"unknown check(s) in scope {args.scope}: {', '.join(sorted(unknown))}")
        cases = [c for c in cases if c.name in wanted]
    rows, results, failures = [], [], []
    start = time.perf_counter()
    for case in cases:
        rep = run_case(case, args.seed, tol=args.tol)
        worst_in = max(rep.max_rel_error, key=rep.max_rel_error.get) if rep.max_rel_error else "-"
        status = "pass" if rep.passed else "FAIL"
        rows.append((case.scope, case.name, f"{rep.worst:.3e}", worst_in, status))
        results.append({"scope": case.scope, "name": case.name, "worst_rel_error": rep.worst,
                        "worst_input": worst_in, "per_input": rep.max_rel_error, "passed": rep.passed})
        if not rep.passed:
            failures.append(case.name)
    print(table(rows, ("scope", "check", "worst rel err", "at", "status")))
    worst = max((r["worst_rel_error"] for r in results), default=0.0)
    print(f"\n{len(cases) - len(failures)}/{len(cases)} passed, worst {worst:.3e} (tol {args.tol:g}), "
          f"{time.perf_counter() - start:.1f}s")
    if failures:
        print(f"FAILED: {', '.join(failures)}", file=sys.stderr)
    cfg = {"scope": args.scope, "only": args.only, "tol": args.tol, "h": 1e-5}
    _emit(args, run_report("gradcheck", cfg, {"checks": results, "failed": failures, "worst": worst}, args.seed))
    return EXIT_CHECK if failures else EXIT_OK


# --------------------------------------------------------------------------
# bench-scaling
# --------------------------------------------------------------------------

def _ints_arg(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _bench_mixer_config(args, n: int) -> MixerConfig:
    kind = MixerKind(args.mixer)
    kw: dict[str, Any] = {"kind": kind, "heads": args.heads, "dim": args.d, "seq_len": n}
    if kind is MixerKind.LINFORMER:
        kw["proj_rank"] = args.proj_rank
    if kind is MixerKind.NYSTROM:
        kw["landmarks"] = args.landmarks
    if kind is MixerKind.MLPMIX:
        kw["token_mlp_dim"] = args.token_mlp_dim
    return MixerConfig(**kw)


def measure_mixer(cfg: MixerConfig, n: int, batch: int, repeats: int, seed: int) -> tuple[float, int]:
    """Median wall time (ms, after one warmup) and peak live scalars of one inference call."""
    params = init_params(mixer_param_specs(cfg), seed)
    x = T.Tensor(np.random.default_rng(seed).standard_normal((batch, n, cfg.dim)))
    times, peak = [], 0
    with T.no_grad():
        mix(x, cfg, params)
        for _ in range(repeats):
            with T.track_memory() as tracker:
                t0 = time.perf_counter()
                out = mix(x, cfg, params)
                times.append(1e3 * (time.perf_counter() - t0))
                del out
            peak = max(peak, tracker.peak)
    return statistics.median(times), peak


def bench_rows(args) -> tuple[list[dict], list[str]]:
    lengths = args.lengths
    if lengths != sorted(lengths) or len(set(lengths)) != len(lengths):
        raise ConfigError(f"--lengths must be strictly ascending, got {lengths}")
    kind = MixerKind(args.mixer)
    if kind is MixerKind.LINFORMER and args.proj_rank > min(lengths):
        raise ConfigError(f"linformer proj rank {args.proj_rank} exceeds the shortest length {min(lengths)}")
    if kind is MixerKind.NYSTROM and args.landmarks > min(lengths):
        raise ConfigError(f"nystrom landmarks {args.landmarks} exceed the shortest length {min(lengths)}")
    rows, violations, prev = [], [], None
    for n in lengths:
        cfg = _bench_mixer_config(args, n)
        wall, peak = measure_mixer(cfg, n, args.batch, args.repeats, args.seed)
        est = estimate_mixer_peak(cfg, n, args.batch)
        macs = sum(mixer_macs(cfg, n, args.batch).values())
        status = []
        growth = band = ""
        if prev is not None and n == 2 * prev[0]:
            g = peak / prev[1]
            growth = f"{g:.4f}"
            if kind is MixerKind.EXACT:
                band = f">={EXACT_MIN_GROWTH}"
                if g < EXACT_MIN_GROWTH:
                    status.append("growth_below_quadratic_band")
            elif kind in ATTENTION_KINDS:
                band = f"<={LINEAR_MAX_GROWTH}"
                if g > LINEAR_MAX_GROWTH:
                    status.append("growth_above_linear_band")
        ratio = est / peak if peak else math.inf
        if not (1 / ESTIMATE_BAND <= ratio <= ESTIMATE_BAND):
            status.append("estimate_outside_2x")
        for s in status:
            violations.append(f"{kind.value} n={n}: {s}")
        rows.append({
            "schema_version": CSV_SCHEMA, "mixer": kind.value, "n": n,
            "wall_ms_median": f"{wall:.3f}", "peak_scalars_measured": peak,
            "peak_scalars_estimated": est, "macs_estimated": macs,
            "growth": growth, "band": band, "status": ";".join(status) or "ok",
        })
        prev = (n, peak)
    return rows, violations


def cmd_bench_scaling(args) -> int:
    rows, violations = bench_rows(args)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
    print(buf.getvalue(), end="")
    for v in violations:
        print(f"VIOLATION {v}", file=sys.stderr)
    cfg = {k: getattr(args, k) for k in ("mixer", "lengths", "d", "heads", "batch", "repeats", "proj_rank",
                                         "landmarks", "token_mlp_dim", "seed")}
    _emit(args, run_report("bench-scaling", cfg, {"rows": rows, "violations": violations}, args.seed))
    return EXIT_CHECK if violations else EXIT_OK


# --------------------------------------------------------------------------
# approx-error
# --------------------------------------------------------------------------

def shared_weights(d: int, seed: int) -> dict[str, T.Tensor]:
    """Q/K/V/O weights at 1/sqrt(d) scale so the attention pattern is far from uniform."""
    rng = np.random.default_rng([seed, 0])
    out = {}
    for name in ("to_q", "to_k", "to_v", "to_out"):
        out[f"{name}.weight"] = T.Tensor(rng.normal(0.0, d**-0.5, (d, d)))
    out["to_out.bias"] = T.Tensor(np.zeros(d))
    return out


def rel_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def approx_errors(mixers: Sequence[str], n: int, d: int, heads: int, trials: int, seed: int,
                  landmarks: Sequence[int], proj_rank: int, exact_pinv: bool, identity_e: bool) -> dict:
    results: dict[str, dict] = {}
    variants: list[tuple[str, MixerConfig, dict]] = []
    for name in mixers:
        kind = MixerKind(name)
        if kind is MixerKind.NYSTROM:
            for m in landmarks:
                if m > n:
                    raise ConfigError(f"nystrom landmarks {m} exceed n={n}")
                variants.append((f"nystrom[m={m}]", MixerConfig(kind=kind, heads=heads, dim=d, landmarks=m,
                                                                 seq_len=n, exact_pinv=exact_pinv), {}))
        elif kind is MixerKind.LINFORMER:
            k = n if identity_e else proj_rank
            variants.append((f"linformer[k={k}]", MixerConfig(kind=kind, heads=heads, dim=d, proj_rank=k, seq_len=n),
                             {"identity_e": identity_e}))
        elif kind is MixerKind.PERFORMER:
            variants.append(("performer", MixerConfig(kind=kind, heads=heads, dim=d, seq_len=n), {}))
        else:
            raise ConfigError(f"approx-error compares attention approximations; {name} is not one")
    exact_cfg = MixerConfig(kind=MixerKind.EXACT, heads=heads, dim=d, seq_len=n)
    errs: dict[str, list[float]] = {label: [] for label, _, _ in variants}
    with T.no_grad():
        for trial in range(trials):
            w = shared_weights(d, seed + trial)
            x = T.Tensor(np.random.default_rng([seed + trial, 1]).standard_normal((1, n, d)))
            ref = mix(x, exact_cfg, w).data
            for label, cfg, extra in variants:
                p = dict(w)
                if cfg.kind is MixerKind.LINFORMER:
                    if extra["identity_e"]:
                        p["proj_e"] = T.Tensor(np.eye(n))
                    else:
                        p["proj_e"] = T.Tensor(np.random.default_rng([seed + trial, 2]).normal(0, n**-0.5, (n, cfg.proj_rank)))
                errs[label].append(rel_frobenius(mix(x, cfg, p).data, ref))
    for label, vals in errs.items():
        results[label] = {"mean": float(np.mean(vals)), "max": float(np.max(vals)), "trials": len(vals)}
    return results


def nystrom_trend(results: dict, landmarks: Sequence[int], band: float = NOISE_BAND) -> list[str]:
    """Violations of 'mean error non-increasing in m' beyond the relative noise band."""
    out = []
    means = [results[f"nystrom[m={m}]"]["mean"] for m in landmarks if f"nystrom[m={m}]" in results]
    for (m0, e0), (m1, e1) in zip(zip(landmarks, means), zip(landmarks[1:], means[1:])):
        if e1 > e0 * (1 + band):
            out.append(f"nystrom error rose from m={m0} ({e0:.4g}) to m={m1} ({e1:.4g})")
    return out


def cmd_approx_error(args) -> int:
    if args.against != "exact":
        raise ConfigError("only --against exact is supported")
    mixers = [m for m in args.mixers.split(",") if m]
    landmarks = sorted(args.landmarks)
    results = approx_errors(mixers, args.n, args.d, args.heads, args.trials, args.seed, landmarks,
                            args.proj_rank, args.exact_pinv, args.identity_e)
    violations = nystrom_trend(results, landmarks) if "nystrom" in mixers else []
    rows = [(k, f"{v['mean']:.4e}", f"{v['max']:.4e}", v["trials"]) for k, v in results.items()]
    print(table(rows, ("mixer", "mean rel frob err", "max", "trials")))
    if "performer" in mixers:
        print("\nperformer uses a ReLU kernel, not a softmax approximation; its error is reported without a bound")
    for v in violations:
        print(f"VIOLATION {v}", file=sys.stderr)
    cfg = {k: getattr(args, k) for k in ("against", "mixers", "n", "d", "heads", "trials", "seed", "landmarks",
                                         "proj_rank", "exact_pinv", "identity_e")}
    _emit(args, run_report("approx-error", cfg, {"errors": results, "violations": violations}, args.seed))
    return EXIT_CHECK if violations else EXIT_OK


# --------------------------------------------------------------------------
# train / eval
# --------------------------------------------------------------------------

def load_data(run: configfile.RunConfig, data_arg: str | None):
    """Return (train, test) handles; test may be None."""
    source = run.data.source
    directory = run.data.dir
    if data_arg:
        if data_arg == "synthetic":
            source = "synthetic"
        else:
            source, directory = "cifar10", data_arg
    c, h, w = run.model.image_shape
    if source == "synthetic":
        if h != w:
            raise ConfigError("synthetic data is square; set model.image_shape accordingly")
        spec = run.data.synth_spec(channels=c)
        spec = dataclasses.replace(spec, classes=run.model.num_classes, height=h, width=w)
        train_ds = synth_dataset(spec, "train")
        test_ds = synth_split(dataclasses.replace(spec, seed=spec.seed + 1), train_ds, "test")
    else:
        if directory is None:
            raise IngestionError("cifar10 data needs a directory: pass --data DIR or set data.dir")
        if run.model.image_shape != (3, 32, 32) or run.model.num_classes != 10:
            raise ConfigError("cifar10 data needs model.image_shape=3,32,32 and model.num_classes=10")
        train_ds, test_ds = load_cifar10(directory, run.data.limit)
    if run.data.limit:
        train_ds, test_ds = train_ds.subset(run.data.limit), test_ds.subset(run.data.limit)
    return train_ds, test_ds


def _metrics_row(m) -> tuple:
    return (m.split, m.step, f"{m.loss:.4f}", f"{m.top1:.4f}", f"{m.top5:.4f}")


def cmd_train(args) -> int:
    run = _resolve(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = load_data(run, args.data)
    model = build_model(run.model, run.model_seed)
    log = MetricsLog(out / "metrics.jsonl")
    start = time.perf_counter()
    try:
        res = train(model, train_ds, run.train, on_metrics=log)
    finally:
        log.close()
    final_train = evaluate(model, train_ds, run.train.batch_size)
    final_test = evaluate(model, test_ds, run.train.batch_size) if test_ds is not None else None
    for m in (final_train, final_test):
        if m is not None:
            m.step = res.state.step
    ckpt_path = out / "checkpoint.vixf"
    ckpt_io.save(ckpt_path, model, res.state, train_ds.mean, train_ds.std)
    (out / "config.txt").write_text(configfile.dump(run.flat), encoding="utf-8")
    rows = [_metrics_row(final_train)] + ([_metrics_row(final_test)] if final_test else [])
    print(table(rows, ("split", "step", "loss", "top1", "top5")))
    elapsed = time.perf_counter() - start
    print(f"\n{res.state.step} steps in {elapsed:.1f}s; checkpoint {ckpt_path}")
    results = {
        "steps": res.state.step,
        "wall_s": elapsed,
        "initial_loss": res.losses[0] if res.losses else None,
        "final_loss": res.losses[-1] if res.losses else None,
        "train": final_train.record(),
        "test": final_test.record() if final_test else None,
        "checkpoint": str(ckpt_path),
        "metrics_log": str(out / "metrics.jsonl"),
    }
    report = run_report("train", run.flat, results, run.train.seed)
    write_json(out / "report.json", report)
    _emit(args, report)
    return EXIT_OK


def cmd_eval(args) -> int:
    run = _resolve(args)
    model, ck = ckpt_io.restore(args.checkpoint, run.model)
    train_ds, test_ds = load_data(run, args.data)
    ds = train_ds if args.split == "train" else test_ds
    m = evaluate(model, ds, run.train.batch_size)
    m.step = ck.adam.step if ck.adam else 0
    print(table([_metrics_row(m)], ("split", "step", "loss", "top1", "top5")))
    _emit(args, run_report("eval", run.flat, {"metrics": m.record(), "checkpoint": str(args.checkpoint)},
                           run.train.seed))
    return EXIT_OK


def cmd_list_presets(args) -> int:
    rows = [(name, PRESETS[name]["mixer.kind"], PRESETS[name].get("embedding.kind", ""),
             PRESETS[name].get("position.kind", ""), paper_target(name) or "")
            for name in sorted(PRESETS)]
    print(table(rows, ("preset", "mixer", "embedding", "position", "reported params")))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vix", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count-params", help="parameter manifest, convention ledger and reported target")
    _add_config_args(p)
    p.add_argument("--against", help="preset to subtract (e.g. the base model of a hybrid)")
    p.add_argument("--json")
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--scope", choices=("all",) + SCOPES, default="all")
    p.add_argument("--only", help="comma-separated check names within the scope")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--json")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench-scaling", help="wall time and peak live scalars versus sequence length")
    p.add_argument("--mixer", choices=[k.value for k in MixerKind], required=True)
    p.add_argument("--lengths", type=_ints_arg, default=[128, 256, 512, 1024])
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--proj-rank", type=int, default=256)
    p.add_argument("--landmarks", type=int, default=64)
    p.add_argument("--token-mlp-dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_bench_scaling)

    p = sub.add_parser("approx-error", help="relative error of linear mixers against exact attention")
    p.add_argument("--against", default="exact")
    p.add_argument("--mixers", default="nystrom,linformer,performer")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--landmarks", type=_ints_arg, default=[8, 16, 32, 64])
    p.add_argument("--proj-rank", type=int, default=64)
    p.add_argument("--exact-pinv", action="store_true", help="SVD pseudo-inverse in the Nystrom path")
    p.add_argument("--identity-e", action="store_true", help="Linformer with E = I and k = n")
    p.add_argument("--json")
    p.set_defaults(func=cmd_approx_error)

    p = sub.add_parser("train", help="train a model; writes metrics, checkpoint and report")
    _add_config_args(p)
    p.add_argument("--data", help="'synthetic' or a CIFAR-10 binary directory (default: config data.*)")
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("list-presets", help="named configurations")
    p.set_defaults(func=cmd_list_presets)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, CheckpointError, TrainingError, NonFiniteError, DimensionError, VixError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
