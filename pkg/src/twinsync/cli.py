"""Command-line entry point.

    twinsync identify --config cfg.yaml --out DIR
    twinsync run      --config cfg.yaml --arch all --out DIR
    twinsync compare  --out DIR

Outputs are pure functions of (config, seed): no timestamps, fixed float
formatting, so re-running a command reproduces byte-identical files.
"""
import argparse
import math
import sys
from pathlib import Path

from . import metrics
from .config import ConfigError, load_config, load_model, save_model
from .twin import Scenario, run_architecture

_ARCHS = (1, 2, 3)


def _scenario(args, arch=None):
    cfg = load_config(args.config)
    return Scenario.from_config(cfg, arch=arch, seed=args.seed,
                                duration=getattr(args, "duration", None)), cfg


def _ensure_model(scenario, out):
    path = out / "model.yaml"
    if path.exists():
        mdl, meta = load_model(path)
        scenario.model = mdl
        scenario.model_fit = meta.get("fit")
    else:
        mdl, fit = scenario.identify()
        save_model(mdl, path, fit=float(fit), seed=scenario.seed,
                   orders=[scenario.orders.na, scenario.orders.nb,
                           scenario.orders.nk])
    return path


def cmd_identify(args):
    scenario, _ = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mdl, fit = scenario.identify()
    path = out / "model.yaml"
    save_model(mdl, path, fit=float(fit), seed=scenario.seed,
               orders=[scenario.orders.na, scenario.orders.nb,
                       scenario.orders.nk])
    print(f"identified model (n={mdl.n}) written to {path}")
    print(f"validation fit: {fit:.2f}%")
    return 0


def cmd_run(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archs = _ARCHS if args.arch == "all" else (int(args.arch),)
    scenario, cfg = _scenario(args)
    _ensure_model(scenario, out)
    summaries = []
    for a in archs:
        trace = run_architecture(scenario, a)
        trace.to_csv(out / f"trace_arch{a}.csv")
        summary = metrics.summarize(trace, scenario.divergence_bound)
        (out / f"summary_arch{a}.txt").write_text(summary.record())
        summaries.append(summary)
        print(_oneline(summary))
    if len(summaries) >= 2:
        _write_comparison(summaries, out / "comparison.csv")
        print(f"comparison written to {out / 'comparison.csv'}")
    return 0


def cmd_compare(args):
    out = Path(args.out)
    summaries = []
    for a in _ARCHS:
        path = out / f"summary_arch{a}.txt"
        if path.exists():
            summaries.append(metrics.RunSummary.parse(path.read_text()))
    if len(summaries) < 2:
        raise ConfigError(
            f"need at least two architecture summaries in {out}, "
            f"found {len(summaries)}")
    _write_comparison(summaries, out / "comparison.csv")
    for line in _table(summaries):
        print(line)
    return 0


def _sorted(summaries):
    return sorted(summaries, key=lambda s: (s.mean_abs_error_full, s.arch))


def _settle_cell(s):
    if s.diverged:
        return ""
    if math.isinf(s.settling_time):
        return "never"
    return f"{s.settling_time:.17g}"


def _write_comparison(summaries, path):
    with open(path, "w") as f:
        f.write("architecture,mean_abs_error_full,mean_abs_error_steady,"
                "settling_time,diverged\n")
        for s in _sorted(summaries):
            steady = "" if math.isnan(s.mean_abs_error_steady) \
                else f"{s.mean_abs_error_steady:.17g}"
            f.write(f"{s.arch},{s.mean_abs_error_full:.17g},{steady},"
                    f"{_settle_cell(s)},{str(s.diverged).lower()}\n")


def _table(summaries):
    yield f"{'arch':>4}  {'mean|e| full':>13}  {'mean|e| steady':>14}  " \
          f"{'settling':>9}  diverged"
    for s in _sorted(summaries):
        steady = "" if math.isnan(s.mean_abs_error_steady) \
            else f"{s.mean_abs_error_steady:.4g}"
        settle = _settle_cell(s)
        if settle not in ("", "never"):
            settle = f"{s.settling_time:.4g}"
        yield f"{s.arch:>4}  {s.mean_abs_error_full:>13.4g}  {steady:>14}  " \
              f"{settle:>9}  {str(s.diverged).lower()}"


def _oneline(s):
    parts = [f"arch {s.arch}: mean|e|={s.mean_abs_error_full:.4g}"]
    if not math.isnan(s.mean_abs_error_steady):
        parts.append(f"steady={s.mean_abs_error_steady:.4g}")
    parts.append("settling=never" if math.isinf(s.settling_time)
                 else f"settling={s.settling_time:.4g}s")
    if s.diverged:
        parts.append(f"DIVERGED at {s.diverged_at:.4g}s")
    return "  ".join(parts)


def build_parser():
    p = argparse.ArgumentParser(
        prog="twinsync",
        description="Compare digital-twin synchronization architectures for "
                    "a networked ball-and-beam loop.")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("identify", help="collect data and fit the twin model")
    pr = sub.add_parser("run", help="run one or all architectures")
    pc = sub.add_parser("compare", help="tabulate existing run summaries")

    for sp in (pi, pr):
        sp.add_argument("--config", default=None,
                        help="scenario config file (default: packaged)")
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed override")
    pr.add_argument("--arch", choices=["1", "2", "3", "all"], default="all")
    pr.add_argument("--duration", type=float, default=None,
                    help="run length override, s")
    for sp in (pi, pr, pc):
        sp.add_argument("--out", default="out", help="output directory")

    pi.set_defaults(func=cmd_identify)
    pr.set_defaults(func=cmd_run)
    pc.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
