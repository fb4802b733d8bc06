"""Command-line interface.

Subcommands: ``bench`` (run a suite), ``run`` (single optimisation run),
``ablate`` (kappa sweep) and ``report`` (re-aggregate persisted records into
CSV/JSON plus figures). Exit codes: 0 success, 1 configuration error, 2 run
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, reporting
from .acquisition import AcquisitionError
from .blackbox import BUILTIN_IDS, BlackBoxError
from .design import DesignError
from .optimizer import METHODS, ConfigError, RunConfig, RunFailure, RunRecord, run
from .statdist import StatDistError

CONFIG_KEYS = {
    "n_init": int,
    "n_sample": int,
    "budget": int,
    "epsilon": float,
    "kappa": float,
    "candidates_kind": str,
    "candidates_size": int,
    "warm_start": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "repeats": int,
    "seed": int,
    "method": str,
}


class CliError(Exception):
    pass


def parse_config_file(path: str) -> dict:
    """Flat key = value file; '#' starts a comment, blank lines ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise CliError(f"{path}:{ln}: unknown config key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise CliError(f"{path}:{ln}: bad value for {key}: {value!r}") from exc
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--kappa", type=float, default=None, help="exploration coefficient")
    p.add_argument("--budget", type=int, default=None, help="simulator calls after init")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--n-init", type=int, default=None, dest="n_init")
    p.add_argument("--n-sample", type=int, default=None, dest="n_sample")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--no-warm-start", action="store_true",
                   help="retrain the generative surrogate from scratch each iteration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wugo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run an experiment suite")
    b.add_argument("--suite", default="builtin", choices=["builtin"])
    b.add_argument("--experiments", default=None,
                   help="comma-separated subset of the suite (default: all)")
    b.add_argument("--method", required=True)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--repeats", type=int, default=None)
    b.add_argument("--parallel", type=int, default=1)
    b.add_argument("--no-figures", action="store_true")
    _add_common(b)

    r = sub.add_parser("run", help="one optimisation run")
    r.add_argument("--blackbox", required=True)
    r.add_argument("--method", required=True)
    r.add_argument("--out", default=None, help="directory for the run record")
    _add_common(r)

    a = sub.add_parser("ablate", help="kappa sweep on one experiment")
    a.add_argument("--blackbox", required=True)
    a.add_argument("--kappas", required=True, help="comma-separated kappa values")
    a.add_argument("--method", default="wugo_wgan")
    a.add_argument("--out", required=True)
    a.add_argument("--repeats", type=int, default=None)
    a.add_argument("--parallel", type=int, default=1)
    a.add_argument("--no-figures", action="store_true")
    _add_common(a)

    p = sub.add_parser("report", help="aggregate persisted records and emit files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--out", default=None, help="defaults to the input directory")
    p.add_argument("--no-figures", action="store_true")
    return ap


def gather_settings(args) -> dict:
    """Built-in defaults < config file < explicit flags."""
    settings = parse_config_file(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    if getattr(args, "no_warm_start", False):
        settings["warm_start"] = False
    return settings


def _overrides(settings: dict) -> dict:
    return {
        k: v
        for k, v in settings.items()
        if k in ("n_init", "n_sample", "budget", "epsilon", "candidates_kind",
                 "candidates_size", "warm_start")
    }


def _print_summary(report: bench.MetricsReport) -> None:
    print(f"{'experiment':24s} {'method':12s} {'p':>6s} {'stderr':>7s} {'dist@50':>9s}")
    for r in report.rows:
        print(
            f"{r.experiment:24s} {r.method:12s} {r.eps_probability:6.2f} "
            f"{r.eps_stderr:7.3f} {r.dist50_mean:9.4g}"
        )


def cmd_bench(args) -> int:
    settings = gather_settings(args)
    experiments = (
        [e.strip() for e in args.experiments.split(",") if e.strip()]
        if args.experiments
        else list(bench.BUILTIN_SUITE)
    )
    out_dir = Path(args.out)
    report = bench.run_suite(
        experiments,
        settings.get("method", args.method),
        base_seed=settings.get("seed", 42),
        repeats=settings.get("repeats", bench.DEFAULT_REPEATS),
        kappa=settings.get("kappa", 2.0),
        out_dir=out_dir,
        parallel=args.parallel,
        overrides=_overrides(settings),
        log=lambda cfg, rec: print(
            f"[{cfg.blackbox} seed={cfg.seed}] {rec.status} "
            f"calls={rec.n_simulator_calls} best={rec.distances()[-1]:.4g}"
        ),
    )
    reporting.emit_report(report, "csv", out_dir)
    if not args.no_figures:
        reporting.render_figures(report, out_dir)
    _print_summary(report)
    failed = sum(r.n_failed for r in report.rows)
    if failed:
        print(f"{failed} run(s) aborted", file=sys.stderr)
        return 2
    return 0


def cmd_run(args) -> int:
    settings = gather_settings(args)
    exp = bench.BUILTIN_SUITE.get(args.blackbox)
    cfg = RunConfig(
        blackbox=args.blackbox,
        n_init=settings.get("n_init", exp.n_init if exp else 4),
        n_sample=settings.get("n_sample", exp.n_sample if exp else 100),
        method=settings.get("method", args.method),
        budget=settings.get("budget", 100),
        epsilon=settings.get("epsilon", 0.1),
        kappa=settings.get("kappa", 2.0),
        candidates_kind=settings.get("candidates_kind", ""),
        candidates_size=settings.get("candidates_size", 0),
        warm_start=settings.get("warm_start", True),
        seed=settings.get("seed", 0),
    )
    try:
        record = run(cfg, log=lambda it, best: print(f"iter {it:3d} best distance {best:.4g}"))
    except RunFailure as exc:
        record = exc.record
    if args.out:
        path = bench.record_path(Path(args.out), cfg)
        bench.save_record(path, record)
        print(f"record written to {path}")
    print(
        f"{cfg.blackbox} / {cfg.method}: {record.status} after "
        f"{record.n_simulator_calls} simulator calls, best distance "
        f"{record.distances()[-1]:.4g}"
    )
    return 2 if record.status == "aborted" else 0


def cmd_ablate(args) -> int:
    settings = gather_settings(args)
    try:
        kappas = [float(k) for k in args.kappas.split(",") if k.strip()]
    except ValueError as exc:
        raise CliError(f"bad --kappas: {exc}") from exc
    if not kappas:
        raise CliError("--kappas is empty")
    out_dir = Path(args.out)
    reports = bench.ablation_kappa(
        args.blackbox,
        kappas,
        repeats=settings.get("repeats", 5),
        base_seed=settings.get("seed", 42),
        method=settings.get("method", args.method),
        out_dir=out_dir,
        parallel=args.parallel,
        overrides=_overrides(settings),
        log=lambda cfg, rec: print(
            f"[kappa={cfg.kappa:g} seed={cfg.seed}] {rec.status} "
            f"calls={rec.n_simulator_calls}"
        ),
    )
    merged = bench.MetricsReport(rows=[rep.rows[0] for rep in reports.values()])
    for row in merged.rows:
        print(f"kappa={row.kappa:<6g} p={row.eps_probability:.2f} +- {row.eps_stderr:.3f}")
    reporting.emit_report(merged, "csv", out_dir, kappa_tag=True)
    ablation_csv = out_dir / f"ablation_{args.blackbox}.csv"
    reporting.write_atomic(
        ablation_csv,
        "kappa,p,stderr,dist50_mean,dist50_std\n"
        + "".join(
            f"{row.kappa:g},{row.eps_probability:.6g},{row.eps_stderr:.6g},"
            f"{row.dist50_mean:.6g},{row.dist50_std:.6g}\n"
            for row in merged.rows
        ),
    )
    if not args.no_figures:
        reporting.render_ablation_figure(reports, args.blackbox, out_dir)
    return 0


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    rec_dir = in_dir / "records"
    if not rec_dir.is_dir():
        raise CliError(f"no records directory under {in_dir}")
    groups: dict[tuple[str, str, float], list[RunRecord]] = {}
    for path in sorted(rec_dir.glob("*.json")):
        d = json.loads(path.read_text())
        rec = RunRecord.from_dict(d)
        key = (rec.config["blackbox"], rec.config["method"], rec.config["kappa"])
        groups.setdefault(key, []).append(rec)
    if not groups:
        raise CliError(f"no records found in {rec_dir}")
    report = bench.MetricsReport()
    tag_kappa = len({k[2] for k in groups}) > 1
    for (exp, method, kappa), recs in sorted(groups.items()):
        budget = max(r.config["budget"] for r in recs)
        report.rows.append(bench.aggregate(exp, method, recs, kappa, budget))
    out_dir = Path(args.out) if args.out else in_dir
    written = reporting.emit_report(report, args.format, out_dir, kappa_tag=tag_kappa)
    if not args.no_figures:
        written += reporting.render_figures(report, out_dir, kappa_tag=tag_kappa)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "bench": cmd_bench,
        "run": cmd_run,
        "ablate": cmd_ablate,
        "report": cmd_report,
    }[args.command]
    try:
        return handler(args)
    except (CliError, ConfigError, AcquisitionError, BlackBoxError, DesignError,
            StatDistError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
