"""Report emission: delimited curve/summary files, a JSON mirror, and rendered
convergence figures next to them.

Numeric CSV cells use 6 significant digits and "\n" line endings; files are
written atomically (temp file + rename). The JSON mirror keeps full float
precision so a report round-trips exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import MethodMetrics, MetricsReport  # noqa: E402


def _g6(x: float) -> str:
    return f"{x:.6g}"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(header: list[str], rows: list[list[str]]) -> str:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def curve_filename(experiment: str, method: str, kappa: float | None = None) -> str:
    tag = method if kappa is None else f"{method}_kappa{kappa:g}"
    return f"curves_{experiment}_{tag}.csv"


def emit_report(report: MetricsReport, fmt: str = "csv", out_dir: Path | str = ".",
                kappa_tag: bool = False) -> list[Path]:
    """Write the report to out_dir; returns the written paths.

    ``csv`` writes one curve file per (experiment, method) plus summary.csv,
    and always the summary.json mirror; ``json`` writes the mirror only.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    out_dir = Path(out_dir)
    written: list[Path] = []

    if fmt == "csv":
        for row in report.rows:
            path = out_dir / curve_filename(
                row.experiment, row.method, row.kappa if kappa_tag else None
            )
            body = _csv(
                ["iteration", "mean", "std"],
                [
                    [str(i), _g6(m), _g6(s)]
                    for i, (m, s) in enumerate(zip(row.curve_mean, row.curve_std))
                ],
            )
            write_atomic(path, body)
            written.append(path)
        summary = out_dir / "summary.csv"
        write_atomic(
            summary,
            _csv(
                ["experiment", "method", "p", "stderr", "dist50_mean", "dist50_std"],
                [
                    [
                        r.experiment,
                        r.method,
                        _g6(r.eps_probability),
                        _g6(r.eps_stderr),
                        _g6(r.dist50_mean),
                        _g6(r.dist50_std),
                    ]
                    for r in report.rows
                ],
            ),
        )
        written.append(summary)

    mirror = out_dir / "summary.json"
    write_atomic(mirror, json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    written.append(mirror)
    return written


def load_report(path: Path | str) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# figures


def render_figures(report: MetricsReport, out_dir: Path | str,
                   kappa_tag: bool = False) -> list[Path]:
    """One convergence figure per experiment (a curve per method), saved as PNG."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_exp: dict[str, list[MethodMetrics]] = {}
    for row in report.rows:
        by_exp.setdefault(row.experiment, []).append(row)

    written: list[Path] = []
    for exp, rows in by_exp.items():
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for row in rows:
            x = range(len(row.curve_mean))
            mean = row.curve_mean
            std = row.curve_std
            label = row.method if not kappa_tag else f"{row.method} (kappa={row.kappa:g})"
            (line,) = ax.plot(x, mean, label=label, linewidth=1.6)
            ax.fill_between(
                x,
                [m - s for m, s in zip(mean, std)],
                [m + s for m, s in zip(mean, std)],
                alpha=0.2,
                color=line.get_color(),
                linewidth=0,
            )
        ax.set_xlabel("simulator calls")
        ax.set_ylabel("distance to optimum")
        ax.set_title(exp)
        ax.set_ylim(bottom=0)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"convergence_{exp}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_ablation_figure(reports_by_kappa: dict[float, MetricsReport],
                           experiment: str, out_dir: Path | str) -> Path:
    """Epsilon-solution probability (with stderr bars) versus kappa."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kappas = sorted(reports_by_kappa)
    ps, errs = [], []
    for k in kappas:
        row = reports_by_kappa[k].row(experiment, reports_by_kappa[k].rows[0].method)
        ps.append(row.eps_probability)
        errs.append(row.eps_stderr)
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    ax.errorbar(kappas, ps, yerr=errs, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("kappa")
    ax.set_ylabel("eps-solution probability")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{experiment}: exploration coefficient sweep")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / f"ablation_{experiment}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
