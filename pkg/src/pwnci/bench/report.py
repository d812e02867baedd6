"""Coverage aggregation and CSV / text-table emission.

Coverage CSV (schema version 1), preceded by one ``#`` comment line::

    method,target,alpha1,alpha2,coordinate,active,coverage,mean_half_width

``method`` is ``delta`` for the proposed intervals or ``baseline``;
``coordinate`` is 1-based; ``active`` is 1 when the true value is nonzero.
Only values derived from the replications appear, so the file is
byte-identical for identical configurations.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

CSV_VERSION = 1
CSV_HEADER = (
    "method",
    "target",
    "alpha1",
    "alpha2",
    "coordinate",
    "active",
    "coverage",
    "mean_half_width",
)
FIVE_NUMBER = ("MIN", "Q1", "MEDIAN", "Q3", "MAX")


def five_number(rates) -> dict:
    """MIN/Q1/MEDIAN/Q3/MAX by linear interpolation; empty input gives NaNs."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        return {k: float("nan") for k in FIVE_NUMBER}
    q = np.quantile(rates, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return dict(zip(FIVE_NUMBER, map(float, q)))


@dataclass
class CoverageBlock:
    """Per-coordinate coverage of one interval method at one budget."""

    method: str
    target: str
    alphas: tuple
    coverage: np.ndarray
    mean_width: np.ndarray
    active: np.ndarray

    def summary(self) -> dict:
        return five_number(self.coverage[self.active])

    def inactive_min(self) -> float:
        rest = self.coverage[~self.active]
        return float(rest.min()) if rest.size else float("nan")


@dataclass
class CoverageSummary:
    n_reps: int
    n_ok: int
    n_degenerate: int
    n_failed: int
    blocks: list = field(default_factory=list)
    region_coverage: dict = field(default_factory=dict)
    cell_histogram: dict = field(default_factory=dict)

    def block(self, method: str, target: str, alphas=None) -> CoverageBlock:
        for b in self.blocks:
            if b.method == method and b.target == target and (alphas is None or b.alphas == tuple(alphas)):
                return b
        raise KeyError((method, target, alphas))


def aggregate(records, problem) -> CoverageSummary:
    """Coverage rates over the valid (non-degenerate) replications."""
    ok = [r for r in records if r.ok]
    summ = CoverageSummary(
        n_reps=len(records),
        n_ok=len(ok),
        n_degenerate=sum(r.status == "degenerate" for r in records),
        n_failed=sum(r.status == "failed" for r in records),
    )
    if not ok:
        return summ
    act_z = np.asarray(problem.active_z, dtype=bool)
    act_x = np.asarray(problem.active_x, dtype=bool)
    for k, first in enumerate(ok[0].budgets):
        res = [r.budgets[k] for r in ok]
        a = first.alphas
        for target, hits, widths, act in (
            ("z0", "z_hits", "z_width", act_z),
            ("x0", "x_hits", "x_width", act_x),
        ):
            h = np.array([getattr(b, hits) for b in res], dtype=float)
            w = np.array([getattr(b, widths) for b in res], dtype=float)
            summ.blocks.append(CoverageBlock("delta", target, a, h.mean(axis=0), w.mean(axis=0), act))
        summ.region_coverage[a] = float(np.mean([b.region_hit for b in res]))
        summ.cell_histogram[a] = dict(sorted(Counter(b.cell for b in res).items()))
    if ok[0].baseline is not None:
        for target, act in (("z0", act_z), ("x0", act_x)):
            t = target[0]
            h = np.array([r.baseline[f"{t}_hits"] for r in ok], dtype=float)
            w = np.array([r.baseline[f"{t}_width"] for r in ok], dtype=float)
            summ.blocks.append(CoverageBlock("baseline", target, (0.0, 0.0), h.mean(axis=0), w.mean(axis=0), act))
    return summ


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def coverage_csv(summary: CoverageSummary, cfg=None) -> str:
    buf = io.StringIO()
    buf.write(f"# pwnci coverage csv v{CSV_VERSION}")
    if cfg is not None:
        buf.write(f" config={cfg.to_json()}")
    buf.write("\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for b in summary.blocks:
        for j, (c, m, act) in enumerate(zip(b.coverage, b.mean_width, b.active), start=1):
            w.writerow(
                [b.method, b.target, _fmt(b.alphas[0]), _fmt(b.alphas[1]), j, int(act), _fmt(c), f"{m:.8e}"]
            )
    return buf.getvalue()


def raw_csv(records) -> str:
    """One row per replication, budget and coordinate."""
    buf = io.StringIO()
    buf.write(f"# pwnci replications csv v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "status", "alpha1", "alpha2", "cell", "region_hit", "target", "coordinate", "hit", "half_width"])
    for r in records:
        if not r.ok:
            w.writerow([r.rep, r.status, "", "", "", "", "", "", "", ""])
            continue
        for b in r.budgets:
            for target, hits, widths in (("z0", b.z_hits, b.z_width), ("x0", b.x_hits, b.x_width)):
                for j, (h, wd) in enumerate(zip(hits, widths), start=1):
                    w.writerow(
                        [r.rep, r.status, _fmt(b.alphas[0]), _fmt(b.alphas[1]), b.cell,
                         int(b.region_hit), target, j, int(h), f"{wd:.8e}"]
                    )
    return buf.getvalue()


def _pct(x):
    return "   n/a" if np.isnan(x) else f"{100 * x:5.1f}%"


def coverage_table(summary: CoverageSummary, title: str = "") -> str:
    """Five-number summaries over active coordinates, one column per budget."""
    out = []
    if title:
        out.append(title)
    out.append(
        f"replications: {summary.n_reps} (valid {summary.n_ok}, degenerate "
        f"{summary.n_degenerate}, failed {summary.n_failed})"
    )
    for target in ("z0", "x0"):
        blocks = [b for b in summary.blocks if b.target == target]
        if not blocks:
            continue
        if not blocks[0].active.any():
            out.append(f"\nCoverage for ({target})_j: no active coordinates")
            continue
        heads = [
            "baseline" if b.method == "baseline" else f"({b.alphas[0]:g},{b.alphas[1]:g})" for b in blocks
        ]
        width = max(13, *(len(h) + 2 for h in heads))
        out.append(f"\nCoverage for ({target})_j over active coordinates")
        out.append("        " + "".join(h.rjust(width) for h in heads))
        sums = [b.summary() for b in blocks]
        for k in FIVE_NUMBER:
            out.append(f"{k:<8}" + "".join(_pct(s[k]).rjust(width) for s in sums))
        out.append(f"{'inactive':<8}" + "".join(("min " + _pct(b.inactive_min())).rjust(width) for b in blocks))
    if summary.region_coverage:
        out.append("\nConfidence-region coverage (z0 in Q_N)")
        for a, v in summary.region_coverage.items():
            out.append(f"  alpha1={a[0]:g}: {_pct(v)}")
        out.append("\nSelected cells (pattern: count)")
        for a, hist in summary.cell_histogram.items():
            top = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
            desc = ", ".join(f"{k}: {v}" for k, v in top)
            more = f" (+{len(hist) - 5} more)" if len(hist) > 5 else ""
            out.append(f"  ({a[0]:g},{a[1]:g}) {desc}{more}")
    return "\n".join(out) + "\n"


def emit(summary: CoverageSummary, out_dir, fmt: str = "csv", cfg=None, records=None) -> list:
    """Write ``coverage.csv`` / ``summary.txt`` (and ``replications.csv`` when
    ``records`` is given) into ``out_dir``; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt in ("csv", "both"):
        p = os.path.join(out_dir, "coverage.csv")
        with open(p, "w", newline="") as fh:
            fh.write(coverage_csv(summary, cfg))
        paths.append(p)
    if fmt in ("table", "both"):
        p = os.path.join(out_dir, "summary.txt")
        with open(p, "w") as fh:
            fh.write(coverage_table(summary, title=cfg.problem_name if cfg else ""))
        paths.append(p)
    if records is not None:
        p = os.path.join(out_dir, "replications.csv")
        with open(p, "w", newline="") as fh:
            fh.write(raw_csv(records))
        paths.append(p)
    return paths
