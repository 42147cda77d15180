"""Connectivity reports for two-ingredient interpolation sweeps.

A sweep produces (lambda, metric) pairs along the segment between two
ingredients.  The report compares each metric against the chord, the
straight line between the endpoint metrics: a point is satisfied when
metric >= chord - slack, connectivity holds when every interior point is
satisfied, and the barrier is the largest dip below the chord.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import MissingRows
from .souping import DEFAULT_LMC_SLACK

REPORT_HEADER = ("lambda", "metric", "chord", "satisfied")


def sweep_rows(lambdas, metrics, slack: float = DEFAULT_LMC_SLACK):
    """Per-point report rows (lambda, metric, chord, satisfied), in
    ascending lambda order."""
    if len(lambdas) != len(metrics):
        raise MissingRows(
            f"{len(lambdas)} lambdas but {len(metrics)} metric values"
        )
    if len(lambdas) < 2:
        raise MissingRows("a sweep needs at least its two endpoints")
    pairs = sorted(zip((float(l) for l in lambdas), (float(v) for v in metrics)))
    lams = [l for l, _ in pairs]
    vals = [v for _, v in pairs]
    m0, m1 = vals[0], vals[-1]
    rows = []
    for lam, val in zip(lams, vals):
        chord = (1.0 - lam) * m0 + lam * m1
        rows.append((lam, val, chord, val >= chord - slack))
    return rows


def pair_sweep_report(lambdas, metrics, slack: float = DEFAULT_LMC_SLACK):
    """CSV text plus a summary dict for one sweep.

    With only the two endpoints there is no interior point, so
    connectivity holds vacuously.
    """
    rows = sweep_rows(lambdas, metrics, slack=slack)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for lam, val, chord, ok in rows:
        writer.writerow((repr(lam), repr(val), repr(chord), "true" if ok else "false"))
    interior = rows[1:-1]
    violations = [i + 1 for i, (_l, _v, _c, ok) in enumerate(interior) if not ok]
    barrier = max(max(c - v, 0.0) for _l, v, c, _ok in rows)
    summary = {
        "lmc_holds": not violations,
        "violations": violations,
        "barrier": barrier,
        "slack": float(slack),
        "num_points": len(rows),
    }
    return buf.getvalue(), summary


def report_from_metrics(
    metrics_path: str | Path,
    split: str,
    slack: float = DEFAULT_LMC_SLACK,
):
    """Build the report from a metrics.csv written by a pair sweep.

    Rows whose mixture id is ``lambda_<i>`` carry weights [1-lambda,
    lambda]; other mixture ids are ignored.
    """
    path = Path(metrics_path)
    lambdas: list[float] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if not row["mixture_id"].startswith("lambda_"):
                continue
            if row["split"] != split:
                continue
            weights = json.loads(row["weights"])
            lambdas.append(float(weights[1]))
            values.append(float(row["value"]))
    if not lambdas:
        raise MissingRows(f"no sweep rows for split {split!r} in {path}")
    return pair_sweep_report(lambdas, values, slack=slack)
