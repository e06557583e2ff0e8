"""Run reports: one JSON document plus a flat CSV of adaptations."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .runner import ReplicationResult
from .stats import MetricsReport, aggregate

REPORT_FILE = "report.json"
ADAPTATIONS_FILE = "adaptations.csv"
ADAPTATION_COLUMNS = ("scenario_id", "scale", "replication_index", "seed", "requirement_id", "case",
                      "response_time_ms", "precision", "recall", "f_measure", "dataset_size",
                      "iteration", "operationalization")


def write_report(out_dir, results, metrics: MetricsReport = None) -> MetricsReport:
    """Write ``report.json`` and ``adaptations.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = list(results)
    if metrics is None:
        metrics = aggregate(results)
    doc = {
        "metadata": {"seed": metrics.seed, "scale": metrics.scale,
                     "replications": metrics.replications},
        "metrics": metrics.to_dict(),
        "results": [r.to_dict() for r in results],
    }
    (out / REPORT_FILE).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    with open(out / ADAPTATIONS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ADAPTATION_COLUMNS)
        for r in results:
            for a in r.adaptations:
                m = a.measures
                w.writerow([r.scenario_id, r.scale, r.replication_index, r.seed, a.requirement_id,
                            a.case, repr(a.response_time_ms),
                            "" if m is None else repr(m.precision),
                            "" if m is None else repr(m.recall),
                            "" if m is None else repr(m.f_measure),
                            a.dataset_size, a.iteration, a.operationalization])
    return metrics


def read_report(in_dir) -> tuple[list[ReplicationResult], MetricsReport]:
    """Results and metrics as persisted by :func:`write_report`."""
    path = Path(in_dir) / REPORT_FILE
    doc = json.loads(path.read_text(encoding="utf-8"))
    results = [ReplicationResult.from_dict(d) for d in doc["results"]]
    return results, MetricsReport.from_dict(doc["metrics"])


def reaggregate(in_dir) -> MetricsReport:
    results, stored = read_report(in_dir)
    return aggregate(results, seed=stored.seed, scale=stored.scale)
