"""Aggregate statistics over replication results."""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from ..reqmodel import CaseKind

MINING_CASES = {k.value for k in CaseKind if k.needs_mining}


class UndefinedCorrelation(ValueError):
    """A correlation was asked of data with no variance."""


def ppmcc(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson product-moment correlation of two equally long samples."""
    if len(xs) != len(ys):
        raise ValueError("samples differ in length")
    if len(xs) < 2:
        raise UndefinedCorrelation("need at least two pairs")
    mx = math.fsum(xs) / len(xs)
    my = math.fsum(ys) / len(ys)
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("a sample has zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def sample_size(N: int, Z: float, e: float, p: float, q: float) -> float:
    """Replications needed for a finite population of ``N`` at margin ``e``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if e <= 0:
        raise ValueError("e must be positive")
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p and q must lie in [0, 1]")
    zpq = Z * Z * p * q
    return zpq * N / (e * e * (N - 1) + zpq)


def mean_sd(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation; a single value has sd 0."""
    if not values:
        raise ValueError("no values")
    m = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return m, sd


@dataclass
class ScenarioMetrics:
    scenario_id: str
    scale: float
    replications: int
    adapted: int
    mean_response_ms: Optional[float]
    stddev_response_ms: Optional[float]
    mean_dataset_size: Optional[float] = None
    mean_measures: Optional[dict] = None
    mining: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"{self.scenario_id}@{self.scale:g}"


@dataclass
class MetricsReport:
    scenarios: list[ScenarioMetrics]
    ppmcc: Optional[float] = None
    ppmcc_note: str = ""
    seed: Optional[int] = None
    scale: Optional[float] = None
    replications: int = 0

    def scenario(self, scenario_id: str, scale: Optional[float] = None) -> ScenarioMetrics:
        for s in self.scenarios:
            if s.scenario_id == scenario_id and (scale is None or s.scale == scale):
                return s
        raise KeyError(scenario_id)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        d = dict(d)
        d["scenarios"] = [ScenarioMetrics(**s) for s in d.get("scenarios", [])]
        return cls(**d)


def _scenario_metrics(scenario_id, scale, results) -> ScenarioMetrics:
    times, sizes, measures = [], [], []
    mining = False
    for r in results:
        times.extend(r.response_times_ms)
        for a in r.adaptations:
            if a.case in MINING_CASES:
                mining = True
            if a.measures is not None:
                measures.append(a.measures)
                sizes.append(a.dataset_size)
    notes = []
    mean = sd = None
    if times:
        mean, sd = mean_sd(times)
        if len(times) == 1:
            notes.append("single response time: standard deviation reported as 0")
    mean_measures = None
    if measures:
        mean_measures = {
            "precision": statistics.fmean(m.precision for m in measures),
            "recall": statistics.fmean(m.recall for m in measures),
            "f_measure": statistics.fmean(m.f_measure for m in measures),
        }
    return ScenarioMetrics(
        scenario_id, scale, len(results), sum(r.outcome == "adapted" for r in results), mean, sd,
        statistics.fmean(sizes) if sizes else None, mean_measures, mining, notes)


def aggregate(results: Iterable, seed: Optional[int] = None,
              scale: Optional[float] = None) -> MetricsReport:
    """Per-scenario means and deviations plus the size/time correlation of
    the mining scenarios."""
    results = list(results)
    groups: dict[tuple[str, float], list] = {}
    for r in results:
        groups.setdefault((r.scenario_id, r.scale), []).append(r)
    scenarios = [_scenario_metrics(sid, sc, rs) for (sid, sc), rs in groups.items()]

    pairs = [(s.mean_dataset_size, s.mean_response_ms) for s in scenarios
             if s.mining and s.mean_dataset_size is not None and s.mean_response_ms is not None]
    r = None
    note = ""
    if len(pairs) < 2:
        note = "fewer than two mining scenarios"
    else:
        try:
            r = ppmcc([p[0] for p in pairs], [p[1] for p in pairs])
        except UndefinedCorrelation as exc:
            note = str(exc)
    if seed is None and results:
        seed = min(x.seed - x.replication_index for x in results)
    if scale is None and len({x.scale for x in results}) == 1:
        scale = results[0].scale
    per = {len(rs) for rs in groups.values()}
    return MetricsReport(scenarios, r, note, seed, scale, max(per) if per else 0)
