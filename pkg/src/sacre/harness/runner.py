"""Runs one scenario replication: vehicle and adaptation loop on a shared clock.

Both loops tick on one virtual clock in integer units, so a vehicle tick
and a loop iteration that fall on the same instant are ordered the same way
on every run (vehicle first).  Without pacing the run goes as fast as the
CPU allows; ``realtime`` sleeps to keep virtual and wall time in step and
runs the knowledge base and Analyze on their own threads.
"""

from __future__ import annotations

import dataclasses
import gc
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..loop import Loop, PolicySet, default_policy_set, setup
from ..mining import EvalMeasures
from ..reqmodel import SATISFIED, CaseKind, Operationalization
from ..vehicle import (SACRE_RATE, VEHICLE_RATE, Scenario, ScenarioTemplate, SimulationComplete,
                       SmartVehicle, TraceDriver, generate_scenario, load_scenario)

log = logging.getLogger("sacre.harness")

GRACE_ITERATIONS = 50


@dataclass(frozen=True)
class Adaptation:
    requirement_id: str
    case: str
    response_time_ms: float
    measures: Optional[EvalMeasures]
    operationalization: str
    dataset_size: int = 0
    iteration: int = -1

    def __post_init__(self):
        if self.response_time_ms < 0:
            raise ValueError("negative response time")


@dataclass
class ReplicationResult:
    scenario_id: str
    replication_index: int
    seed: int
    scale: float
    adaptations: list[Adaptation] = field(default_factory=list)
    outcome: str = "no_adaptation"
    injection_iteration: int = -1
    iterations: int = 0
    learner_calls: int = 0
    change_plans: int = 0
    restorations: list[dict] = field(default_factory=list)
    analysis_attempts: int = 0
    pre_injection_unsatisfied: int = 0
    grace_symptoms: int = 0
    agreement: dict = field(default_factory=dict)
    dataset_size: int = 0

    @property
    def response_times_ms(self) -> list[float]:
        """Enacted plans first, then active-set restorations."""
        return ([a.response_time_ms for a in self.adaptations]
                + [r["response_time_ms"] for r in self.restorations])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for a in d["adaptations"]:
            if a["measures"] is not None:
                a["measures"] = dict(a["measures"])
        return d

    @classmethod
    def from_dict(cls, d) -> "ReplicationResult":
        d = dict(d)
        adaptations = []
        for a in d.pop("adaptations", []):
            a = dict(a)
            if a.get("measures") is not None:
                a["measures"] = EvalMeasures(**a["measures"])
            adaptations.append(Adaptation(**a))
        return cls(adaptations=adaptations, **d)


class Clock:
    """Integer-unit schedule of two periodic processes."""

    def __init__(self, vehicle_rate: float = VEHICLE_RATE, loop_rate: float = SACRE_RATE):
        rv = Fraction(str(vehicle_rate))
        rl = Fraction(str(loop_rate))
        unit = math.lcm((1 / rv).denominator, (1 / rl).denominator)
        self.vehicle_period = int(unit / rv)
        self.loop_period = int(unit / rl)
        self.units_per_second = unit

    def seconds(self, units: int) -> float:
        return units / self.units_per_second

    def first_iteration_at_or_after(self, vehicle_tick: int) -> int:
        t = vehicle_tick * self.vehicle_period
        return -(-t // self.loop_period)


def _policies(base: PolicySet, seed: int, data_dir=None) -> PolicySet:
    policies = base.replace("analyze", dataclasses.replace(base.analyze, seed=seed))
    if data_dir is not None and base.knowledge_base.data_dir is None:
        kb = dataclasses.replace(base.knowledge_base, data_dir=str(data_dir))
        policies = policies.replace("kb", kb)
    return policies


def agreement(op: Operationalization, expected: Operationalization, columns, n) -> float:
    """Share of records on which two operationalizations agree."""
    if n == 0:
        return 1.0
    return float((op.mask(columns, n) == expected.mask(columns, n)).mean())


def run_replication(scenario_id: str, seed: int, scale: float, replication_index: int = 0,
                    realtime: bool = False, time_scale: float = 1.0, workdir=None,
                    policies: Optional[PolicySet] = None,
                    grace_iterations: int = GRACE_ITERATIONS,
                    inspect: Optional[Callable[[Loop, ReplicationResult], None]] = None
                    ) -> ReplicationResult:
    """One independent run of a scenario.

    ``inspect``, if given, is called with the finished loop and the result
    before the work directory is cleaned up.
    """
    template = ScenarioTemplate.scaled(scenario_id, scale)
    if workdir is None:
        tmp = tempfile.TemporaryDirectory(prefix="sacre-")
        workdir = Path(tmp.name)
    else:
        tmp = None
        workdir = Path(workdir)
    try:
        spec = generate_scenario(template, seed, workdir)
        scenario = load_scenario(spec)
        policies = _policies(policies or default_policy_set(), seed, workdir / "kb")
        return _run(scenario, seed, scale, replication_index, realtime, time_scale,
                    policies, grace_iterations, inspect)
    finally:
        if tmp is not None:
            tmp.cleanup()


def _run(scenario: Scenario, seed, scale, index, realtime, time_scale, policies,
         grace_iterations, inspect=None) -> ReplicationResult:
    spec = scenario.spec
    vehicle = SmartVehicle()
    for rid, text in spec.initial_operationalizations.items():
        vehicle.set_operationalization(rid, Operationalization.parse(text))
    loop = setup(policies, [vehicle])
    for var in spec.inactive_variables:
        for kb in loop.of_role(loop.kb.role):
            kb.deactivate(var)
    monitor = loop.monitor
    monitor.record_verdicts = True
    driver = TraceDriver(vehicle, scenario.rows, scenario.actions)
    clock = Clock(vehicle_rate=vehicle.config.frequency,
                  loop_rate=policies.knowledge_base.frequency)
    inject_iter = clock.first_iteration_at_or_after(spec.uncertainty_injection_tick)

    result = ReplicationResult(spec.id, index, seed, scale, injection_iteration=inject_iter)
    loop.start(threaded=realtime)
    # as timeit does, keep collector pauses out of the measured response times
    gc_was_enabled = gc.isenabled()
    gc.disable()
    t0 = time.monotonic()
    k = j = 0
    stop_at = None
    try:
        while True:
            tv, tl = k * clock.vehicle_period, j * clock.loop_period
            now = min(tv, tl)
            if realtime:
                delay = t0 + clock.seconds(now) / time_scale - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            if tv <= tl:
                try:
                    driver.step()
                except SimulationComplete:
                    break
                k += 1
                continue
            if vehicle.report is not None:
                loop.iterate(j)
            j += 1
            if stop_at is None and _adapted(loop):
                stop_at = j + grace_iterations
            if stop_at is not None and j >= stop_at:
                break
        if realtime:
            loop.wait_idle()
    finally:
        loop.stop()
        if gc_was_enabled:
            gc.enable()
        gc.collect()

    result.iterations = j
    _collect(result, loop, spec, inject_iter, grace_iterations)
    if inspect is not None:
        inspect(loop, result)
    return result


def _adapted(loop: Loop) -> bool:
    if loop.enacted_plans():
        return True
    return any(c.added for a in loop.of_role(loop.analyze.role) for c in a.active_set_changes)


def _collect(result: ReplicationResult, loop: Loop, spec, inject_iter, grace_iterations) -> None:
    kb = loop.kb
    analyzers = loop.of_role(loop.analyze.role)
    plans = loop.enacted_plans()
    result.learner_calls = loop.learner_calls()
    result.change_plans = len(plans)
    result.analysis_attempts = sum(len(a.attempts) for a in analyzers)
    result.dataset_size = len(kb)

    for plan in plans:
        rfc = plan.rfc
        result.adaptations.append(Adaptation(
            plan.requirement_id, rfc.case.kind.value, plan.response_time * 1000.0, rfc.measures,
            str(plan.new_operationalization), rfc.dataset_size, kb.last_enactment_tick(plan.requirement_id)))
    for a in analyzers:
        for change in a.active_set_changes:
            if change.added:
                result.restorations.append({
                    "variable": change.variable,
                    "response_time_ms": change.response_time * 1000.0,
                    "iteration": max(s.tick for s in change.symptoms),
                })

    monitor = loop.monitor
    result.pre_injection_unsatisfied = sum(
        1 for tick, verdicts in monitor.verdicts if tick < inject_iter
        for v in verdicts.values() if v is not SATISFIED)

    enact_ticks = {}
    for plan in plans:
        enact_ticks.setdefault(plan.requirement_id, kb.last_enactment_tick(plan.requirement_id))
    for s in monitor.symptoms:
        rid = s.requirement_id
        if rid in enact_ticks and enact_ticks[rid] < s.tick <= enact_ticks[rid] + grace_iterations:
            result.grace_symptoms += 1

    adapted = {a.requirement_id for a in result.adaptations}
    if spec.case is CaseKind.SENSOR_UP:
        ok = any(r["variable"] == "facePosition" for r in result.restorations)
    else:
        ok = bool(adapted) and set(spec.target_requirements) <= adapted
    result.outcome = "adapted" if ok else "no_adaptation"

    if spec.expected and plans:
        columns, n = _full_columns(kb)
        current = {r.id: r.operationalization for r in loop.managed[0].requirements}
        for rid, texts in spec.expected.items():
            if rid in current and rid in adapted:
                result.agreement[rid] = max(
                    agreement(current[rid], Operationalization.parse(t), columns, n) for t in texts)


def _full_columns(kb):
    """Every persisted variable over the records where all of them are valid."""
    with kb._lock:
        names = list(kb.policy.persist)
        cols = {v: kb._cols[v][:] for v in names}
        flags = {v: kb._flags[v][:] for v in names}
    n = len(next(iter(cols.values()))) if cols else 0
    keep = [i for i in range(n)
            if all(cols[v][i] is not None and not flags[v][i] for v in names)]
    return {v: np.array([cols[v][i] for i in keep], dtype=float) for v in names}, len(keep)


def run_scenario(scenario_id: str, replications: int, seed: int, scale: float,
                 realtime: bool = False, workdir=None, **kwargs) -> list[ReplicationResult]:
    """Independent replications with seeds ``seed + r``."""
    if replications < 0:
        raise ValueError("replications must be >= 0")
    ScenarioTemplate.scaled(scenario_id, scale)  # configuration errors surface before any run
    results = []
    for r in range(replications):
        rep_dir = None if workdir is None else Path(workdir) / f"{scenario_id}-r{r:03d}"
        try:
            res = run_replication(scenario_id, seed + r, scale, r, realtime=realtime,
                                  workdir=rep_dir, **kwargs)
        except Exception as exc:
            log.exception("%s r%d failed", scenario_id, r)
            res = ReplicationResult(scenario_id, r, seed + r, scale, outcome=f"error({exc})")
        log.info("%s r%d: %s %s", scenario_id, r, res.outcome,
                 ", ".join(f"{a.requirement_id} {a.response_time_ms:.1f} ms" for a in res.adaptations))
        results.append(res)
    return results
