"""MAPE-K loop elements.

Every element is both observer and observable: producers and consumers
attach to each other, so a health change on either side reaches the other.
A producer hands its output to the first consumer it currently sees as OK,
which lets a standby element take over when another one fails.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..mining import (ACTIVE, INACTIVE, Attribute, Dataset, FoldSizeError, arff_read, arff_write,
                      cross_validate, learn_ruleset, ruleset_to_operationalization)
from ..reqmodel import (SATISFIED, BehaviorState, CaseKind, ContextualRequirement,
                        EnvironmentSnapshot, SensorStatus, assess_satisfaction,
                        detect_sensor_anomaly, eval_operationalization, format_number,
                        preprocess_perclos, strip_variable)
from .messages import ActiveSetChange, AlreadyEnacted, ChangePlan, RequestForChange, Symptom
from .policies import (AnalyzePolicy, ExecutePolicy, KnowledgeBasePolicy, MonitorPolicy,
                       PlanPolicy, Role)

log = logging.getLogger("sacre.loop")


class Health(enum.Enum):
    OK = "OK"
    NO_OK = "NO_OK"


class NoHealthyElement(RuntimeError):
    def __init__(self, role: Role):
        super().__init__(f"no OK {role.label} element reachable")
        self.role = role


class DispatchError(RuntimeError):
    pass


class Inbox:
    """Unbounded FIFO shared between a producer and one consumer thread."""

    def __init__(self):
        self._items = deque()
        self._cond = threading.Condition()

    def put(self, item):
        with self._cond:
            self._items.append(item)
            self._cond.notify_all()

    def put_front(self, item):
        with self._cond:
            self._items.appendleft(item)
            self._cond.notify_all()

    def take(self, timeout: Optional[float] = None):
        """Next item, or None if nothing arrives within ``timeout``."""
        with self._cond:
            if not self._items and timeout:
                self._cond.wait(timeout)
            return self._items.popleft() if self._items else None

    def __len__(self):
        return len(self._items)


class Element:
    role: Role

    def __init__(self, element_id: str, policy=None):
        self.id = element_id
        self.policy = policy
        self.state = Health.OK
        self.observers: list[Element] = []
        self.observables: list[Element] = []
        self.observed_states: dict[str, Health] = {}
        self.consumers: dict[Role, list[Element]] = {}
        self._lock = threading.RLock()

    def __repr__(self):
        return f"<{type(self).__name__} {self.id} {self.state.value}>"

    # observer pattern

    def attach(self, observer) -> None:
        if observer not in self.observers:
            self.observers.append(observer)
        if self not in getattr(observer, "observables", [self]):
            observer.observables.append(self)

    def notify(self) -> None:
        for obs in list(self.observers):
            obs.update(self)

    def update(self, observable) -> None:
        state = getattr(observable, "state", None)
        if isinstance(state, Health):
            self.observed_states[observable.id] = state

    def set_state(self, state: Health) -> None:
        self.state = state
        self.notify()

    def set_policy(self, policy) -> None:
        with self._lock:
            self.policy = policy
        self.notify()

    # routing

    def connect(self, consumer: "Element") -> None:
        """Producer-side link: mutual observation plus a routing entry."""
        self.consumers.setdefault(consumer.role, [])
        if consumer not in self.consumers[consumer.role]:
            self.consumers[consumer.role].append(consumer)
        self.attach(consumer)
        consumer.attach(self)

    def route(self, role: Role) -> "Element":
        for e in self.consumers.get(role, ()):
            if self.observed_states.get(e.id, e.state) is Health.OK:
                return e
        raise NoHealthyElement(role)


# --------------------------------------------------------------------------
# Sensors / Effectors


class Sensors(Element):
    role = Role.SENSORS

    def __init__(self, element_id):
        super().__init__(element_id)
        self.latest: dict[str, object] = {}

    def update(self, observable) -> None:
        report = getattr(observable, "report", None)
        if report is not None and not isinstance(observable, Element):
            self.latest[observable.id] = report
        else:
            super().update(observable)

    def read(self):
        """Most recent report of the first managed element that published one."""
        for report in self.latest.values():
            return report
        return None


class Effectors(Element):
    role = Role.EFFECTORS

    def __init__(self, element_id):
        super().__init__(element_id)
        self.managed: dict[str, object] = {}

    def update(self, observable) -> None:
        if not isinstance(observable, Element):
            self.managed[observable.id] = observable
        else:
            super().update(observable)

    def enact(self, plan: ChangePlan):
        me = self.managed.get(plan.target_managed_element)
        if me is None:
            raise DispatchError(f"no managed element {plan.target_managed_element!r}")
        return me.apply_adaptation(plan)


# --------------------------------------------------------------------------
# Knowledge base


@dataclass(frozen=True)
class KBRecord:
    tick: int
    values: Mapping[str, Optional[float]]
    flagged: frozenset
    behaviors: Mapping[str, bool]


class KnowledgeBase(Element):
    """Single-writer, multi-reader store of monitored records.

    Appends arrive through an inbox and are applied in tick order; fetches
    read a consistent prefix under the lock.
    """

    role = Role.KNOWLEDGE_BASE

    def __init__(self, element_id, policy: KnowledgeBasePolicy, levels=None, active=None):
        super().__init__(element_id, policy)
        self.inbox = Inbox()
        self.levels = dict(levels or {})
        self.active_variables = set(policy.persist if active is None else active)
        self.requirements: dict[str, ContextualRequirement] = {}
        self._ticks: list[int] = []
        self._cols: dict[str, list] = {v: [] for v in policy.persist}
        self._flags: dict[str, list] = {v: [] for v in policy.persist}
        self._beh: dict[str, list] = {}
        self.enactments: dict[str, list[tuple[int, ChangePlan]]] = {}

    # writes

    def submit(self, record: KBRecord) -> None:
        self.inbox.put(record)

    def drain(self) -> int:
        n = 0
        while (rec := self.inbox.take()) is not None:
            self.append(rec)
            n += 1
        return n

    def append(self, record: KBRecord) -> None:
        with self._lock:
            if self._ticks and record.tick <= self._ticks[-1]:
                raise ValueError(f"record tick {record.tick} not after {self._ticks[-1]}")
            n = len(self._ticks)
            for v in self.policy.persist:
                self._cols[v].append(record.values.get(v))
                self._flags[v].append(v in record.flagged)
            for b, active in record.behaviors.items():
                col = self._beh.get(b)
                if col is None:
                    col = self._beh[b] = [None] * n
                col.append(bool(active))
            for b, col in self._beh.items():
                if len(col) == n:
                    col.append(None)
            self._ticks.append(record.tick)

    def set_requirements(self, requirements) -> None:
        with self._lock:
            self.requirements = {r.id: r for r in requirements}

    def deactivate(self, variable: str) -> None:
        with self._lock:
            self.active_variables.discard(variable)

    def activate(self, variable: str) -> None:
        with self._lock:
            self.active_variables.add(variable)

    def record_enactment(self, plan: ChangePlan, tick: int) -> None:
        with self._lock:
            self.enactments.setdefault(plan.requirement_id, []).append((tick, plan))

    # reads

    def __len__(self):
        return len(self._ticks)

    @property
    def latest_tick(self) -> int:
        return self._ticks[-1] if self._ticks else -1

    def last_enactment_tick(self, requirement_id: str) -> int:
        entries = self.enactments.get(requirement_id)
        return entries[-1][0] if entries else -1

    def enactment_count(self, requirement_id: str) -> int:
        return len(self.enactments.get(requirement_id, ()))

    def attributes(self, columns) -> list[Attribute]:
        attrs = []
        for v in columns:
            levels = self.levels.get(v)
            attrs.append(Attribute(v) if levels is None
                         else Attribute.nominal(v, [format_number(x) for x in levels]))
        attrs.append(Attribute.nominal("class", (ACTIVE, INACTIVE)))
        return attrs

    def fetch(self, requirement_id: str) -> Dataset:
        """Snapshot of the persisted active variables with the requirement's
        behavior state as class.

        Inactive variables are left out as columns; rows where a kept
        variable was missing or flagged are left out.
        """
        with self._lock:
            req = self.requirements.get(requirement_id)
            if req is None:
                raise LookupError(f"unknown requirement {requirement_id!r}")
            n = len(self._ticks)
            columns = [v for v in self.policy.persist if v in self.active_variables]
            cols = {v: self._cols[v][:n] for v in columns}
            flags = {v: self._flags[v][:n] for v in columns}
            beh = self._beh.get(req.behavior_id, [None] * n)[:n]
        rows = []
        snap = {v: self._snapper(v) for v in columns}
        for i in range(n):
            if beh[i] is None:
                continue
            row = []
            for v in columns:
                x = cols[v][i]
                if x is None or flags[v][i]:
                    break
                row.append(snap[v](x))
            else:
                row.append(ACTIVE if beh[i] else INACTIVE)
                rows.append(tuple(row))
        return Dataset(self.attributes(columns), rows, relation_name=requirement_id)

    def dataset_file(self, requirement_id: str) -> Optional[Path]:
        """Write the requirement's dataset as ARFF under ``data_dir``.

        Returns the file path, or None when the policy keeps data in memory.
        """
        if self.policy.data_dir is None:
            return None
        ds = self.fetch(requirement_id)
        path = Path(self.policy.data_dir) / f"{requirement_id}.arff"
        path.parent.mkdir(parents=True, exist_ok=True)
        arff_write(ds, path)
        return path

    def _snapper(self, variable):
        levels = self.levels.get(variable)
        if levels is None:
            return float
        labels = [format_number(x) for x in levels]
        grid = np.asarray(levels, dtype=float)
        return lambda x: labels[int(np.argmin(np.abs(grid - x)))]


# --------------------------------------------------------------------------
# Monitor


class Monitor(Element):
    role = Role.MONITOR

    def __init__(self, element_id, policy: MonitorPolicy):
        super().__init__(element_id, policy)
        self.status = {s.name: SensorStatus.HEALTHY for s in policy.variables}
        self.exclusion = {}
        self.counters: dict[tuple[str, CaseKind], int] = {}
        self.seen_enactments: dict[str, int] = {}
        self.eyes: dict[str, deque] = {}
        self.record_verdicts = False
        self.verdicts: list[tuple[int, dict]] = []
        self.symptoms: list[Symptom] = []

    def sense(self, tick: int) -> list[Symptom]:
        report = self.route(Role.SENSORS).read()
        if report is None:
            return []
        return self.monitor_tick(report.raw, report.requirements, report.behaviors, tick)

    def _preprocess(self, raw):
        out = dict(raw)
        for s in self.policy.variables:
            if s.perclos_window is None or out.get(s.name) is None:
                continue
            window = self.eyes.setdefault(s.name, deque(maxlen=s.perclos_window))
            window.append(out[s.name])
            out[s.name] = s.raw_min + preprocess_perclos(window, s.perclos_window) * (s.raw_max - s.raw_min)
        return out

    def monitor_tick(self, raw, requirements, behavior_states, tick: int) -> list[Symptom]:
        kb: KnowledgeBase = self.route(Role.KNOWLEDGE_BASE)
        thresholds = kb.policy
        specs = self.policy.variables
        snapshot = EnvironmentSnapshot.from_raw(tick, self._preprocess(raw), specs)
        now = time.perf_counter
        symptoms = []
        active = set(kb.active_variables)

        flagged = set()
        for spec in specs:
            prior = self.status[spec.name]
            excluded = spec.name not in active and spec.name in kb.policy.persist
            if excluded and prior is SensorStatus.HEALTHY:
                prior = self.exclusion.get(spec.name, SensorStatus.DECALIBRATED)
            case, status = detect_sensor_anomaly(spec, snapshot, prior)
            self.status[spec.name] = status
            if status is not SensorStatus.HEALTHY:
                flagged.add(spec.name)
                self.exclusion[spec.name] = status
            if case is None or (excluded and case.kind is not CaseKind.SENSOR_UP):
                self._reset(spec.name)
                continue
            if self._count(spec.name, case.kind) >= max(1, thresholds.iterations_for(case.kind)):
                self.counters[(spec.name, case.kind)] = 0
                symptoms.append(Symptom(case, tick, now()))

        if isinstance(behavior_states, Mapping):
            behaviors = dict(behavior_states)
        else:
            behaviors = {b.behavior_id: b for b in behavior_states}
        kb.set_requirements(requirements)
        kb.submit(KBRecord(tick, {k: v for k, v in snapshot.values.items()}, frozenset(flagged),
                           {b: s.active for b, s in behaviors.items()}))

        usable = {k: v for k, v in snapshot.values.items() if k not in flagged}
        eval_snapshot = EnvironmentSnapshot(tick, usable)
        verdicts = {}
        for req in requirements:
            n_enacted = kb.enactment_count(req.id)
            if self.seen_enactments.get(req.id, 0) != n_enacted:
                self.seen_enactments[req.id] = n_enacted
                self._reset(req.id)
            ctx = eval_operationalization(req.operationalization, eval_snapshot, active)
            verdict = assess_satisfaction(req, ctx, behaviors[req.behavior_id])
            verdicts[req.id] = verdict
            if verdict is SATISFIED or verdict is None:
                self._reset(req.id)
                continue
            if self._count(req.id, verdict.kind) >= max(1, thresholds.iterations_for(verdict.kind)):
                self.counters[(req.id, verdict.kind)] = 0
                symptoms.append(Symptom(verdict, tick, now(), ctx, behaviors[req.behavior_id].active))
        if self.record_verdicts:
            self.verdicts.append((tick, verdicts))

        if symptoms:
            analyze = self.route(Role.ANALYZE)
            for s in symptoms:
                log.debug("tick %d: symptom %s", tick, s.case)
                analyze.submit(s)
            self.symptoms.extend(symptoms)
        return symptoms

    def _count(self, subject, kind) -> int:
        """Consecutive-tick counter for ``(subject, kind)``; other kinds on the
        same subject start over."""
        key = (subject, kind)
        for other in [k for k in self.counters if k[0] == subject and k != key]:
            del self.counters[other]
        self.counters[key] = self.counters.get(key, 0) + 1
        return self.counters[key]

    def _reset(self, subject):
        for k in [k for k in self.counters if k[0] == subject]:
            del self.counters[k]


# --------------------------------------------------------------------------
# Analyze


@dataclass(frozen=True)
class AnalysisAttempt:
    tick: int
    requirement_id: str
    candidate: str
    measures: Optional[object]
    outcome: str
    dataset_size: int


class Analyze(Element):
    role = Role.ANALYZE

    def __init__(self, element_id, policy: AnalyzePolicy):
        super().__init__(element_id, policy)
        self.inbox = Inbox()
        self.learner_calls = 0
        self.evidence: dict[str, list[Symptom]] = {}
        self.runs: dict[str, tuple[str, int, list[Symptom]]] = {}
        self.attempts: list[AnalysisAttempt] = []
        self.active_set_changes: list[ActiveSetChange] = []
        self.rfcs: list[RequestForChange] = []

    def submit(self, symptom: Symptom) -> None:
        self.inbox.put(symptom)

    def drain(self) -> int:
        n = 0
        while (s := self.inbox.take()) is not None:
            try:
                self.process(s)
            except NoHealthyElement as exc:
                if exc.role is not Role.KNOWLEDGE_BASE:
                    raise
                log.warning("%s: knowledge base unreachable, symptom requeued", self.id)
                self.inbox.put_front(s)
                break
            n += 1
        return n

    def process(self, symptom: Symptom) -> list[ChangePlan]:
        """Analyze one symptom and push any request through Plan and Execute."""
        plans = []
        for rfc in self.analyze(symptom):
            self.rfcs.append(rfc)
            plan = self.route(Role.PLAN).receive(rfc, tick=symptom.tick)
            if plan is None:
                continue
            self.evidence.pop(plan.requirement_id, None)
            plans.append(plan)
        return plans

    def analyze(self, symptom: Symptom, kb: Optional[KnowledgeBase] = None) -> list[RequestForChange]:
        kb = kb or self.route(Role.KNOWLEDGE_BASE)
        if symptom.case.kind.sensor_level:
            return self._analyze_sensor(symptom, kb)
        return self._analyze_mined(symptom, kb)

    def _analyze_mined(self, symptom, kb):
        req_id = symptom.requirement_id
        if symptom.tick <= kb.last_enactment_tick(req_id):
            return []
        evidence = self.evidence.setdefault(req_id, [])
        evidence.append(symptom)
        if len(evidence) < max(1, self.policy.iterations_for(symptom.case.kind)):
            return []
        path = kb.dataset_file(req_id)
        ds = kb.fetch(req_id) if path is None else arff_read(path)
        req = kb.requirements[req_id]

        def attempt(candidate, measures, outcome):
            self.attempts.append(AnalysisAttempt(symptom.tick, req_id, candidate, measures,
                                                 outcome, len(ds)))
            log.info("tick %d: %s analysis of %s -> %s [%s]", symptom.tick, symptom.case.kind.value,
                     req_id, candidate or "-", outcome)

        pos, neg = ds.class_counts()
        if pos == 0 or neg == 0:
            attempt("", None, "single-class data")
            return []
        rs = learn_ruleset(ds, self.policy.seed)
        self.learner_calls += 1
        candidate = ruleset_to_operationalization(rs)
        if candidate.empty:
            attempt("", None, "no rule learned")
            return []
        wrong = self._dissatisfied(req, ds)
        if not self._resolves(candidate, ds, wrong):
            attempt(str(candidate), None, "does not resolve the dissatisfied records")
            return []
        try:
            measures, held_out = cross_validate(ds, self.policy.folds, self.policy.seed,
                                                return_predictions=True)
        except FoldSizeError:
            attempt(str(candidate), None, "too few records to validate")
            return []
        self.learner_calls += self.policy.folds
        if wrong is not None and (held_out[wrong] != ds.labels()[wrong]).any():
            attempt(str(candidate), measures, "not confirmed on held-out records")
            return []
        attempt(str(candidate), measures, "request for change")
        return [RequestForChange(req_id, candidate, symptom.case, measures, tuple(evidence), len(ds))]

    @staticmethod
    def _dissatisfied(req, ds) -> Optional[np.ndarray]:
        """Records the current operationalization gets wrong, or None when it
        cannot be evaluated on the dataset."""
        if req.operationalization.empty:
            return None
        cols = ds.columns()
        if not req.operationalization.variables <= set(cols):
            return None
        return req.operationalization.mask(cols, len(ds)) != ds.labels()

    @staticmethod
    def _resolves(candidate, ds, wrong) -> bool:
        """A significant candidate classifies every dissatisfied record."""
        if wrong is None:
            return True
        cols = ds.columns()
        if not candidate.variables <= set(cols):
            return False
        y = ds.labels()
        return bool((candidate.mask(cols, len(ds))[wrong] == y[wrong]).all())

    def _analyze_sensor(self, symptom, kb):
        var = symptom.variable
        kind = symptom.case.kind
        group = "up" if kind is CaseKind.SENSOR_UP else "down"
        prev = self.runs.get(var)
        if prev and prev[0] == group and symptom.tick == prev[1] + 1:
            run = prev[2] + [symptom]
        else:
            run = [symptom]
        self.runs[var] = (group, symptom.tick, run)
        if len(run) < max(1, self.policy.iterations_for(kind)):
            return []
        del self.runs[var]
        if group == "up":
            if var not in kb.active_variables:
                kb.activate(var)
                self.active_set_changes.append(ActiveSetChange(var, True, tuple(run), time.perf_counter()))
                log.info("tick %d: %s added back to the active variables", symptom.tick, var)
            return []
        if var not in kb.active_variables:
            return []
        kb.deactivate(var)
        self.active_set_changes.append(ActiveSetChange(var, False, tuple(run), time.perf_counter()))
        log.info("tick %d: %s removed from the active variables", symptom.tick, var)
        rfcs = []
        for req in kb.requirements.values():
            if req.operationalization.references(var):
                rfcs.append(RequestForChange(req.id, strip_variable(req.operationalization, var),
                                             symptom.case, None, tuple(run)))
        return rfcs


# --------------------------------------------------------------------------
# Plan / Execute


class Plan(Element):
    role = Role.PLAN

    def __init__(self, element_id, policy: PlanPolicy):
        super().__init__(element_id, policy)
        self.rejections: list[tuple[RequestForChange, tuple[str, ...]]] = []

    def plan(self, rfc: RequestForChange) -> Optional[ChangePlan]:
        with self._lock:
            policy = self.policy
        if rfc.measures is not None:
            m = rfc.measures
            failing = tuple(name for name, value, low in (
                ("precision", m.precision, policy.precision_min),
                ("recall", m.recall, policy.recall_min),
                ("fmeasure", m.f_measure, policy.fmeasure_min)) if value < low)
            if failing:
                self.rejections.append((rfc, failing))
                log.info("%s rejected for %s: %s below threshold", rfc.candidate, rfc.requirement_id,
                         ", ".join(failing))
                return None
        execute = self.route(Role.EXECUTE)
        return ChangePlan(rfc.requirement_id, rfc.candidate, execute.policy.managed_elements[0], rfc)

    def receive(self, rfc: RequestForChange, tick: int = -1) -> Optional[ChangePlan]:
        """Plan ``rfc`` and hand an accepted plan straight to Execute."""
        plan = self.plan(rfc)
        if plan is not None:
            self.route(Role.EXECUTE).execute(plan, tick=tick)
        return plan


@dataclass(frozen=True)
class Acknowledgement:
    requirement_id: str
    managed_element: str
    enacted_at: float


class Execute(Element):
    role = Role.EXECUTE

    def __init__(self, element_id, policy: ExecutePolicy):
        super().__init__(element_id, policy)
        self.enacted: list[ChangePlan] = []
        self.retained: list[ChangePlan] = []

    def execute(self, plan: ChangePlan, tick: int = -1) -> Acknowledgement:
        if plan.enacted_at is not None:
            raise AlreadyEnacted(f"plan for {plan.requirement_id} already enacted")
        if plan.target_managed_element not in self.policy.managed_elements:
            self.retained.append(plan)
            raise DispatchError(f"{plan.target_managed_element!r} is not a managed element")
        try:
            self.route(Role.EFFECTORS).enact(plan)
        except DispatchError:
            self.retained.append(plan)
            raise
        plan.mark_enacted(time.perf_counter())
        kb = self.route(Role.KNOWLEDGE_BASE)
        kb.record_enactment(plan, max(tick, kb.latest_tick))
        self.enacted.append(plan)
        log.info("tick %d: enacted %s := %s", tick, plan.requirement_id, plan.new_operationalization)
        return Acknowledgement(plan.requirement_id, plan.target_managed_element, plan.enacted_at)


ROLE_CLASS = {
    Role.MONITOR: Monitor,
    Role.ANALYZE: Analyze,
    Role.PLAN: Plan,
    Role.EXECUTE: Execute,
    Role.KNOWLEDGE_BASE: KnowledgeBase,
    Role.SENSORS: Sensors,
    Role.EFFECTORS: Effectors,
}
