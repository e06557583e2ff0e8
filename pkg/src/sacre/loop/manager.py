"""Autonomic Manager: builds, wires, checks and reconfigures a loop.

Setup runs in five phases: create elements from their policies, wire the
observer links, broadcast a first health notification, connect the managed
elements to Sensors/Effectors, and hand back a loop that is ready to start.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .elements import (ROLE_CLASS, Analyze, Element, Execute, Health, KnowledgeBase, Monitor,
                       NoHealthyElement, Plan)
from .policies import MAPEK_ROLES, ROLE_POLICY, PolicySet, Role

log = logging.getLogger("sacre.loop")

# producer role -> consumer roles
TOPOLOGY = (
    (Role.SENSORS, Role.MONITOR),
    (Role.MONITOR, Role.KNOWLEDGE_BASE),
    (Role.MONITOR, Role.ANALYZE),
    (Role.ANALYZE, Role.KNOWLEDGE_BASE),
    (Role.ANALYZE, Role.PLAN),
    (Role.PLAN, Role.EXECUTE),
    (Role.EXECUTE, Role.KNOWLEDGE_BASE),
    (Role.EXECUTE, Role.EFFECTORS),
)


class SetupError(RuntimeError):
    pass


class LoopNotStarted(RuntimeError):
    pass


@dataclass(frozen=True)
class HealthReport:
    missing_roles: tuple[Role, ...] = ()
    unconfigured: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.missing_roles and not self.unconfigured

    def __str__(self):
        if self.ok:
            return "OK"
        parts = []
        if self.missing_roles:
            parts.append("no OK " + ", ".join(r.label for r in self.missing_roles))
        if self.unconfigured:
            parts.append("no policy: " + ", ".join(self.unconfigured))
        return "; ".join(parts)


class Loop:
    """A wired set of elements.

    By default a loop runs inline: :meth:`iterate` senses, then drains the
    knowledge-base and analysis inboxes before returning.  Started with
    ``threaded=True`` the knowledge base and Analyze consume their inboxes
    on worker threads instead, decoupled from the Monitor.
    """

    def __init__(self, elements: Mapping[str, Element], managed: Iterable, policies: PolicySet):
        self.elements = dict(elements)
        self.managed = list(managed)
        self.policies = policies
        self.started = False
        self.threaded = False
        self._tick_lock = threading.RLock()
        self._stop = threading.Event()
        self._workers: list[threading.Thread] = []
        self.worker_errors: list[BaseException] = []

    # element access

    def of_role(self, role: Role) -> list[Element]:
        return [e for e in self.elements.values() if e.role is role]

    def active(self, role: Role) -> Element:
        for e in self.of_role(role):
            if e.state is Health.OK:
                return e
        raise NoHealthyElement(role)

    @property
    def monitor(self) -> Monitor:
        return self.active(Role.MONITOR)

    @property
    def analyze(self) -> Analyze:
        return self.active(Role.ANALYZE)

    @property
    def plan(self) -> Plan:
        return self.active(Role.PLAN)

    @property
    def execute(self) -> Execute:
        return self.active(Role.EXECUTE)

    @property
    def kb(self) -> KnowledgeBase:
        return self.active(Role.KNOWLEDGE_BASE)

    def enacted_plans(self):
        plans = [p for e in self.of_role(Role.EXECUTE) for p in e.enacted]
        return sorted(plans, key=lambda p: p.enacted_at)

    def learner_calls(self) -> int:
        return sum(e.learner_calls for e in self.of_role(Role.ANALYZE))

    # running

    def start(self, threaded: bool = False) -> None:
        if self.started:
            return
        self.started = True
        self.threaded = threaded
        if threaded:
            self._stop.clear()
            for e in self.of_role(Role.KNOWLEDGE_BASE) + self.of_role(Role.ANALYZE):
                t = threading.Thread(target=self._work, args=(e,), name=f"sacre-{e.id}", daemon=True)
                t.start()
                self._workers.append(t)

    def _work(self, element) -> None:
        handle = element.append if element.role is Role.KNOWLEDGE_BASE else element.process
        while not self._stop.is_set():
            item = element.inbox.take(timeout=0.05)
            if item is None:
                continue
            try:
                with element._lock:
                    handle(item)
            except NoHealthyElement as exc:
                if exc.role is Role.KNOWLEDGE_BASE:
                    element.inbox.put_front(item)
                    time.sleep(0.01)
                    continue
                self.worker_errors.append(exc)
            except Exception as exc:
                log.exception("%s worker failed", element.id)
                self.worker_errors.append(exc)

    def iterate(self, tick: int):
        """One loop iteration at ``tick``; returns the Symptoms emitted."""
        if not self.started:
            raise LoopNotStarted("start() the loop first")
        with self._tick_lock:
            symptoms = self.monitor.sense(tick)
            if not self.threaded:
                for kb in self.of_role(Role.KNOWLEDGE_BASE):
                    kb.drain()
                for an in self.of_role(Role.ANALYZE):
                    an.drain()
        return symptoms

    def idle(self) -> bool:
        return all(len(e.inbox) == 0 for e in
                   self.of_role(Role.KNOWLEDGE_BASE) + self.of_role(Role.ANALYZE))

    def wait_idle(self, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.idle():
                # let a worker finish the item it already took
                time.sleep(0.06)
                if self.idle():
                    return True
            time.sleep(0.005)
        return False

    def stop(self) -> None:
        self._stop.set()
        for t in self._workers:
            t.join(timeout=2.0)
        self._workers.clear()
        self.started = False

    # coordination

    def verify_health(self) -> HealthReport:
        missing = tuple(r for r in MAPEK_ROLES
                        if not any(e.state is Health.OK for e in self.of_role(r)))
        unconfigured = tuple(e.id for e in self.elements.values()
                             if e.role in ROLE_POLICY and e.policy is None)
        return HealthReport(missing, unconfigured)

    def reconfigure(self, element_id: str, new_policy) -> None:
        element = self.elements.get(element_id)
        if element is None:
            raise LookupError(f"unknown element {element_id!r}")
        expected = ROLE_POLICY.get(element.role)
        if expected is None or not isinstance(new_policy, expected):
            raise TypeError(f"{element_id} needs a {getattr(expected, '__name__', 'no')} policy")
        with self._tick_lock:
            element.set_policy(new_policy)
        log.info("reconfigured %s", element_id)


def _create(role: Role, element_id: str, policy, policies: PolicySet):
    cls = ROLE_CLASS[role]
    if role is Role.KNOWLEDGE_BASE:
        monitor = policies.policies.get(Role.MONITOR.value)
        levels = {s.name: s.levels for s in monitor.variables if s.levels} if monitor else {}
        analyze = policies.policies.get(Role.ANALYZE.value)
        active = [v for v in policy.persist if analyze is None or v in analyze.variables]
        return cls(element_id, policy, levels=levels, active=active)
    if role in ROLE_POLICY:
        return cls(element_id, policy)
    return cls(element_id)


def setup(policies: PolicySet, managed_elements: Iterable = (),
          initial_states: Optional[Mapping[str, Health]] = None) -> Loop:
    """Build a loop from ``policies`` and connect it to ``managed_elements``.

    ``initial_states`` overrides the health of freshly created elements,
    which is how a faulty element at start-up is simulated.
    """
    manager = policies.manager
    missing = manager.missing_roles()
    if missing:
        raise SetupError("structure lacks " + ", ".join(r.label for r in missing))

    # 1. create elements with their policies
    elements: dict[str, Element] = {}
    for role in Role:
        ids = manager.element_ids(role)
        if not ids and role in (Role.SENSORS, Role.EFFECTORS):
            ids = [f"{role.value}1"]
        for element_id in ids:
            policy = None
            if role in ROLE_POLICY:
                name = manager.policy_name(element_id, role)
                policy = policies.policies.get(name)
                if policy is None:
                    raise SetupError(f"no policy {name!r} for {element_id}")
                if not isinstance(policy, ROLE_POLICY[role]):
                    raise SetupError(f"policy {name!r} does not fit {element_id}")
            elements[element_id] = _create(role, element_id, policy, policies)
    for element_id, state in (initial_states or {}).items():
        if element_id not in elements:
            raise SetupError(f"unknown element {element_id!r}")
        elements[element_id].state = state

    # 2. observer wiring
    by_role = {r: [e for e in elements.values() if e.role is r] for r in Role}
    for producer_role, consumer_role in TOPOLOGY:
        for producer in by_role[producer_role]:
            for consumer in by_role[consumer_role]:
                producer.connect(consumer)
    # the Monitor pulls from Sensors
    for monitor in by_role[Role.MONITOR]:
        monitor.consumers[Role.SENSORS] = list(by_role[Role.SENSORS])

    # 3. first notify
    for e in elements.values():
        e.notify()
    for e in elements.values():
        if e.state is not Health.OK:
            raise SetupError(f"{e.id} reported {e.state.value} at first notify")

    # 4. connect managed elements
    managed = list(managed_elements)
    for me in managed:
        for e in by_role[Role.SENSORS] + by_role[Role.EFFECTORS]:
            me.attach(e)
        me.notify()

    # 5. ready to start
    return Loop(elements, managed, policies)


class AutonomicManager:
    """Owns the policy set and coordinates structural changes of its loop."""

    def __init__(self, policies: PolicySet):
        self.policies = policies
        self.loop: Optional[Loop] = None

    def setup(self, managed_elements: Iterable = (), **kwargs) -> Loop:
        self.loop = setup(self.policies, managed_elements, **kwargs)
        return self.loop

    def verify_health(self) -> HealthReport:
        if self.loop is None:
            raise LoopNotStarted("no loop set up")
        return self.loop.verify_health()

    def reconfigure(self, element_id: str, new_policy) -> None:
        if self.loop is None:
            raise LoopNotStarted("no loop set up")
        self.loop.reconfigure(element_id, new_policy)
