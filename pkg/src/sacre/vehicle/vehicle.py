"""The smart vehicle: a trace-driven managed element.

Each tick the vehicle reduces the eyes-state stream to a perclos value,
evaluates every contextual requirement on the current snapshot, commands
the matching actuators and applies the driver's actions.  The resulting
report goes to whoever observes the vehicle (the adaptation loop's Sensors).
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

from ..loop.policies import PolicyError, read_properties
from ..reqmodel import (PERCLOS_CLOSED_BELOW, BehaviorState, ContextualRequirement,
                        EnvironmentSnapshot, Operationalization, VariableSpec, check_unique_ids,
                        eval_operationalization)
from .actuators import ACTUATORS, ActuatorState, DriverAction, Override
from .traces import SensorTraceRow


class SimulationComplete(Exception):
    """The sensor trace has no more rows."""


class UnknownRequirement(LookupError):
    pass


@dataclass(frozen=True)
class VehicleConfig:
    id: str
    frequency: float
    perclos_window: int
    raw_max: Mapping[str, float]
    requirements: tuple[ContextualRequirement, ...]
    actuator_of: Mapping[str, str]

    def __post_init__(self):
        check_unique_ids(self.requirements)
        for req in self.requirements:
            if self.actuator_of.get(req.behavior_id) not in ACTUATORS:
                raise PolicyError(f"{req.id}: behavior {req.behavior_id} has no known actuator")

    @property
    def specs(self) -> tuple[VariableSpec, ...]:
        """Specs of the variables the requirements are written over."""
        return (
            VariableSpec("perclos", 0.0, 100.0),
            VariableSpec("facePosition", 0.0, self.raw_max["facePosition"], levels=(0.0, 1.0)),
            VariableSpec("hbpm", 0.0, self.raw_max["hbpm"]),
            VariableSpec("hosw", 0.0, self.raw_max["hosw"], levels=(0.0, 0.5, 1.0)),
        )


def default_config_path():
    return resources.files("sacre") / "policies" / "vehicle.properties"


def load_vehicle_config(path=None) -> VehicleConfig:
    if path is None:
        with resources.as_file(default_config_path()) as p:
            props = read_properties(p)
    else:
        props = read_properties(path)
    try:
        reqs = []
        for rid in [r.strip() for r in props["vehicle.requirements"].split(",") if r.strip()]:
            prefix = f"vehicle.requirement.{rid}."
            reqs.append(ContextualRequirement(
                rid, props[prefix + "context"],
                Operationalization.parse(props[prefix + "operationalization"]),
                props[prefix + "behavior"]))
        actuator_of = {k[len("vehicle.behavior."):]: v for k, v in props.items()
                       if k.startswith("vehicle.behavior.")}
        raw_max = {k[len("vehicle.normalization.max."):]: float(v) for k, v in props.items()
                   if k.startswith("vehicle.normalization.max.")}
        return VehicleConfig(props.get("vehicle.id", "vehicle"), float(props["vehicle.frequency"]),
                             int(props["vehicle.perclosWindow"]), raw_max, tuple(reqs), actuator_of)
    except KeyError as exc:
        raise PolicyError(f"vehicle configuration lacks {exc.args[0]}") from None


@dataclass(frozen=True)
class VehicleReport:
    """What the vehicle publishes after a tick.

    ``raw`` holds the un-normalized readings handed to the adaptation loop
    (perclos as a percentage); ``snapshot`` the normalized values the
    vehicle itself evaluated.
    """

    tick: int
    raw: Mapping[str, Optional[float]]
    snapshot: EnvironmentSnapshot
    behaviors: Mapping[str, BehaviorState]
    requirements: tuple[ContextualRequirement, ...]
    contexts: Mapping[str, Optional[bool]] = field(default_factory=dict)


class SmartVehicle:
    def __init__(self, config: Optional[VehicleConfig] = None):
        self.config = config or load_vehicle_config()
        self.id = self.config.id
        self.observers: list = []
        self._requirements = {r.id: r for r in self.config.requirements}
        self._pending: deque = deque()
        self._lock = threading.Lock()
        self.actuators = {a: ActuatorState(a) for a in ACTUATORS}
        self._eyes: deque = deque(maxlen=self.config.perclos_window)
        self._closed = 0
        self._specs = self.config.specs
        self.report: Optional[VehicleReport] = None
        self.adaptations: list[tuple[int, str, Operationalization]] = []
        self.tick = -1

    # observable side

    def attach(self, observer) -> None:
        if observer not in self.observers:
            self.observers.append(observer)

    def notify(self) -> None:
        for obs in list(self.observers):
            obs.update(self)

    @property
    def requirements(self) -> tuple[ContextualRequirement, ...]:
        return tuple(self._requirements.values())

    def set_operationalization(self, requirement_id: str, op: Operationalization) -> None:
        """Replace an operationalization right away (scenario set-up only)."""
        if requirement_id not in self._requirements:
            raise UnknownRequirement(requirement_id)
        self._requirements[requirement_id] = self._requirements[requirement_id].with_operationalization(op)

    # adaptation endpoint

    def apply_adaptation(self, plan) -> str:
        """Queue ``plan`` for the next tick boundary; returns the requirement id."""
        if plan.target_managed_element != self.id:
            raise UnknownRequirement(f"plan targets {plan.target_managed_element}, not {self.id}")
        if plan.requirement_id not in self._requirements:
            raise UnknownRequirement(plan.requirement_id)
        with self._lock:
            self._pending.append((plan.requirement_id, plan.new_operationalization))
        return plan.requirement_id

    def _apply_pending(self, tick) -> bool:
        changed = False
        with self._lock:
            while self._pending:
                rid, op = self._pending.popleft()
                self._requirements[rid] = self._requirements[rid].with_operationalization(op)
                self.adaptations.append((tick, rid, op))
                changed = True
        return changed

    # perclos

    def _perclos_percent(self, eyes: Optional[float]) -> Optional[float]:
        if eyes is None:
            return None
        if len(self._eyes) == self._eyes.maxlen:
            self._closed -= self._eyes[0] < PERCLOS_CLOSED_BELOW
        self._eyes.append(eyes)
        self._closed += eyes < PERCLOS_CLOSED_BELOW
        return 100.0 * self._closed / len(self._eyes)

    # the tick

    def vehicle_tick(self, row: SensorTraceRow, actions: Iterable[DriverAction] = ()):
        """Advance one tick on ``row``; returns ``(snapshot, behavior states)``."""
        self._apply_pending(row.tick)
        self.tick = row.tick
        raw = {
            "perclos": self._perclos_percent(row.eyesState),
            "facePosition": row.facePosition,
            "hbpm": row.hbpm,
            "hosw": row.hosw,
        }
        snapshot = EnvironmentSnapshot.from_raw(row.tick, raw, self._specs)
        contexts = {}
        commanded = {a: False for a in self.actuators}
        for req in self._requirements.values():
            ctx = eval_operationalization(req.operationalization, snapshot)
            contexts[req.id] = ctx
            if ctx:
                commanded[self.config.actuator_of[req.behavior_id]] = True
        for a, on in commanded.items():
            self.actuators[a].command(on)
        for action in actions:
            if action.tick != row.tick:
                raise ValueError(f"action for tick {action.tick} applied at tick {row.tick}")
            self.actuators[action.actuator_id].apply(action.action)
        behaviors = {}
        for req in self._requirements.values():
            state = self.actuators[self.config.actuator_of[req.behavior_id]]
            behaviors[req.behavior_id] = BehaviorState(
                req.behavior_id, state.effective_active,
                state.driver_override is Override.DISABLED)
        self.report = VehicleReport(row.tick, raw, snapshot, behaviors, self.requirements, contexts)
        self.notify()
        return snapshot, behaviors


class TraceDriver:
    """Feeds a sensor trace and its driver actions to a vehicle tick by tick."""

    def __init__(self, vehicle: SmartVehicle, rows, actions=()):
        self.vehicle = vehicle
        self.rows = list(rows)
        self.actions: dict[int, list[DriverAction]] = {}
        for a in actions:
            self.actions.setdefault(a.tick, []).append(a)
        self.position = 0

    def __len__(self):
        return len(self.rows)

    def step(self):
        if self.position >= len(self.rows):
            raise SimulationComplete()
        row = self.rows[self.position]
        self.position += 1
        return self.vehicle.vehicle_tick(row, self.actions.get(row.tick, ()))
