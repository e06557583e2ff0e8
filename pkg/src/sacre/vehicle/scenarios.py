"""Synthetic driving traces for the six uncertainty scenarios.

A trace is built from segments of constant driver state.  Every scenario
has the same shape::

    body (scaled history) | warm-up episode | tail with the injected uncertainty

The body cycles through drowsy, dangerously drowsy and sleeping episodes
separated by alert driving and by "calm" stretches whose heart rate sits in
a drowsiness band while the eyes stay open.  The warm-up guarantees the
adapted requirement has seen its context at least once, whatever the scale.

Eye closure follows a fixed on/off pattern with a 20-tick period, so the
60-tick perclos window settles exactly on the closure fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..reqmodel import CaseKind, ModelError
from .actuators import Action, DriverAction
from .traces import SensorTraceRow, read_actions, read_sensor_trace, write_actions, write_sensor_trace

VEHICLE_RATE = 20.0
SACRE_RATE = 14.28

# SACRE iterations before the uncertainty appears, at full scale
FULL_SCALE_ITERATIONS = {
    "us1": 1000, "us2": 15000, "us3": 30000, "us4a": 45000, "us4b": 60000, "us5": 75000,
}
SCENARIOS = tuple(FULL_SCALE_ITERATIONS)
MIN_HISTORY_ITERATIONS = 20

CYCLE = 20            # eye-closure pattern period, ticks
SETTLE = 70           # > perclos window: time for perclos to settle
EYES_OPEN, EYES_CLOSED = 0.90, 0.05
EYES_NOISE = 0.02
HBPM_NOISE = 0.015
ALERT_HBPM = 0.70

# context -> (eye closure fraction, normalized heart rate, raw hands on wheel)
EPISODES = {
    1: (0.25, 0.58, 2),
    2: (0.35, 0.50, 1),
    3: (0.50, 0.40, 0),
}
CALM = {1: 0.58, 2: 0.50, 3: 0.40}
# low perclos, face turned away, raised heart rate, no hands on the wheel
MANUAL_SIGNATURE = dict(closure=0.0, hbpm=0.66, face=0, hands=0)
FAULTY_FACE = 1.4

ACTUATOR = {"cr1": "seat_vibration", "cr2": "sound_light", "cr3": "lane_keeping"}

EXPECTED = {
    "us1": {"cr1": ("perclos>=0.15 AND hbpm<=0.6 AND hbpm>=0.56 AND facePosition=1",)},
    "us2": {"cr2": ("perclos>=0.21 AND facePosition=1 AND hbpm<=0.55 AND hbpm>=0.46 AND hosw=0.5",)},
    "us3": {"cr3": ("perclos>0.3 AND facePosition=1 AND hbpm<=0.45 AND hosw=0",)},
    "us4a": {"cr2": ("perclos>=0.21 AND hbpm<=0.55 AND hbpm>=0.46",),
             "cr3": ("perclos>0.3 AND hbpm<=0.45 AND hosw<1",)},
    "us4b": {},
    "us5": {"cr3": ("perclos<0.05 AND facePosition=0 AND hbpm<=0.75 AND hbpm>=0.56 AND hosw<1",
                    "perclos<0.05 AND facePosition=0 AND hbpm<=0.75 AND hbpm>=0.56 AND hosw=0")},
}

CASES = {
    "us1": (CaseKind.VIOLATION, ("cr1",)),
    "us2": (CaseKind.VIOLATION, ("cr2",)),
    "us3": (CaseKind.VIOLATION, ("cr3",)),
    "us4a": (CaseKind.SENSOR_DECALIBRATED, ("cr2", "cr3")),
    "us4b": (CaseKind.SENSOR_UP, ("cr1", "cr2", "cr3")),
    "us5": (CaseKind.WRONG_CONTEXT, ("cr3",)),
}

# us4b continues where us4a left off: facePosition is out of the active set
# and the requirements no longer mention it
US4B_START = {
    "cr2": "perclos>=0.21 AND hbpm<=0.55 AND hbpm>=0.46",
    "cr3": "perclos>0.3 AND hbpm<=0.45 AND hosw<1",
}


class BudgetError(ValueError):
    pass


def iterations_to_ticks(iterations: float) -> int:
    return int(round(iterations * VEHICLE_RATE / SACRE_RATE))


@dataclass(frozen=True)
class ScenarioTemplate:
    kind: str
    history_iterations: int

    def __post_init__(self):
        if self.kind not in FULL_SCALE_ITERATIONS:
            raise ModelError(f"unknown scenario {self.kind!r}")
        if self.history_iterations < MIN_HISTORY_ITERATIONS:
            raise BudgetError(f"{self.kind}: {self.history_iterations} history iterations, "
                              f"need at least {MIN_HISTORY_ITERATIONS}")

    @classmethod
    def scaled(cls, kind: str, scale: float) -> "ScenarioTemplate":
        if kind not in FULL_SCALE_ITERATIONS:
            raise ModelError(f"unknown scenario {kind!r}")
        if not 0 < scale <= 1:
            raise BudgetError("scale must be in (0, 1]")
        return cls(kind, int(round(FULL_SCALE_ITERATIONS[kind] * scale)))


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    total_ticks: int
    uncertainty_injection_tick: int
    seed: int
    history_iterations: int
    case: CaseKind
    target_requirements: tuple[str, ...]
    sensor_trace: Optional[Path] = None
    driver_actions: Optional[Path] = None
    expected: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    initial_operationalizations: Mapping[str, str] = field(default_factory=dict)
    inactive_variables: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 < self.uncertainty_injection_tick < self.total_ticks:
            raise ModelError("need 0 < uncertainty_injection_tick < total_ticks")

    @property
    def injection_time(self) -> float:
        """Seconds of simulated time at which the uncertainty appears."""
        return self.uncertainty_injection_tick / VEHICLE_RATE


@dataclass
class Scenario:
    spec: ScenarioSpec
    rows: list[SensorTraceRow]
    actions: list[DriverAction]


@dataclass(frozen=True)
class Segment:
    length: int
    closure: float = 0.0
    hbpm: float = ALERT_HBPM
    face: float = 1
    hands: float = 2
    hbpm_noise: float = HBPM_NOISE


class _TraceBuilder:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.rows: list[SensorTraceRow] = []
        self.actions: list[DriverAction] = []

    @property
    def tick(self) -> int:
        return len(self.rows)

    def add(self, seg: Segment) -> None:
        closed_ticks = int(round(seg.closure * CYCLE))
        for _ in range(seg.length):
            t = self.tick
            closed = (t % CYCLE) < closed_ticks
            base = EYES_CLOSED if closed else EYES_OPEN
            eyes = round(min(1.0, max(0.0, base + self.rng.uniform(-EYES_NOISE, EYES_NOISE))), 4)
            hbpm = round((seg.hbpm + self.rng.uniform(-seg.hbpm_noise, seg.hbpm_noise)) * 120.0, 3)
            self.rows.append(SensorTraceRow(t, eyes, seg.face, hbpm, seg.hands))

    def alert(self, length: int) -> None:
        """Alert driving with the odd glance away and hand off the wheel."""
        end = self.tick + length
        while self.tick < end:
            gap = int(self.rng.integers(20, 60))
            self.add(Segment(min(gap, end - self.tick)))
            left = end - self.tick
            event = int(self.rng.integers(3))
            if event == 0:
                seg = Segment(int(self.rng.integers(8, 13)), face=0)
            elif event == 1:
                seg = Segment(int(self.rng.integers(15, 31)), hands=1)
            else:
                seg = Segment(int(self.rng.integers(4, 9)), hands=0)
            # keep a plain stretch after an event so events never touch
            if seg.length + 10 <= left:
                self.add(seg)
                self.add(Segment(10))
            elif left > 0:
                self.add(Segment(left))

    def closing(self, ctx: int) -> None:
        closure, _, _ = EPISODES[ctx]
        self.add(Segment(SETTLE, closure=closure))

    def core(self, ctx: int, length: int, **overrides) -> None:
        closure, hbpm, hands = EPISODES[ctx]
        fields = dict(closure=closure, hbpm=hbpm, face=1, hands=hands)
        fields.update(overrides)
        self.add(Segment(length, **fields))

    def recovery(self) -> None:
        self.add(Segment(SETTLE))

    def episode(self, ctx: int, length: int) -> None:
        self.closing(ctx)
        self.core(ctx, length)
        self.recovery()

    def calm(self, ctx: int, length: int) -> None:
        self.add(Segment(length, hbpm=CALM[ctx]))

    def act(self, tick: int, actuator: str, action: Action) -> None:
        self.actions.append(DriverAction(tick, actuator, action))


def _history(b: _TraceBuilder, ticks: int, contexts) -> None:
    """Fill ``ticks`` ticks cycling through the given drowsiness contexts."""
    end = b.tick + ticks
    k = 0
    while True:
        ctx = contexts[k % len(contexts)]
        k += 1
        alert = int(b.rng.integers(60, 160))
        core = int(b.rng.integers(30, 71))
        calm = int(b.rng.integers(20, 51))
        pause = int(b.rng.integers(40, 101))
        need = alert + 2 * SETTLE + core + pause + calm
        if b.tick + need > end:
            break
        b.alert(alert)
        b.episode(ctx, core)
        b.alert(pause)
        b.calm(ctx, calm)
    if end > b.tick:
        b.alert(end - b.tick)


INJECTED_CORE = 260
GRACE_TICKS = 120
WARMUP_CORE = 40


def build_scenario(template: ScenarioTemplate, seed: int) -> Scenario:
    """Generate the traces for ``template`` deterministically from ``seed``."""
    kind = template.kind
    # the history and the uncertainty event draw from separate streams, so
    # scaled variants of one seed share the same event
    history_seq, event_seq = np.random.SeedSequence(seed).spawn(2)
    b = _TraceBuilder(np.random.default_rng(history_seq))
    contexts = (1, 2) if kind == "us5" else (1, 2, 3)
    case, targets = CASES[kind]

    _history(b, iterations_to_ticks(template.history_iterations), contexts)
    b.rng = np.random.default_rng(event_seq)

    initial, inactive = {}, ()
    if kind in ("us1", "us2", "us3"):
        ctx = int(kind[-1])
        actuator = ACTUATOR[f"cr{ctx}"]
        b.closing(ctx)
        b.core(ctx, WARMUP_CORE)
        inject = b.tick
        # same drowsiness, but the driver has disabled the actuator and
        # differs from the history in one variable; its heart rate stays
        # inside the band the history already covers
        changed = {1: dict(face=0), 2: dict(hands=2), 3: dict(hands=1)}[ctx]
        changed["hbpm_noise"] = HBPM_NOISE / 2
        b.act(inject, actuator, Action.DISABLE)
        b.core(ctx, INJECTED_CORE, **changed)
        b.act(b.tick, actuator, Action.ENABLE)
        b.recovery()
        b.alert(GRACE_TICKS)
    elif kind == "us4a":
        b.alert(40)
        inject = b.tick
        b.add(Segment(INJECTED_CORE, face=FAULTY_FACE))
    elif kind == "us4b":
        # the camera has been faulty all along and recovers at injection
        rows = b.rows
        b.rows = [SensorTraceRow(r.tick, r.eyesState, FAULTY_FACE, r.hbpm, r.hosw) for r in rows]
        b.add(Segment(40, face=FAULTY_FACE))
        inject = b.tick
        b.alert(INJECTED_CORE)
        initial, inactive = dict(US4B_START), ("facePosition",)
    else:  # us5
        b.alert(40)
        inject = b.tick
        b.act(inject, "lane_keeping", Action.TURN_ON)
        b.add(Segment(INJECTED_CORE, **MANUAL_SIGNATURE))
        b.act(b.tick, "lane_keeping", Action.TURN_OFF)
        b.alert(GRACE_TICKS)

    spec = ScenarioSpec(kind, b.tick, inject, seed, template.history_iterations, case, targets,
                        expected=EXPECTED[kind], initial_operationalizations=initial,
                        inactive_variables=inactive)
    return Scenario(spec, b.rows, b.actions)


SENSOR_FILE = "sensors.csv"
ACTION_FILE = "actions.csv"


def generate_scenario(template: ScenarioTemplate, seed: int, out_dir) -> ScenarioSpec:
    """Write the sensor and driver-action traces into ``out_dir``."""
    scenario = build_scenario(template, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sensor_path, action_path = out / SENSOR_FILE, out / ACTION_FILE
    write_sensor_trace(scenario.rows, sensor_path)
    write_actions(scenario.actions, action_path)
    return replace(scenario.spec, sensor_trace=sensor_path, driver_actions=action_path)


def load_scenario(spec: ScenarioSpec) -> Scenario:
    if spec.sensor_trace is None:
        raise ModelError("scenario has no trace files")
    rows = read_sensor_trace(spec.sensor_trace)
    actions = read_actions(spec.driver_actions) if spec.driver_actions else []
    return Scenario(spec, rows, actions)
