import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sacre.loop import ChangePlan, RequestForChange, Symptom
from sacre.mining import EvalMeasures
from sacre.reqmodel import CaseKind, ModelError, Operationalization, UncertaintyCase
from sacre.vehicle import (SCENARIOS, Action, ActuatorState, BudgetError, DriverAction, Override,
                           ScenarioTemplate, SensorTraceRow, SimulationComplete, SmartVehicle,
                           TraceDriver, TraceError, UnknownRequirement, build_scenario,
                           dumps_actions, dumps_sensor_trace, effective, generate_scenario,
                           load_scenario, load_vehicle_config)
from sacre.vehicle.scenarios import FAULTY_FACE
from sacre.vehicle.traces import loads_actions, loads_sensor_trace

from .conftest import CTX1

DROWSY_ROW = dict(eyesState=0.1, facePosition=1.0, hbpm=69.6, hosw=2.0)
ALERT_ROW = dict(eyesState=0.9, facePosition=1.0, hbpm=84.0, hosw=2.0)


# actuators

@pytest.mark.parametrize("override,commanded", list(itertools.product(Override, (False, True))))
def test_actuator_precedence(override, commanded):
    expected = {Override.DISABLED: False, Override.TURNED_ON: True,
                Override.TURNED_OFF: False, Override.NONE: commanded}[override]
    assert effective(override, commanded) is expected


def test_turned_off_lasts_until_command_drops():
    a = ActuatorState("seat_vibration")
    a.command(True)
    a.apply(Action.TURN_OFF)
    assert not a.effective_active
    a.command(True)
    assert not a.effective_active
    a.command(False)
    a.command(True)
    assert a.effective_active


def test_disable_lasts_until_enable():
    a = ActuatorState("sound_light")
    a.apply(Action.DISABLE)
    a.command(False)
    a.command(True)
    assert not a.effective_active
    a.apply(Action.ENABLE)
    assert a.effective_active


def test_driver_turn_on_only_for_lane_keeping():
    DriverAction(3, "lane_keeping", Action.TURN_ON)
    with pytest.raises(ValueError):
        DriverAction(3, "seat_vibration", Action.TURN_ON)
    with pytest.raises(ValueError):
        DriverAction(3, "horn", Action.DISABLE)
    with pytest.raises(ValueError):
        DriverAction.parse("3", "lane_keeping", "honk")


# the vehicle tick

def drive_rows(vehicle, rows, actions=()):
    by_tick = {}
    for a in actions:
        by_tick.setdefault(a.tick, []).append(a)
    return [vehicle.vehicle_tick(r, by_tick.get(r.tick, ())) for r in rows]


def test_drowsy_tick_commands_seat_vibration():
    v = SmartVehicle()
    rows = [SensorTraceRow(t, **DROWSY_ROW) for t in range(3)]
    snapshot, behaviors = drive_rows(v, rows)[-1]
    assert snapshot.values["perclos"] == 1.0
    assert behaviors["beh1"].active and not behaviors["beh2"].active
    assert v.report.contexts == {"cr1": True, "cr2": False, "cr3": False}
    assert v.report.raw["perclos"] == 100.0


def test_disabled_actuator_is_violation_evidence():
    v = SmartVehicle()
    rows = [SensorTraceRow(t, **DROWSY_ROW) for t in range(2)]
    _, behaviors = drive_rows(v, rows, [DriverAction(1, "seat_vibration", Action.DISABLE)])[-1]
    assert v.report.contexts["cr1"] is True
    assert not behaviors["beh1"].active and behaviors["beh1"].driver_disabled


def test_manual_lane_keeping_is_wrong_context_evidence():
    v = SmartVehicle()
    rows = [SensorTraceRow(0, **ALERT_ROW)]
    _, behaviors = drive_rows(v, rows, [DriverAction(0, "lane_keeping", Action.TURN_ON)])[-1]
    assert v.report.contexts["cr3"] is False and behaviors["beh3"].active


def test_action_tick_mismatch_rejected():
    v = SmartVehicle()
    with pytest.raises(ValueError):
        v.vehicle_tick(SensorTraceRow(0, **ALERT_ROW), [DriverAction(1, "sound_light", Action.DISABLE)])


def plan_for(rid, text, target="vehicle"):
    s = Symptom(UncertaintyCase(CaseKind.VIOLATION, rid), 1, 0.0)
    op = Operationalization.parse(text)
    rfc = RequestForChange(rid, op, s.case, EvalMeasures(1, 1, 1), (s,))
    return ChangePlan(rid, op, target, rfc)


def test_apply_adaptation_takes_effect_next_tick():
    v = SmartVehicle()
    new = CTX1 + " AND facePosition=1"
    config_before = load_vehicle_config()
    v.vehicle_tick(SensorTraceRow(0, **DROWSY_ROW))
    assert v.apply_adaptation(plan_for("cr1", new)) == "cr1"
    assert str(v.requirements[0].operationalization) == CTX1
    v.vehicle_tick(SensorTraceRow(1, **dict(DROWSY_ROW, facePosition=0.0)))
    assert v.requirements[0].operationalization == Operationalization.parse(new)
    assert v.report.contexts["cr1"] is False
    assert v.adaptations == [(1, "cr1", Operationalization.parse(new))]
    # only the in-memory copy changed
    assert load_vehicle_config() == config_before


def test_apply_adaptation_unknown_targets():
    v = SmartVehicle()
    with pytest.raises(UnknownRequirement):
        v.apply_adaptation(plan_for("cr9", CTX1))
    with pytest.raises(UnknownRequirement):
        v.apply_adaptation(plan_for("cr1", CTX1, target="truck"))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(0, 1)), min_size=1, max_size=150))
def test_perclos_matches_offline_window(eyes):
    v = SmartVehicle()
    window = v.config.perclos_window
    seen = []
    for t, e in enumerate(eyes):
        v.vehicle_tick(SensorTraceRow(t, e, 1.0, 70.0, 2.0))
        if e is None:
            assert v.report.raw["perclos"] is None
            assert "perclos" not in v.report.snapshot.values
            continue
        seen.append(e)
        recent = seen[-window:]
        expected = 100.0 * sum(x < 0.20 for x in recent) / len(recent)
        assert v.report.raw["perclos"] == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.one_of(st.none(), st.floats(0, 1.5))] * 3), min_size=1,
                max_size=20))
def test_snapshot_variables_present_or_absent(readings):
    v = SmartVehicle()
    for t, (face, hb, hands) in enumerate(readings):
        snap, _ = v.vehicle_tick(SensorTraceRow(t, 0.5, face, None if hb is None else hb * 120,
                                                None if hands is None else hands * 2))
        assert set(snap.values) == set(snap.unclamped)
        for name, raw in (("facePosition", face), ("hbpm", hb), ("hosw", hands)):
            assert (name in snap.values) == (raw is not None)


def test_trace_driver_ends():
    v = SmartVehicle()
    d = TraceDriver(v, [SensorTraceRow(0, **ALERT_ROW)])
    d.step()
    with pytest.raises(SimulationComplete):
        d.step()


# traces

def test_trace_round_trip():
    rows = [SensorTraceRow(0, 0.5, 1.0, 70.0, 2.0), SensorTraceRow(1, None, 1.4, 69.25, None)]
    assert loads_sensor_trace(dumps_sensor_trace(rows)) == rows
    actions = [DriverAction(4, "lane_keeping", Action.TURN_ON),
               DriverAction(9, "sound_light", Action.DISABLE)]
    assert loads_actions(dumps_actions(actions)) == actions


def test_trace_errors_name_the_line():
    with pytest.raises(TraceError, match="line 1"):
        loads_sensor_trace("a,b\n")
    text = "tick,eyesState,facePosition,hbpm,hosw\n0,1,1,70,2\n2,1,1,70,2\n"
    with pytest.raises(TraceError, match="line 3"):
        loads_sensor_trace(text)


# scenario generation

def test_generation_is_byte_identical(tmp_path):
    t = ScenarioTemplate.scaled("us2", 0.05)
    a = generate_scenario(t, 11, tmp_path / "a")
    b = generate_scenario(t, 11, tmp_path / "b")
    assert a.sensor_trace.read_bytes() == b.sensor_trace.read_bytes()
    assert a.driver_actions.read_bytes() == b.driver_actions.read_bytes()
    c = generate_scenario(t, 12, tmp_path / "c")
    assert a.sensor_trace.read_bytes() != c.sensor_trace.read_bytes()
    assert load_scenario(a).rows == build_scenario(t, 11).rows


def test_scaled_variants_share_the_event():
    small = build_scenario(ScenarioTemplate.scaled("us1", 0.02), 5)
    large = build_scenario(ScenarioTemplate.scaled("us1", 0.1), 5)
    i, j = small.spec.uncertainty_injection_tick, large.spec.uncertainty_injection_tick
    # eye closure follows the absolute tick phase; the other channels do not
    strip = lambda rows: [(r.facePosition, r.hbpm, r.hosw) for r in rows]
    assert strip(small.rows[i:]) == strip(large.rows[j:])


def test_us1_trace_has_context_then_disable():
    sc = build_scenario(ScenarioTemplate.scaled("us1", 1.0), 7)
    inject = sc.spec.uncertainty_injection_tick
    v = SmartVehicle()
    in_context = 0
    for r in sc.rows[:inject]:
        v.vehicle_tick(r)
        in_context += bool(v.report.contexts["cr1"])
    assert inject >= 1000 and in_context >= 100
    assert DriverAction(inject, "seat_vibration", Action.DISABLE) in sc.actions
    assert all(r.facePosition == 0.0 for r in sc.rows[inject:inject + 200])


def test_us4a_face_faulty_from_injection():
    sc = build_scenario(ScenarioTemplate.scaled("us4a", 0.1), 3)
    inject = sc.spec.uncertainty_injection_tick
    assert all(r.facePosition == FAULTY_FACE for r in sc.rows[inject:])
    assert all(r.facePosition != FAULTY_FACE for r in sc.rows[:inject])


def test_us4b_starts_with_face_inactive():
    sc = build_scenario(ScenarioTemplate.scaled("us4b", 0.1), 3)
    inject = sc.spec.uncertainty_injection_tick
    assert sc.spec.inactive_variables == ("facePosition",)
    assert all(r.facePosition == FAULTY_FACE for r in sc.rows[:inject])
    assert all(r.facePosition != FAULTY_FACE for r in sc.rows[inject:])


@pytest.mark.parametrize("kind", SCENARIOS)
def test_every_scenario_generates(kind):
    sc = build_scenario(ScenarioTemplate.scaled(kind, 0.02), 1)
    assert 0 < sc.spec.uncertainty_injection_tick < sc.spec.total_ticks == len(sc.rows)
    assert [r.tick for r in sc.rows] == list(range(len(sc.rows)))


@pytest.mark.parametrize("scale", [0.0, -0.1, 1.5, 0.001])
def test_budget_errors(scale):
    with pytest.raises(BudgetError):
        ScenarioTemplate.scaled("us1", scale)


def test_unknown_scenario():
    with pytest.raises(ModelError):
        ScenarioTemplate.scaled("us9", 0.1)
