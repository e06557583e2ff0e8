import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sacre.reqmodel import (SATISFIED, AtomicCondition, BehaviorState, CaseKind,
                            ContextualRequirement, EnvironmentSnapshot, ModelError,
                            Operationalization, SensorNormalizer, SensorStatus, UncertaintyCase,
                            VariableSpec, assess_satisfaction, check_unique_ids,
                            detect_sensor_anomaly, eval_operationalization, normalize,
                            preprocess_perclos, strip_variable)

from .conftest import CTX1, CTX2, CTX3

HBPM = VariableSpec("hbpm", 0, 120, valid_min=0.3)
FACE = VariableSpec("facePosition", 0, 1, levels=(0.0, 1.0))
VARS = ("perclos", "facePosition", "hbpm", "hosw")


def snap(**values):
    return EnvironmentSnapshot(0, values)


# normalize

@pytest.mark.parametrize("raw,expected", [(120, 1.0), (0, 0.0), (66, 0.55)])
def test_normalize_examples(raw, expected):
    assert normalize(raw, HBPM) == pytest.approx(expected, abs=1e-12)


def test_normalize_clamps_but_scale_does_not():
    assert normalize(180, HBPM) == 1.0
    assert HBPM.scale(180) == pytest.approx(1.5)
    assert normalize(-10, HBPM) == 0.0


def test_bad_spec_rejected():
    with pytest.raises(ModelError):
        VariableSpec("x", 1, 1)
    with pytest.raises(ModelError):
        VariableSpec("x", 0, 1, valid_min=0.8, valid_max=0.2)


@given(st.floats(-500, 500), st.floats(-500, 500))
def test_normalize_monotone(a, b):
    lo, hi = sorted((a, b))
    assert normalize(lo, HBPM) <= normalize(hi, HBPM)


# perclos

def test_perclos_examples():
    assert preprocess_perclos([0.1, 0.1, 0.9, 0.9], 60) == 0.5
    assert preprocess_perclos([0.5] * 10, 60) == 0.0
    window = [0.05] * 9 + [0.8] * 51
    assert preprocess_perclos(window, 60) == pytest.approx(0.15)
    assert preprocess_perclos([], 60) == 0.0


def test_perclos_uses_only_last_window():
    assert preprocess_perclos([0.0] * 10 + [1.0] * 4, 4) == 0.0


@given(st.lists(st.floats(0, 1), min_size=1, max_size=120), st.integers(1, 80))
def test_perclos_times_window_is_a_count(samples, window):
    p = preprocess_perclos(samples, window)
    used = min(window, len(samples))
    assert 0.0 <= p <= 1.0
    assert math.isclose(p * used, round(p * used), abs_tol=1e-9)


# operationalizations

def test_parse_round_trip_text():
    for text in (CTX1, CTX2, CTX3, CTX1 + " OR " + CTX3):
        assert str(Operationalization.parse(text)) == text
    assert Operationalization.parse("").empty


def test_parse_rejects_garbage():
    with pytest.raises(ModelError):
        Operationalization.parse("perclos => 0.1")
    with pytest.raises(ModelError):
        Operationalization.parse("hbpm>=0.1 AND hbpm>=0.2")


def test_eval_examples(ctx_ops):
    s = snap(perclos=0.20, hbpm=0.58, facePosition=1, hosw=1)
    assert eval_operationalization(ctx_ops["cr1"], s) is True
    assert eval_operationalization(Operationalization(), s) is None
    no_face = snap(perclos=0.4, hbpm=0.4, hosw=0)
    assert eval_operationalization(ctx_ops["cr3"], no_face) is None
    full = snap(perclos=0.4, hbpm=0.4, hosw=0, facePosition=1)
    assert eval_operationalization(ctx_ops["cr3"], full) is True
    assert eval_operationalization(ctx_ops["cr3"], full, active_vars={"perclos", "hbpm", "hosw"}) is None


def test_strip_examples(ctx_ops):
    stripped = strip_variable(ctx_ops["cr2"], "facePosition")
    assert str(stripped) == "perclos>=0.21 AND hbpm<=0.55 AND hbpm>=0.46"
    assert strip_variable(ctx_ops["cr1"], "facePosition") == ctx_ops["cr1"]
    single = Operationalization.parse("facePosition=1")
    assert strip_variable(single, "facePosition").empty
    assert len(strip_variable(single, "facePosition").clauses) == 0


def test_mask_matches_pointwise_eval(ctx_ops):
    rng = np.random.default_rng(3)
    n = 200
    cols = {"perclos": rng.random(n), "hbpm": rng.random(n),
            "facePosition": rng.integers(0, 2, n).astype(float),
            "hosw": rng.integers(0, 3, n) / 2}
    for op in ctx_ops.values():
        m = op.mask(cols, n)
        for i in range(n):
            s = snap(**{v: float(cols[v][i]) for v in VARS})
            assert m[i] == eval_operationalization(op, s)


conds = st.builds(AtomicCondition, st.sampled_from(VARS), st.sampled_from([">=", "<=", ">", "<"]),
                  st.floats(0, 1).map(lambda x: round(x, 2)))
clauses = st.lists(conds, min_size=1, max_size=4, unique_by=lambda c: (c.variable, c.op[0])).map(tuple)
ops = st.lists(clauses, min_size=1, max_size=3).map(lambda cs: Operationalization(tuple(cs)))
snaps = st.fixed_dictionaries({v: st.floats(0, 1) for v in VARS}).map(lambda d: EnvironmentSnapshot(0, d))


@given(ops, clauses, snaps)
def test_eval_monotone_under_clause_addition(op, extra, s):
    before = eval_operationalization(op, s)
    after = eval_operationalization(Operationalization(op.clauses + (extra,)), s)
    assert not (before and not after)


@given(ops, st.sampled_from(VARS))
def test_strip_idempotent(op, var):
    once = strip_variable(op, var)
    assert strip_variable(once, var) == once
    assert not once.references(var)


# satisfaction

REQ = ContextualRequirement("cr1", "drowsy", Operationalization.parse(CTX1), "beh1")


def test_assess_examples():
    off = BehaviorState("beh1", False)
    on = BehaviorState("beh1", True)
    assert assess_satisfaction(REQ, True, off) == UncertaintyCase(CaseKind.VIOLATION, "cr1")
    assert assess_satisfaction(REQ, False, off) == SATISFIED
    assert assess_satisfaction(REQ, False, on) == UncertaintyCase(CaseKind.WRONG_CONTEXT, "cr1")
    assert assess_satisfaction(REQ, True, on) == SATISFIED
    assert assess_satisfaction(REQ, None, on) is None
    empty = REQ.with_operationalization(Operationalization())
    assert assess_satisfaction(empty, None, off).kind is CaseKind.NO_OPERATIONALIZATION
    with pytest.raises(ModelError):
        assess_satisfaction(REQ, True, BehaviorState("beh2", True))


@given(snaps, st.booleans())
def test_exactly_one_verdict_when_all_vars_present(s, active):
    v = assess_satisfaction(REQ, eval_operationalization(REQ.operationalization, s),
                            BehaviorState("beh1", active))
    assert sum([v == SATISFIED, getattr(v, "kind", None) is CaseKind.VIOLATION,
                getattr(v, "kind", None) is CaseKind.WRONG_CONTEXT]) == 1


def test_duplicate_ids_rejected():
    with pytest.raises(ModelError):
        check_unique_ids([REQ, REQ])


def test_disabled_behavior_cannot_be_active():
    with pytest.raises(ModelError):
        BehaviorState("beh1", True, driver_disabled=True)


# sensor anomalies

def test_sensor_anomaly_examples():
    case, status = detect_sensor_anomaly(HBPM, EnvironmentSnapshot.from_raw(0, {"hbpm": 30}, [HBPM]))
    assert case.kind is CaseKind.SENSOR_DECALIBRATED and status is SensorStatus.DECALIBRATED
    case, status = detect_sensor_anomaly(FACE, EnvironmentSnapshot(0, {}))
    assert case == UncertaintyCase(CaseKind.SENSOR_LOST, "facePosition")
    assert status is SensorStatus.LOST
    back = EnvironmentSnapshot(0, {"facePosition": 1.0})
    case, status = detect_sensor_anomaly(FACE, back, SensorStatus.DECALIBRATED)
    assert case.kind is CaseKind.SENSOR_UP and status is SensorStatus.HEALTHY
    assert detect_sensor_anomaly(FACE, back) == (None, SensorStatus.HEALTHY)


def test_decalibration_checked_before_clamping():
    s = EnvironmentSnapshot.from_raw(0, {"facePosition": 1.4}, [FACE])
    assert s.values["facePosition"] == 1.0
    assert s.unclamped["facePosition"] == pytest.approx(1.4)
    assert detect_sensor_anomaly(FACE, s)[0].kind is CaseKind.SENSOR_DECALIBRATED


def test_snapshot_rejects_out_of_range():
    with pytest.raises(ModelError):
        EnvironmentSnapshot(0, {"hbpm": 1.2})


# estimator facade

def test_sensor_normalizer_matches_normalize():
    specs = [HBPM, VariableSpec("hosw", 0, 2)]
    X = np.array([[66, 1], [150, 2], [-5, 0]], dtype=float)
    out = SensorNormalizer(specs).fit(X).transform(X)
    expected = [[normalize(a, specs[0]), normalize(b, specs[1])] for a, b in X]
    np.testing.assert_allclose(out, expected)
    raw = SensorNormalizer(specs, clip=False).fit_transform(X)
    assert raw[1, 0] == pytest.approx(1.25)
    assert SensorNormalizer(specs).get_params() == {"specs": specs, "clip": True}
    with pytest.raises(ValueError):
        SensorNormalizer(specs).fit(X[:, :1])
