import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sacre.harness import (Adaptation, Clock, ReplicationResult, UndefinedCorrelation, aggregate,
                           mean_sd, ppmcc, read_report, reaggregate, run_replication,
                           run_scenario, sample_size, write_report)
from sacre.harness.cli import EXIT_CONFIG, EXIT_OK, main
from sacre.mining import EvalMeasures

finite = st.floats(-1e3, 1e3, allow_nan=False)


# sample size

def test_sample_size_examples():
    assert sample_size(10950, 1.96, 0.1, 0.5, 0.5) == pytest.approx(95.21, abs=0.01)
    assert sample_size(1, 1.96, 0.1, 0.5, 0.5) == pytest.approx(1.0)
    assert sample_size(10**9, 1.96, 0.1, 0.5, 0.5) == pytest.approx(96.04, abs=1e-3)


@pytest.mark.parametrize("args", [(0, 1.96, 0.1, 0.5, 0.5), (10, 1.96, 0.0, 0.5, 0.5),
                                  (10, 1.96, 0.1, 1.5, 0.5)])
def test_sample_size_rejects(args):
    with pytest.raises(ValueError):
        sample_size(*args)


@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_sample_size_monotone_in_population(a, b):
    lo, hi = sorted((a, b))
    assert sample_size(lo, 1.96, 0.1, 0.5, 0.5) <= sample_size(hi, 1.96, 0.1, 0.5, 0.5) + 1e-9


# correlation

def test_ppmcc_examples():
    assert ppmcc([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert ppmcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert ppmcc([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8)
    with pytest.raises(UndefinedCorrelation):
        ppmcc([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedCorrelation):
        ppmcc([1], [2])
    with pytest.raises(ValueError):
        ppmcc([1, 2], [1])


@settings(max_examples=100)
@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30),
       st.floats(0.1, 10), st.floats(-100, 100))
def test_ppmcc_matches_numpy_and_is_affine_invariant(pairs, a, b):
    xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    assume(np.std(xs) > 1e-3 and np.std(ys) > 1e-3)
    r = ppmcc(xs, ys)
    assert -1.0 <= r <= 1.0
    assert r == pytest.approx(np.corrcoef(xs, ys)[0, 1], abs=1e-9)
    assert ppmcc([a * x + b for x in xs], ys) == pytest.approx(r, abs=1e-9)


# aggregation

def result(sid, index, times, scale=0.1, size=100, case="case3"):
    adaptations = [Adaptation("cr1", case, t, EvalMeasures(1.0, 1.0, 1.0), "perclos>=0.15",
                              size + i, 10) for i, t in enumerate(times)]
    return ReplicationResult(sid, index, 42 + index, scale, adaptations,
                             "adapted" if times else "no_adaptation")


def test_mean_sd():
    assert mean_sd([100.0, 300.0]) == pytest.approx((200.0, 141.4213562))
    assert mean_sd([5.0]) == (5.0, 0.0)
    with pytest.raises(ValueError):
        mean_sd([])


def test_aggregate_example():
    m = aggregate([result("us1", 0, [100.0]), result("us1", 1, [300.0])])
    s = m.scenario("us1")
    assert s.mean_response_ms == pytest.approx(200.0)
    assert s.stddev_response_ms == pytest.approx(141.42, abs=0.01)
    assert s.adapted == 2 and s.replications == 2 and m.seed == 42
    assert m.ppmcc is None and m.ppmcc_note


def test_aggregate_single_replication_notes_sd():
    s = aggregate([result("us2", 0, [50.0])]).scenario("us2")
    assert s.stddev_response_ms == 0.0 and s.notes


def test_aggregate_correlation_over_groups():
    rs = [result("us1", 0, [10.0], scale=0.02, size=100),
          result("us1", 0, [20.0], scale=0.05, size=200),
          result("us1", 0, [30.0], scale=0.1, size=300),
          result("us4b", 0, [], scale=0.1)]
    m = aggregate(rs)
    assert m.ppmcc == pytest.approx(1.0)


def test_report_round_trip(tmp_path):
    rs = [result("us1", 0, [10.0]), result("us1", 1, [12.5])]
    rs[1].restorations.append({"variable": "facePosition", "response_time_ms": 0.5,
                               "iteration": 9})
    metrics = write_report(tmp_path, rs)
    back, stored = read_report(tmp_path)
    assert back == rs
    assert stored == metrics
    assert reaggregate(tmp_path) == metrics
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["metadata"] == {"seed": 42, "scale": 0.1, "replications": 2}
    lines = (tmp_path / "adaptations.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("scenario_id,scale")


def test_adaptation_rejects_negative_time():
    with pytest.raises(ValueError):
        Adaptation("cr1", "case3", -1.0, None, "")


# clock and runs

def test_clock_periods():
    c = Clock()
    assert (c.vehicle_period, c.loop_period, c.units_per_second) == (357, 500, 7140)
    assert c.first_iteration_at_or_after(0) == 0
    assert c.first_iteration_at_or_after(1) == 1
    assert c.first_iteration_at_or_after(100) == math.ceil(100 * 357 / 500)


def test_replication_is_deterministic_apart_from_timing():
    a = run_replication("us1", 3, 0.02)
    b = run_replication("us1", 3, 0.02)
    strip = lambda r: [(x.requirement_id, x.operationalization, x.measures, x.dataset_size,
                        x.iteration) for x in r.adaptations]
    assert a.outcome == "adapted" and strip(a) == strip(b)
    assert a.learner_calls == b.learner_calls and a.iterations == b.iterations


def test_run_scenario_seeds_and_errors(tmp_path):
    rs = run_scenario("us4a", 2, 10, 0.02, workdir=tmp_path)
    assert [(r.seed, r.replication_index) for r in rs] == [(10, 0), (11, 1)]
    assert (tmp_path / "us4a-r000" / "sensors.csv").exists()
    with pytest.raises(ValueError):
        run_scenario("us1", -1, 10, 0.02)


# command line

def test_cli_run_and_stats(tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["run", "--scenario", "us4b", "--replications", "2", "--scale", "0.02",
                 "--out", str(out)]) == EXIT_OK
    assert "us4b@0.02" in capsys.readouterr().out
    assert main(["stats", "--in", str(out)]) == EXIT_OK
    assert "adapted 2/2" in capsys.readouterr().out


def test_cli_gen(tmp_path, capsys):
    assert main(["gen", "--scenario", "us5", "--seed", "4", "--scale", "0.02",
                 "--out", str(tmp_path)]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["scenario"] == "us5" and (tmp_path / "sensors.csv").exists()


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "us1", "--scale", "0", "--out", "x"],
    ["run", "--scenario", "us1", "--scale", "0.001", "--out", "x"],
    ["run", "--scenario", "us9", "--out", "x"],
    ["bogus"],
    ["stats", "--in", "/nonexistent/report"],
])
def test_cli_config_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_CONFIG


def test_cli_bad_log_level(tmp_path, monkeypatch):
    monkeypatch.setenv("SACRE_LOG", "chatty")
    assert main(["gen", "--scenario", "us1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_exit_code_when_not_adapted(tmp_path, monkeypatch, capsys):
    import sacre.harness.cli as cli
    monkeypatch.setattr(cli, "run_scenario", lambda sid, reps, seed, scale, **kw: [
        ReplicationResult(sid, r, seed + r, scale) for r in range(reps)])
    argv = ["run", "--scenario", "us1", "--replications", "1", "--out", str(tmp_path)]
    assert main(argv) == cli.EXIT_FAILED
    assert "no_adaptation" in capsys.readouterr().err
