import numpy as np
import pytest
from hypothesis import given, strategies as st

from erasure_qec.experiments import protocols as pr
from erasure_qec.experiments.estimate import PointConfig, SweepResult, normalize
from erasure_qec.experiments.sweep import ResultStore, run_points
from erasure_qec.surface_code import ScheduleSpec
from erasure_qec.circuit import NoiseParams


def test_line_sweep_noise():
    sw = pr.LineSweep(ScheduleSpec(l=4), pr.line(1, 0.1, 1))
    n = sw.noise(0.01)
    assert (n.e, n.p, n.q) == (0.01, 0.001, 0.01)
    # check-error rates follow q unless named
    assert n.q_fn == n.q_fp == 0.01
    sw = pr.reset_sweep(2, "fp-unitary", 0.03)
    n = sw.noise(0.02)
    assert (n.e, n.p, n.q, n.q_fp, n.q_fn) == (0.02, 0.0, 0.0, 0.03, 0.0)
    assert n.gate_only and sw.schedule.reset_kind == "unitary" and sw.schedule.reset_policy == "conditional"


@given(st.floats(1e-5, 0.1), st.sampled_from(list(pr.RESET_FAMILIES)))
def test_sweep_value_inverts_config(y, family):
    sw = pr.reset_sweep(4, family, 0.1)
    cfg = sw.config(pr._r(y), 3, pr.Budget(1, 1))
    assert pr.sweep_value(cfg, sw) == pytest.approx(y, rel=1e-9)


def _fake_runner(y_star, alpha=1.0, noise_field="e"):
    """run_points stand-in where every distance crosses at ``y_star``."""

    def run(cfgs, store=None, workers=1):
        out = []
        for c in cfgs:
            y = getattr(c.noise, noise_field)
            x = (y - y_star) * c.d ** alpha / y_star
            pl = 0.4 / (1 + np.exp(-1.5 * x))
            k = c.rounds / c.d
            p_raw = 0.5 * (1 - (1 - 2 * pl) ** k)
            shots = c.n_erasure_samples * c.n_pauli_samples
            f = int(round(p_raw * shots))
            out.append({"approximate": SweepResult(c.to_dict(), "approximate", shots, f, f / shots,
                                                   float(normalize(f / shots, k)), (0, 1), (0, 1))})
        return out

    return run


@pytest.mark.parametrize("guess", [0.004, 0.013, 0.05])
def test_locate_threshold_finds_crossing(monkeypatch, guess):
    monkeypatch.setattr(pr, "run_points", _fake_runner(0.013))
    sw = pr.LineSweep(ScheduleSpec(l=4), pr.line(1, 0, 0))
    est = pr.locate_threshold(sw, guess, fine=pr.Budget(10 ** 4, 10 ** 3))
    assert est.ok
    assert est.y_star == pytest.approx(0.013, rel=0.03)


def test_locate_threshold_reports_missing_crossing(monkeypatch):
    def flat(cfgs, store=None, workers=1):
        return [{"approximate": SweepResult(c.to_dict(), "approximate", 100, 10, 0.1, 0.1, (0, 1), (0, 1))}
                for c in cfgs]

    monkeypatch.setattr(pr, "run_points", flat)
    est = pr.locate_threshold(pr.LineSweep(ScheduleSpec(l=4), pr.line(1, 0, 0)), 0.01, max_moves=1)
    assert not est.ok and np.isnan(est.y_star)


def test_subthreshold_scaling_on_ansatz(monkeypatch):
    def run(cfgs, store=None, workers=1):
        out = []
        for c in cfgs:
            pl = 0.1 * (c.noise.e / 0.01) ** (0.7 * c.d)
            out.append({"approximate": SweepResult(c.to_dict(), "approximate", 10 ** 9, int(pl * 1e9), pl, pl,
                                                   (0, 1), (0, 1))})
        return out

    monkeypatch.setattr(pr, "run_points", run)
    sub = pr.subthreshold_scaling(pr.LineSweep(ScheduleSpec(l=1), pr.line(1, 0, 0)), 0.01)
    assert sub.fit.params["alpha"] == pytest.approx(0.7, rel=1e-3)


def test_scaling_check_predicates():
    down = pr.ScalingCheck({}, 4, [0.1, 0.05, 0.02], [(0.09, 0.11), (0.04, 0.06), (0.01, 0.03)])
    assert down.decreasing and not down.not_decreasing
    overlap = pr.ScalingCheck({}, 4, [0.1, 0.09, 0.08], [(0.08, 0.12), (0.07, 0.11), (0.06, 0.1)])
    assert not overlap.decreasing and not overlap.not_decreasing
    up = pr.ScalingCheck({}, 4, [0.1, 0.12, 0.15], [(0.09, 0.11), (0.11, 0.13), (0.14, 0.16)])
    assert up.not_decreasing and not up.decreasing


def test_result_store_caches_points(tmp_path, monkeypatch):
    store = ResultStore(tmp_path)
    cfg = PointConfig(3, ScheduleSpec(l=2), NoiseParams(e=0.02, p=0.002), 1.0, 5, 10)
    first = run_points([cfg], store)
    assert store.path(cfg).exists()

    def boom(*a, **k):
        raise AssertionError("point recomputed")

    import erasure_qec.experiments.estimate as est
    monkeypatch.setattr(est, "run_point", boom)
    again = run_points([cfg], store)
    assert again[0]["approximate"] == first[0]["approximate"]
