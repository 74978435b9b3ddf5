import numpy as np
import pytest
from hypothesis import given, strategies as st

from erasure_qec.circuit import NoiseParams
from erasure_qec.experiments.estimate import normalize, wilson
from erasure_qec.experiments.fitting import (fit_cross_section, fit_intercept, fit_subthreshold, fit_threshold,
                                             threshold_from_counts)
from erasure_qec.experiments.hardware import (HardwareParams, crossover_TM, feasibility_boundary, map_hardware,
                                              preset)
from erasure_qec.experiments.twirl import (amplitude_damping_kraus, amplitude_damping_twirl, dephasing_kraus,
                                           dephasing_probability, pauli_probabilities, relaxation_kraus,
                                           short_time_twirl, twirl_channels, twirl_oracle)
from erasure_qec.experiments.estimate import PointConfig, run_point
from erasure_qec.experiments.sweep import parallel_failures
from erasure_qec.surface_code import ScheduleSpec


# -- estimation ---------------------------------------------------------------


@given(st.floats(0, 0.5), st.sampled_from([1.0, 2.0, 3.0]))
def test_normalize_inverts_independent_blocks(p, k):
    p3 = 0.5 * (1 - (1 - 2 * p) ** k)
    assert normalize(p3, k) == pytest.approx(p, abs=1e-12)


def test_wilson_interval():
    # reference values from statsmodels' proportion_confint(method="wilson")
    lo, hi = wilson(10, 100)
    assert lo == pytest.approx(0.05522, abs=1e-4) and hi == pytest.approx(0.17437, abs=1e-4)
    assert wilson(0, 0) == (0.0, 1.0)
    lo, hi = wilson(0, 50)
    assert lo == pytest.approx(0.0, abs=1e-15) and 0 < hi < 0.1


def test_zero_noise_point_never_fails():
    cfg = PointConfig(3, ScheduleSpec(l=2), NoiseParams(), 1.0, 5, 10)
    r = run_point(cfg)["approximate"]
    assert r.failures == 0 and r.p_L == 0.0 and r.shots == 50


def test_point_is_reproducible_and_worker_independent():
    cfg = PointConfig(3, ScheduleSpec(l=2), NoiseParams(e=0.02, p=0.002, q=0.02), 1.0, 30, 20, seed=5,
                      modes=("approximate", "exact"))
    a = run_point(cfg)
    b = run_point(cfg)
    assert {m: r.failures for m, r in a.items()} == {m: r.failures for m, r in b.items()}
    assert parallel_failures(cfg, 3) == {m: r.failures for m, r in a.items()}
    assert a["approximate"].failures > 0


# -- fitting ------------------------------------------------------------------


def _ansatz(y_star=0.01, alpha=1.2, a=30.0, b=2.0, c=0.1):
    d = np.repeat([3, 5, 7], 7)
    y = np.tile(np.linspace(0.7, 1.3, 7) * y_star, 3)
    x = (y - y_star) * d ** alpha
    return d, y, a * x * x + b * x + c


def test_threshold_fit_recovers_ansatz():
    d, y, pl = _ansatz()
    fit = fit_threshold(d, y, pl)
    assert fit.ok
    assert fit.params["y_star"] == pytest.approx(0.01, rel=1e-3)
    assert fit.params["alpha_scaling"] == pytest.approx(1.2, rel=1e-2)


def test_threshold_fit_is_deterministic():
    d, y, pl = _ansatz()
    assert fit_threshold(d, y, pl).to_dict() == fit_threshold(d, y, pl).to_dict()


def test_threshold_fit_failures():
    d, y, pl = _ansatz()
    assert fit_threshold(d[:14], y[:14], pl[:14]).status == "fit-failed"
    # crossing outside the swept range
    d2, y2, pl2 = _ansatz(y_star=0.02)
    keep = y2 < 0.016
    assert not fit_threshold(d2[keep], y2[keep], pl2[keep]).ok


def test_threshold_from_counts_has_bootstrap_error():
    d, y, pl = _ansatz()
    shots = np.full(len(d), 10 ** 5)
    p_raw = 0.5 * (1 - (1 - 2 * np.clip(pl, 0, 0.49)) ** 3)
    fit = threshold_from_counts(d, y, np.round(p_raw * shots), shots)
    assert fit.ok and fit.params["y_star"] == pytest.approx(0.01, rel=0.02)
    assert 0 < fit.errors["y_star"] < 0.001


def test_subthreshold_fit_recovers_alpha():
    d = np.repeat([3, 5, 7], 4)
    x = np.tile([0.3, 0.4, 0.5, 0.6], 3) * 0.01
    pl = 0.07 * (x / 0.01) ** (0.64 * d)
    fit = fit_subthreshold(d, x, pl, 0.01)
    assert fit.params["alpha"] == pytest.approx(0.64, rel=0.01)
    assert fit.params["a"] == pytest.approx(0.07, rel=0.01)
    assert fit_subthreshold(d, x * 3, pl, 0.01).status == "fit-failed"


def test_cross_section_exact_line():
    pts = [(0.02, 0.0), (0.0, 0.005), (0.01, 0.0025)]
    fit = fit_cross_section(pts)
    assert fit.params["u_star"] == pytest.approx(0.02, rel=1e-12)
    assert fit.params["v_star"] == pytest.approx(0.005, rel=1e-12)
    assert fit_cross_section([(1, 2), (2, 4)]).status == "fit-failed"
    assert fit_cross_section([(1, 2)]).status == "fit-failed"


def test_intercept_with_fixed_axis_point():
    fit = fit_intercept([(0.02, 0.0), (0.01, 0.25)], 0.02, "q_fn")
    assert fit.params["v_star"] == pytest.approx(0.5, rel=1e-12)
    assert fit_intercept([(0.02, 0.0)], 0.02, "q_fn").status == "fit-failed"


# -- hardware -----------------------------------------------------------------


def test_hardware_examples():
    e, p = map_hardware(HardwareParams(T1=100.0, Tphi=1000.0, T2Q=0.15, TM=0.15, l=1))
    assert e == pytest.approx(0.0015, rel=1e-12)
    assert p == pytest.approx(1.25e-4, rel=1e-12)
    e, p = map_hardware(HardwareParams(T1=100.0, Tphi=np.inf, T2Q=0.15, TM=0.15, kind="transmon"))
    assert e == 0.0 and p == pytest.approx(0.00125, rel=1e-12)


@given(st.floats(0.01, 100), st.sampled_from([1, 2, 4]), st.sampled_from(["dual-rail", "transmon"]))
def test_hardware_map_is_scale_free(s, l, kind):
    hp = HardwareParams(T1=100.0, Tphi=300.0, T2Q=0.2, TM=1.0, l=l, kind=kind)
    hs = HardwareParams(T1=100.0 * s, Tphi=300.0 * s, T2Q=0.2 * s, TM=1.0 * s, l=l, kind=kind)
    assert map_hardware(hs) == pytest.approx(map_hardware(hp), rel=1e-12)


def test_hardware_validation_and_presets():
    with pytest.raises(ValueError):
        HardwareParams(T1=-1, Tphi=1, T2Q=1, TM=1)
    with pytest.raises(ValueError):
        HardwareParams(T1=1, Tphi=1, T2Q=1, TM=1, l=3)
    with pytest.raises(KeyError):
        preset("nope")
    assert preset("cavity-dual-rail", l=4).T1 == 250.0


def test_feasibility_without_dephasing_is_erasure_limited():
    e_star = 0.01
    fixed = HardwareParams(T1=100.0, Tphi=np.inf, T2Q=0.1, TM=1.0, l=4)
    for tm, t2q in feasibility_boundary("T2Q-TM", fixed, e_star, 0.001, [0.5, 1.0, 1.5]):
        e, _ = map_hardware(HardwareParams(T1=100.0, Tphi=np.inf, T2Q=t2q, TM=tm, l=4))
        assert e == pytest.approx(e_star, rel=1e-9)
    # boundary beyond reach gives NaN
    (_, v), = feasibility_boundary("T2Q-TM", fixed, e_star, 0.001, [1e5])
    assert np.isnan(v)
    with pytest.raises(ValueError):
        feasibility_boundary("bad", fixed, e_star, 0.001, [1.0])


def test_feasibility_scales_with_T1():
    fixed = HardwareParams(T1=100.0, Tphi=np.inf, T2Q=0.1, TM=1.0, l=2)
    a = feasibility_boundary("T2Q-TM", fixed, 0.01, 0.001, [0.2])[0][1]
    b = feasibility_boundary("T2Q-TM", HardwareParams(T1=200.0, Tphi=np.inf, T2Q=0.1, TM=1.0, l=2),
                             0.01, 0.001, [0.2])[0][1]
    # admissible 4 T2Q + l TM doubles
    assert 4 * b + 2 * 0.2 == pytest.approx(2 * (4 * a + 2 * 0.2), rel=1e-9)


def test_crossover_landmark():
    # equal cycle budget: (4T2Q + 4TM)/8 e4 = (4T2Q + 2TM)/6 e2 at T2Q -> 0
    T1, e4, e2 = 100.0, 0.0172, 0.0175
    tm = crossover_TM(T1, e4, e2)
    assert 8 * T1 * e4 - 6 * T1 * e2 == pytest.approx(2 * tm)
    assert tm == pytest.approx(T1 * e4, rel=0.3)


# -- twirl --------------------------------------------------------------------


@given(st.floats(0, 5), st.floats(1, 200), st.floats(1, 500))
def test_twirl_matches_process_matrix_oracle(t, T1, Tphi):
    k = relaxation_kraus(t, T1, Tphi)
    a, b = pauli_probabilities(k), twirl_oracle(k)
    assert max(abs(a[x] - b[x]) for x in a) < 1e-12
    assert abs(sum(a.values()) - 1) < 1e-12


def test_twirl_closed_forms():
    g = 0.3
    a = pauli_probabilities(amplitude_damping_kraus(g))
    b = amplitude_damping_twirl(g)
    assert max(abs(a[x] - b[x]) for x in a) < 1e-12
    z = pauli_probabilities(dephasing_kraus(np.exp(-0.01)))["Z"]
    assert z == pytest.approx(dephasing_probability(1.0, 100.0), abs=1e-15)
    assert z == pytest.approx(0.004975, abs=1e-6)


def test_twirl_identity_at_zero_time():
    p = twirl_channels(0.0, 100.0, 50.0)
    assert p["I"] == pytest.approx(1.0, abs=1e-15)
    assert p["X"] == p["Y"] == 0.0
    assert p["Z"] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        twirl_channels(-1.0, 100.0)


def test_short_time_forms():
    exact = twirl_channels(1.0, 100.0)
    approx = short_time_twirl(1.0, 100.0)
    err = 1 - exact["I"]
    assert err == pytest.approx(1 - approx["I"], rel=0.01)
    assert err == pytest.approx(0.005, rel=0.01)
    exact = twirl_channels(1.0, np.inf, 100.0)
    assert exact["Z"] == pytest.approx(short_time_twirl(1.0, np.inf, 100.0)["Z"], rel=0.01)
