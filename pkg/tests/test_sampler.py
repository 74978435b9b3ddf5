import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from erasure_qec.dem import GraphModel
from erasure_qec.sampler import (ShotBatch, dump_shots, load_shots, program_for, run_frames, sample_erasure_batch,
                                 sample_erasures, sample_independent, sample_shots)

from helpers import noisy


def test_erasure_batches_do_not_depend_on_chunking():
    prog = program_for(noisy(3, l=2, e=0.05, p=0.01, q=0.05))
    full = sample_erasure_batch(prog, 7, 0, 12)
    tail = sample_erasure_batch(prog, 7, 5, 7)
    for name in ("fired", "ec_true", "ec_obs", "hooks"):
        assert np.array_equal(getattr(full, name)[5:], getattr(tail, name))
    d1, o1 = run_frames(prog, full.hooks, 7, full.sample_ids, 70)
    d2, o2 = run_frames(prog, tail.hooks, 7, tail.sample_ids, 70)
    assert np.array_equal(d1[5:], d2) and np.array_equal(o1[5:], o2)


def test_seeds_change_samples():
    prog = program_for(noisy(3, e=0.05))
    a = sample_erasure_batch(prog, 1, 0, 20).fired
    b = sample_erasure_batch(prog, 2, 0, 20).fired
    assert not np.array_equal(a, b)


def test_erasure_location_rate():
    e = 0.03
    prog = program_for(noisy(3, l=1, e=e))
    fired = sample_erasure_batch(prog, 0, 0, 400).fired
    n = fired.size
    assert abs(fired.mean() - e) < 5 * np.sqrt(e * (1 - e) / n)


def test_check_flip_rates_without_erasures():
    prog = program_for(noisy(3, l=4, q_fn=0.0, q_fp=0.1))
    eb = sample_erasure_batch(prog, 0, 0, 300)
    assert not eb.ec_true.any()
    n = eb.ec_obs.size
    assert abs(eb.ec_obs.mean() - 0.1) < 5 * np.sqrt(0.09 / n)


def test_false_negatives_hide_erasures():
    prog = program_for(noisy(3, l=4, e=0.05, q_fn=1.0, q_fp=0.0))
    eb = sample_erasure_batch(prog, 0, 0, 50)
    assert eb.ec_true.any() and not eb.ec_obs.any()


def test_noiseless_circuit_gives_no_flips():
    c = noisy(3, l=2)
    prog = program_for(c)
    det, obs = run_frames(prog, np.zeros((2, prog.n_hooks), np.uint8), 0, [0, 1], 130)
    assert det.shape == (2, 130, len(c.detectors)) and not det.any() and not obs.any()


def test_single_sample_interface():
    c = noisy(3, l=2, e=0.05, p=0.01)
    es = sample_erasures(c, 3, index=4)
    batch = sample_shots(c, es, 100, 3)
    assert len(batch) == 100
    assert batch.detectors.shape[1] == len(c.detectors)
    # erased intervals open at a firing location and close no earlier
    for spans in es.erased_intervals:
        assert all(a <= b for a, b in spans)
    assert es.fired.any() == any(es.erased_intervals)


def test_detector_marginals_match_decoding_graph():
    # independent routes: forward frame sampling vs backward sensitivities
    c = noisy(3, l=1, p=0.01, q=0.01)
    g = GraphModel(c).graph()
    assert g.conflicts == 0
    shots = sample_independent(c, 40000, 11)
    freq = shots.detectors.mean(axis=0)
    prod = np.ones(g.num_detectors + 1)
    for u, v, p in zip(g.u, g.v, g.probability):
        prod[u] *= 1 - 2 * p
        prod[v] *= 1 - 2 * p
    expect = 0.5 * (1 - prod[:-1])
    sigma = np.sqrt(expect * (1 - expect) / len(shots))
    assert np.all(np.abs(freq - expect) < 5 * sigma + 1e-4)
    p_obs = shots.observables[:, 0].mean()
    assert p_obs < 0.5


def test_shot_dump_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    b = ShotBatch(rng.integers(0, 2, (37, 19), dtype=np.uint8), rng.integers(0, 2, (37, 1), dtype=np.uint8))
    dump_shots(b, tmp_path / "s.b8")
    back = load_shots(tmp_path / "s.b8")
    assert np.array_equal(back.detectors, b.detectors) and np.array_equal(back.observables, b.observables)
    dump_shots(b, tmp_path / "s.csv", fmt="csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0].startswith("D0,") and len(rows) == 38
    with pytest.raises(ValueError):
        load_shots(tmp_path / "s.csv")
    with pytest.raises(ValueError):
        dump_shots(b, tmp_path / "x", fmt="parquet")


@given(arrays(np.uint8, st.tuples(st.integers(0, 20), st.integers(0, 70)), elements=st.integers(0, 1)),
       st.integers(0, 3))
def test_shot_dump_round_trip_property(det, n_obs):
    import tempfile
    from pathlib import Path

    obs = np.zeros((det.shape[0], n_obs), np.uint8)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "x.b8"
        dump_shots(ShotBatch(det, obs), path)
        back = load_shots(path)
    assert np.array_equal(back.detectors, det) and back.observables.shape == obs.shape
