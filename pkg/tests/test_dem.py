import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erasure_qec.converter import approximate_convert, exact_convert
from erasure_qec.dem import GraphModel, build_hypergraph, decompose, fault_flips, merge_probabilities, to_pymatching
from erasure_qec.program import OP_CX, OP_CZ, OP_H, OP_M, OP_MX, OP_R, OP_RX
from erasure_qec.sampler import program_for, sample_erasure_batch

from helpers import noisy
from oracles import forward_flips

CIRCUITS = {
    "standard-4": noisy(3, l=4, rounds=2, e=0.01, p=0.001, q=0.01),
    "standard-1-X": noisy(3, l=1, rounds=2, basis="X", e=0.01, p=0.001, q=0.01),
    "xzzx-2": noisy(3, l=2, rounds=2, variant="xzzx", e=0.01, p=0.001, q=0.01),
}
SITE_CODES = (OP_CX, OP_CZ, OP_H, OP_M, OP_MX, OP_R, OP_RX)


@settings(max_examples=150)
@given(st.sampled_from(sorted(CIRCUITS)), st.data())
def test_fault_flips_match_forward_simulation(name, data):
    c = CIRCUITS[name]
    prog = program_for(c)
    sites = np.nonzero(np.isin(prog.code, SITE_CODES))[0]
    fault = []
    for _ in range(data.draw(st.integers(1, 3))):
        op = int(data.draw(st.sampled_from(sites)))
        q = int(data.draw(st.sampled_from([prog.a[op]] + ([prog.b[op]] if prog.b[op] >= 0 else []))))
        fault.append((op, q, data.draw(st.sampled_from("XYZ"))))
    if data.draw(st.booleans()):
        fault.append(("flip", data.draw(st.integers(0, prog.n_rec - 1))))
    assert fault_flips(c, fault) == forward_flips(prog, fault)


def test_fault_outside_circuit_rejected():
    c = CIRCUITS["standard-4"]
    with pytest.raises(ValueError):
        fault_flips(c, [(10 ** 6, 0, "X")])
    with pytest.raises(ValueError):
        fault_flips(c, [("flip", 10 ** 6)])


@given(st.lists(st.floats(0, 0.5), max_size=6))
def test_merge_is_odd_parity_probability(ps):
    odd = 0.0
    for fire in itertools.product((0, 1), repeat=len(ps)):
        if sum(fire) % 2:
            odd += np.prod([p if f else 1 - p for p, f in zip(ps, fire)])
    assert merge_probabilities(ps) == pytest.approx(odd, abs=1e-12)


def _edge_map(g):
    return {(int(u), int(v), int(o)): p for u, v, o, p in zip(g.u, g.v, g.observables, g.probability)}


@pytest.mark.parametrize("name", sorted(CIRCUITS))
@pytest.mark.parametrize("mode", ["approximate", "exact"])
def test_graph_matches_mechanism_route(name, mode):
    """Templates folded straight into edges agree with building every
    mechanism's hyperedge and decomposing it."""
    c = CIRCUITS[name]
    if mode == "exact" and c.metadata["l"] == 1:
        pytest.skip("segments too long for exact conversion")
    prog = program_for(c)
    row = sample_erasure_batch(prog, 4, 0, 1).ec_obs[0] | (np.arange(prog.n_ec) % 5 == 0)
    fast = GraphModel(c, mode).graph(row)
    conv = approximate_convert(c, row)[1] if mode == "approximate" else exact_convert(c, row)[1]
    slow = decompose(build_hypergraph(c, conv))
    a, b = _edge_map(fast), _edge_map(slow)
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-9, abs=1e-15)


def test_decomposition_reproduces_every_flip_set():
    c = CIRCUITS["xzzx-2"]
    h = build_hypergraph(c, approximate_convert(c, np.ones(program_for(c).n_ec, np.uint8))[1])
    g = decompose(h)
    pairs = {}
    for u, v, o in zip(g.u, g.v, g.observables):
        pairs[(int(u), int(v))] = int(o)
    for dets, parts in zip(h.detectors, h.parts):
        acc = set()
        for d, _ in parts:
            acc ^= set(d)
        assert acc == set(dets)
        for d, _ in parts:
            if len(d) <= 2:
                key = (d[0], g.boundary) if len(d) == 1 else tuple(sorted(d))
                assert key in pairs


def test_graph_edges_have_two_endpoints_and_valid_rates():
    c = CIRCUITS["standard-4"]
    g = GraphModel(c).graph()
    assert np.all(g.u < g.v) and np.all(g.v <= g.boundary)
    assert np.all((g.probability > 0) & (g.probability <= 0.5))
    assert g.conflicts == 0


def test_csv_layout(tmp_path):
    g = GraphModel(CIRCUITS["standard-4"]).graph()
    text = g.to_csv(tmp_path / "g.csv")
    lines = text.splitlines()
    assert lines[0] == f"# vertices={g.num_detectors + 1} boundary={g.num_detectors}"
    assert lines[1] == "u,v,probability,weight,observables"
    rows = [l.split(",") for l in lines[2:]]
    assert len(rows) == len(g)
    keys = [(int(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        p, w = float(r[2]), float(r[3])
        assert w == pytest.approx(np.log((1 - p) / p), rel=1e-10)
    assert (tmp_path / "g.csv").read_text() == text


def test_pymatching_graph_has_every_edge():
    g = GraphModel(CIRCUITS["standard-4"]).graph()
    m = to_pymatching(g)
    assert m.num_detectors == g.num_detectors
    assert m.num_edges == len(g)


def test_erasure_free_graph_ignores_outcomes():
    c = noisy(3, l=2, rounds=2, p=0.001)
    gm = GraphModel(c)
    a, b = gm.graph(), gm.graph(np.ones(program_for(c).n_ec, np.uint8))
    assert _edge_map(a) == _edge_map(b)
