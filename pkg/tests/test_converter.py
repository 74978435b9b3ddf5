import numpy as np
import pytest
from hypothesis import given, strategies as st

from erasure_qec.circuit import Segment, SegmentEvent, extract_segments
from erasure_qec.converter import (RULE_COIN, RULE_DEPOL, approximate_convert, build_templates, compute_posteriors,
                                   dep1_component, dep2_component, depolarizing_component, exact_convert,
                                   exact_segment_mechanisms, exact_segment_probabilities, posteriors,
                                   template_probabilities)
from erasure_qec.program import OP_CX, OP_CZ, OP_M, OP_MX, OP_RESET
from erasure_qec.sampler import program_for, sample_erasure_batch

from helpers import noisy
from oracles import enumerate_posteriors, random_segment, suffix_damage_distribution, xor_convolve


def test_posteriors_match_enumeration():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        seg, out, rk = random_segment(rng)
        got = compute_posteriors(seg, out, reset_kind=rk)
        gates, meas = enumerate_posteriors(seg, out, rk)
        worst = max(worst, np.max(np.abs(np.r_[got.a_bar, got.a_meas] - np.r_[gates, meas]), initial=0.0))
    assert worst < 1e-10


def two_gate_segment(e, q):
    # check, E1, G1, E2, G2, E3, check, reset
    ev = (SegmentEvent("erase", 1, rate=e), SegmentEvent("gate", 2, partner=5), SegmentEvent("erase", 3, rate=e),
          SegmentEvent("gate", 4, partner=6), SegmentEvent("erase", 5, rate=e), SegmentEvent("ec", 6, rate=q, rate_fp=q))
    return Segment(0, ev, 0, 7)


@pytest.mark.parametrize("outcome", [0, 1])
def test_closed_form_two_gate_segment(outcome):
    e, q = 0.07, 0.03
    got = compute_posteriors(two_gate_segment(e, q), [outcome], reset_kind="one-way")
    p1 = (1 - (1 - e) ** 3) * (1 - q) + (1 - e) ** 3 * q
    for i, a in enumerate(got.a_bar, start=1):
        num = (1 - (1 - e) ** i) * ((1 - q) if outcome else q)
        assert a == pytest.approx(num / (p1 if outcome else 1 - p1), rel=1e-12)


def test_posteriors_without_observation_are_priors():
    seg = two_gate_segment(0.1, 0.2)
    got = compute_posteriors(seg, [1], observe=False)
    assert got.a_bar == pytest.approx([0.1, 1 - 0.9 ** 2, 1 - 0.9 ** 3])


def _python_hook_posteriors(c, ec_row):
    """Hook posteriors through the per-segment Python pass."""
    prog = program_for(c)
    outcomes = {int(prog.instr[prog.ec_op[k]]) * 10 ** 6 + int(prog.a[prog.ec_op[k]]): int(ec_row[k])
                for k in range(prog.n_ec)}
    table = {}
    for seg in extract_segments(c):
        out = {ev.instruction: outcomes[ev.instruction * 10 ** 6 + seg.qubit] for ev in seg.events if ev.kind == "ec"}
        pt = compute_posteriors(seg, out, reset_kind=c.metadata.get("reset_kind", "mixed"))
        gates = [ev.instruction for ev in seg.events if ev.kind == "gate"]
        meas = [ev.instruction for ev in seg.events if ev.kind == "measure"]
        for k, a in zip(gates, pt.a_bar):
            table[("gate", k, seg.qubit)] = a
        for k, a in zip(meas, pt.a_meas):
            table[("meas", k, seg.qubit)] = a
        if seg.closed_by is not None:
            table[("reset", seg.closed_by, seg.qubit)] = pt.a_bar[-1]
    return table


@pytest.mark.parametrize("l", [1, 2, 4])
@pytest.mark.parametrize("reset_kind", ["mixed", "one-way"])
def test_kernel_posteriors_match_python_pass(l, reset_kind):
    c = noisy(3, l=l, rounds=2, e=0.05, p=0.001, q=0.02, q_fp=0.04, reset_kind=reset_kind)
    prog = program_for(c)
    eb = sample_erasure_batch(prog, 5, 0, 6)
    post = posteriors(prog, eb.ec_obs)
    for s in range(len(eb)):
        ref = _python_hook_posteriors(c, eb.ec_obs[s])
        for h in range(prog.n_hooks):
            op = int(prog.hook_op[h])
            q = int(prog.hook_qubit[h])
            k = int(prog.instr[op])
            code = prog.code[op]
            kind = "gate" if code in (OP_CX, OP_CZ) else "meas" if code in (OP_M, OP_MX) else "reset"
            if (kind, k, q) in ref:
                assert post[s, h] == pytest.approx(ref[(kind, k, q)], abs=1e-12)


def test_component_rates():
    # three independent X/Y/Z flips at rate p give each Pauli with p(1-p)
    for a in (0.0, 0.1, 0.5, 0.99):
        p = depolarizing_component(a)
        assert 3 * p * (1 - p) == pytest.approx(0.75 * a, abs=1e-15)
    p = dep1_component(0.03)
    assert 3 * p * (1 - p) == pytest.approx(0.03, abs=1e-15)
    # 15 components: each nontrivial two-qubit Pauli ends up with p/15
    pc = dep2_component(0.03)
    chars = 0.5 * (1 - (1 - 2 * pc) ** 8)
    assert 15 * (1 - (1 - 2 * chars)) / 16 == pytest.approx(0.03, rel=1e-12)


def test_approximate_marginals_preserved():
    c = noisy(3, l=2, rounds=2, e=0.05, p=0.001, q=0.05)
    prog = program_for(c)
    tpl = build_templates(prog, "approximate")
    eb = sample_erasure_batch(prog, 3, 0, 4)
    for s in range(4):
        post = posteriors(prog, eb.ec_obs[s:s + 1])[0]
        probs = template_probabilities(tpl, post)
        for h in np.unique(tpl.hook[tpl.rule == RULE_DEPOL]):
            ps = probs[(tpl.hook == h) & (tpl.rule == RULE_DEPOL)]
            assert len(ps) == 3
            assert np.sum(ps * (1 - ps)) == pytest.approx(0.75 * post[h], abs=1e-12)
        coin = tpl.rule == RULE_COIN
        assert np.allclose(probs[coin], 0.5 * post[tpl.hook[coin]])


def test_biased_spread_is_z_only():
    c = noisy(3, l=1, variant="xzzx", spread_mode="biased-Z", e=0.05)
    _, mechs, _ = approximate_convert(c, np.ones(program_for(c).n_ec, np.uint8))
    gate_mechs = [m for m in mechs if m.provenance == "erasure-induced" and m.fault[0][0] != "flip"]
    gate_ops = {i for i, code in enumerate(program_for(c).code) if code in (OP_CX, OP_CZ)}
    spread = [m for m in gate_mechs if m.fault[0][0] in gate_ops]
    assert spread and all(m.fault[0][2] == "Z" for m in spread)


def test_saturated_posteriors_are_flagged():
    c = noisy(3, l=4, rounds=1, e=0.05, q_fn=0.0, q_fp=0.0)
    prog = program_for(c)
    row = np.ones(prog.n_ec, np.uint8)
    _, mechs, sat = approximate_convert(c, row)
    assert sat
    assert max(m.probability for m in mechs) <= 0.5


def test_exact_two_gate_segment_has_63_mechanisms():
    a = [0.1, 0.19, 0.271]
    mechs = exact_segment_mechanisms(a, 3)
    assert len(mechs) == 63
    assert len({m[0] for m in mechs}) == 63


@given(st.lists(st.floats(0.0, 0.9), min_size=1, max_size=3), st.integers(0, 2))
def test_exact_conversion_reproduces_joint_law(incs, n_flip):
    a = np.minimum(np.cumsum(incs), 0.95)
    n_pauli = len(a) - min(n_flip, len(a) - 1)
    bits = [2] * n_pauli + [1] * (len(a) - n_pauli)
    probs = exact_segment_probabilities(a, bits)
    dist = xor_convolve(list(enumerate(probs, start=1)), sum(bits))
    assert np.abs(dist - suffix_damage_distribution(a, bits)).max() < 1e-12


def _site_marginals(mechs):
    """P(X), P(Y), P(Z) per (op, qubit) site from independent mechanisms."""
    char = {}
    for m in mechs:
        for op, q, letter in (f for f in m.fault if f[0] != "flip"):
            for chi in "XZ":
                # character chi anticommutes with the local Pauli
                anti = (letter != chi) and letter != "I"
                if anti:
                    char.setdefault((op, q, chi), 1.0)
                    char[(op, q, chi)] *= 1 - 2 * m.probability
            char.setdefault((op, q, "Y"), 1.0)
            if letter in "XZ":
                char[(op, q, "Y")] *= 1 - 2 * m.probability
    out = {}
    for (op, q, chi) in list(char):
        if chi != "X":
            continue
        cx, cz, cy = char.get((op, q, "X"), 1), char.get((op, q, "Z"), 1), char.get((op, q, "Y"), 1)
        # inverse transform from characters of X, Z, Y to P(X), P(Y), P(Z)
        out[(op, q)] = ((1 - cx + cz - cy) / 4, (1 - cx - cz + cy) / 4, (1 + cx - cz - cy) / 4)
    return out


@pytest.mark.parametrize("l", [2, 4])
def test_exact_and_approximate_share_single_site_marginals(l):
    c = noisy(3, l=l, rounds=1, e=0.05, q=0.05)
    prog = program_for(c)
    row = sample_erasure_batch(prog, 9, 0, 1).ec_obs[0]
    _, approx, _ = approximate_convert(c, row)
    _, exact = exact_convert(c, row)
    pick = lambda ms: [m for m in ms if m.provenance == "erasure-induced"]
    ma, me = _site_marginals(pick(approx)), _site_marginals(pick(exact))
    assert ma.keys() == me.keys() and ma
    for k in ma:
        assert ma[k] == pytest.approx(me[k], abs=1e-12)


def test_exact_conversion_refuses_long_segments():
    c = noisy(3, l=1, rounds=1, e=0.01)
    with pytest.raises(ValueError, match="max_r"):
        exact_convert(c)
    with pytest.raises(ValueError):
        exact_convert(noisy(3, l=2, rounds=1, e=0.01, reset_policy="conditional", reset_kind="one-way"))
