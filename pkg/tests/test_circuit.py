import pytest
from hypothesis import given, strategies as st

from erasure_qec.circuit import (ErasureCircuit, Instruction, NoiseParams, annotate_noise, check_conditional_resets,
                                 dumps, extract_segments, loads, validate_detectors)
from erasure_qec.surface_code import ScheduleSpec, build_memory_circuit


def small_circuit():
    ins = [
        Instruction("R", (0, 1), (), 0),
        Instruction("CX", (0, 1), (), 1),
        Instruction("EC", (1,), (), 2),
        Instruction("RESET", (1,), (), 2, "one-way", "conditional"),
        Instruction("CX", (0, 1), (), 3),
        Instruction("M", (0, 1), (), 4),
    ]
    return ErasureCircuit(2, ins, [(0,), (1,)], [(0,)], {"tick_kinds": ["prep", "gate", "ec", "gate", "measure"]})


def test_text_round_trip_small():
    c = small_circuit()
    assert loads(dumps(c)) == c


@pytest.mark.parametrize("l", [1, 2, 4])
@pytest.mark.parametrize("variant", ["standard", "xzzx"])
def test_text_round_trip_annotated(l, variant):
    c = annotate_noise(build_memory_circuit(3, ScheduleSpec(l=l, variant=variant), rounds=2),
                       NoiseParams(e=0.01, p=1e-3, q=0.02, q_fp=0.005))
    text = dumps(c)
    assert loads(text) == c
    assert dumps(loads(text)) == text


def test_loads_rejects_bad_input():
    with pytest.raises(ValueError):
        loads("QUBITS 2\n")
    with pytest.raises(ValueError):
        loads("# erasure-circuit v1\nQUBITS 1\nM 0\nDETECTOR rec[0]\n")
    with pytest.raises(ValueError):
        ErasureCircuit(1, [Instruction("M", (0,), (), 0)], [(3,)])
    with pytest.raises(ValueError):
        ErasureCircuit(1, [Instruction("H", (2,), (), 0)])


def test_noise_params_defaults_and_bounds():
    nz = NoiseParams(q=0.1)
    assert nz.q_fn == nz.q_fp == 0.1
    assert NoiseParams(q=0.1, q_fn=0.0).q_fn == 0.0
    with pytest.raises(ValueError):
        NoiseParams(e=1.5)


def test_annotation_counts():
    d, rounds = 3, 2
    ideal = build_memory_circuit(d, ScheduleSpec(l=1), rounds=rounds)
    c = annotate_noise(ideal, NoiseParams(e=0.01, p=0.001, q=0.01))
    assert c.annotated
    quiet = set(ideal.metadata["noiseless_ticks"])
    # every noisy measurement carries its flip rate and an implicit check before it
    noisy = [i for i in c.instructions if i.name in ("M", "MX") and i.tick not in quiet]
    assert noisy and all(i.args == (0.01,) for i in noisy)
    noisy_m = sum(len(i.targets) for i in noisy)
    assert c.count("EC") == ideal.count("EC") + noisy_m
    with pytest.raises(ValueError):
        annotate_noise(c, NoiseParams())


def test_noiseless_ticks_stay_clean():
    ideal = build_memory_circuit(3, ScheduleSpec(l=2), rounds=1)
    c = annotate_noise(ideal, NoiseParams(e=0.1, p=0.1, q=0.1))
    quiet = set(ideal.metadata["noiseless_ticks"])
    for ins in c.instructions:
        if ins.tick in quiet:
            assert not ins.is_noise() and ins.name != "ERASE"


def test_gate_only_rescales_erasure():
    ideal = build_memory_circuit(3, ScheduleSpec(l=4), rounds=1)
    c = annotate_noise(ideal, NoiseParams(e=0.01, gate_only=True))
    rates = {i.args[0] for i in c.instructions if i.name == "ERASE"}
    assert sorted(rates) == pytest.approx([0.01 * 8 / 4])
    kinds = ideal.metadata["tick_kinds"]
    assert all(kinds[i.tick] == "gate" for i in c.instructions if i.name == "ERASE")


def test_segments_split_at_resets():
    segs = extract_segments(small_circuit())
    by_q = {}
    for s in segs:
        by_q.setdefault(s.qubit, []).append(s)
    assert [s.r for s in by_q[1]] == [1, 1]
    assert [s.r for s in by_q[0]] == [2]


def test_dangling_check_rejected():
    c = ErasureCircuit(1, [Instruction("R", (0,), (), 0), Instruction("EC", (0,), (), 1)])
    with pytest.raises(ValueError):
        extract_segments(c)


def test_conditional_reset_needs_check():
    c = ErasureCircuit(1, [Instruction("R", (0,), (), 0),
                           Instruction("RESET", (0,), (), 1, "one-way", "conditional")])
    with pytest.raises(ValueError):
        check_conditional_resets(c)
    check_conditional_resets(small_circuit())


def test_detector_validation_flags_random_parity():
    c = ErasureCircuit(1, [Instruction("RX", (0,), (), 0), Instruction("M", (0,), (), 1)], [(0,)])
    rep = validate_detectors(c)
    assert not rep.ok and rep.nondeterministic == [0]


@given(st.lists(st.sampled_from(["H", "S", "I"]), max_size=6), st.integers(0, 2))
def test_random_one_qubit_text_round_trip(gates, extra):
    ins = [Instruction("R", (0,), (), 0)]
    ins += [Instruction(g, (0,), (), k + 1) for k, g in enumerate(gates)]
    ins.append(Instruction("M", (0,), (0.25,), len(gates) + 1 + extra))
    c = ErasureCircuit(1, ins, [], [(0,)], {"note": "x"})
    assert loads(dumps(c)) == c
