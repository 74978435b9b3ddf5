"""Brute-force reference computations used by several test modules."""
import itertools

import numpy as np

from erasure_qec.circuit import Segment, SegmentEvent


def random_segment(rng, max_erase=8, closing=True) -> tuple[Segment, list[int], str]:
    """A random segment, its check outcomes and a closing-reset kind."""
    events = []
    k = 0
    n_erase = 0
    for _ in range(rng.integers(1, 10)):
        kind = rng.choice(["erase", "gate", "ec", "measure"], p=[0.4, 0.3, 0.2, 0.1])
        if kind == "erase":
            if n_erase == max_erase:
                continue
            n_erase += 1
            events.append(SegmentEvent("erase", k, rate=float(rng.uniform(0, 0.6))))
        elif kind == "ec":
            events.append(SegmentEvent("ec", k, rate=float(rng.uniform(0, 0.5)), rate_fp=float(rng.uniform(0, 0.5))))
        elif kind == "gate":
            events.append(SegmentEvent("gate", k, partner=99))
        else:
            events.append(SegmentEvent("measure", k, rate=0.0))
        k += 1
    seg = Segment(0, tuple(events), None, k if closing else None)
    n_ec = sum(ev.kind == "ec" for ev in events)
    outcomes = [int(v) for v in rng.integers(0, 2, n_ec)]
    return seg, outcomes, str(rng.choice(["mixed", "one-way", "unitary"]))


def enumerate_posteriors(seg: Segment, outcomes, reset_kind: str):
    """Posteriors by summing over every firing pattern of the erasure
    locations (no resets inside a segment, so erasure is absorbing)."""
    locs = [ev for ev in seg.events if ev.kind == "erase"]
    ec_iter = iter(outcomes)
    ec_out = {ev.instruction: next(ec_iter) for ev in seg.events if ev.kind == "ec"}
    n_probe = sum(ev.kind in ("gate", "measure") for ev in seg.events)
    num = np.zeros(n_probe + (seg.closed_by is not None))
    den = 0.0
    for fire in itertools.product((0, 1), repeat=len(locs)):
        w = 1.0
        for ev, f in zip(locs, fire):
            w *= ev.rate if f else 1 - ev.rate
        erased = False
        li = 0
        hits = []
        for ev in seg.events:
            if ev.kind == "erase":
                erased = erased or bool(fire[li])
                li += 1
            elif ev.kind == "ec":
                o = ec_out[ev.instruction]
                if erased:
                    w *= (1 - ev.rate) if o else ev.rate
                else:
                    w *= ev.rate_fp if o else (1 - ev.rate_fp)
            else:
                hits.append(float(erased))
        if seg.closed_by is not None:
            hits.append(1.0 if erased else (0.5 if reset_kind == "unitary" else 0.0))
        den += w
        num += w * np.array(hits)
    post = num / den
    kinds = [ev.kind for ev in seg.events if ev.kind in ("gate", "measure")]
    gates = [p for p, k in zip(post, kinds) if k == "gate"]
    meas = [p for p, k in zip(post, kinds) if k == "measure"]
    if seg.closed_by is not None:
        gates.append(post[-1])
    return gates, meas


PAULI_XOR = {"I": 0, "X": 1, "Z": 2, "Y": 3}


def xor_convolve(mechs, n_bits: int) -> np.ndarray:
    """Distribution over 2**n_bits patterns from independent XOR mechanisms
    given as (pattern int, probability)."""
    dist = np.zeros(1 << n_bits)
    dist[0] = 1.0
    idx = np.arange(1 << n_bits)
    for pat, p in mechs:
        dist = (1 - p) * dist + p * dist[idx ^ pat]
    return dist


def suffix_damage_distribution(a_bar, bits) -> np.ndarray:
    """Joint damage law of a segment: with probability a_k - a_{k-1} the
    qubit is first erased at site k, and every site from k on is damaged by
    a uniformly random value of its group (4 Paulis or 2 outcomes)."""
    n_bits = sum(bits)
    dist = np.zeros(1 << n_bits)
    prev = 0.0
    offs = np.cumsum([0] + list(bits))
    for k in range(len(bits) + 1):
        pk = (a_bar[k] - prev) if k < len(bits) else 1.0 - prev
        if k < len(bits):
            prev = a_bar[k]
        if pk <= 0:
            continue
        free = list(range(k, len(bits)))
        choices = [range(1 << bits[j]) for j in free]
        n_choices = int(np.prod([1 << bits[j] for j in free])) if free else 1
        for vals in itertools.product(*choices):
            pat = 0
            for j, v in zip(free, vals):
                pat |= v << offs[j]
            dist[pat] += pk / n_choices
    return dist


def forward_flips(prog, fault, seed: int = 0) -> tuple[tuple[int, ...], int]:
    """Detectors/observables flipped by ``fault``, by running the noiseless
    circuit twice on a stabilizer tableau (with and without the fault)."""
    from erasure_qec.program import OP_CX, OP_CZ, OP_H, OP_M, OP_MX, OP_R, OP_RX, OP_S
    from erasure_qec.tableau import Tableau

    def run(with_fault):
        t = Tableau(prog.num_qubits, np.random.default_rng(seed))
        rec = []
        for i in range(prog.n_ops):
            c, a, b = prog.code[i], int(prog.a[i]), int(prog.b[i])
            if c == OP_H:
                t.h(a)
            elif c == OP_S:
                t.s(a)
            elif c == OP_CX:
                t.cx(a, b)
            elif c == OP_CZ:
                t.cz(a, b)
            elif c == OP_R:
                t.reset(a)
            elif c == OP_RX:
                t.reset_x(a)
            elif c == OP_M:
                rec.append(t.measure(a))
            elif c == OP_MX:
                rec.append(t.measure_x(a))
            if with_fault:
                for f in fault:
                    if f[0] == i:
                        if f[2] in "XY":
                            t.r ^= t.z[:, f[1]]
                        if f[2] in "ZY":
                            t.r ^= t.x[:, f[1]]
        rec = np.array(rec, dtype=np.uint8)
        if with_fault:
            for f in fault:
                if f[0] == "flip":
                    rec[f[1]] ^= 1
        return rec

    diff = run(False) ^ run(True)
    dets = tuple(k for k in range(prog.n_det)
                 if diff[prog.det_rec[prog.det_ptr[k]:prog.det_ptr[k + 1]]].sum() % 2)
    obs = 0
    for o in range(prog.n_obs):
        if diff[prog.obs_rec[prog.obs_ptr[o]:prog.obs_ptr[o + 1]]].sum() % 2:
            obs |= 1 << o
    return dets, obs
