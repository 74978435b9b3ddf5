"""Flat array form of an erasure circuit for the numeric kernels.

Every multi-target instruction is expanded into single-qubit or single-pair
ops.  Ops that depend on the erasure configuration carry a *hook* index:

* a two-qubit gate owns two hooks (first target, second target) holding
  "this qubit is erased when the gate runs";
* a measurement owns one hook holding "the measured qubit is erased";
* a reset owns one hook holding "the reset depolarizes the qubit".

Stage-1 sampling fills the hooks with 0/1, the posterior pass fills them with
probabilities; both use the same indexing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import GATE2, MEASURE, ErasureCircuit, check_conditional_resets

OP_I, OP_H, OP_S, OP_CX, OP_CZ, OP_R, OP_RX, OP_M, OP_MX = range(9)
OP_DEP1, OP_DEP2, OP_XERR, OP_ZERR, OP_ERASE, OP_EC, OP_RESET = range(9, 16)

OPCODE = {
    "I": OP_I, "H": OP_H, "S": OP_S, "CX": OP_CX, "CZ": OP_CZ, "R": OP_R, "RX": OP_RX,
    "M": OP_M, "MX": OP_MX, "DEPOLARIZE1": OP_DEP1, "DEPOLARIZE2": OP_DEP2,
    "X_ERROR": OP_XERR, "Z_ERROR": OP_ZERR, "ERASE": OP_ERASE, "EC": OP_EC, "RESET": OP_RESET,
}
RESET_KIND_CODE = {"mixed": 0, "one-way": 1, "unitary": 2}
RESET_POLICY_CODE = {"unconditional": 0, "conditional": 1}

# worldline event codes for the posterior pass
EV_ERASE, EV_GATE, EV_MEAS, EV_EC, EV_RESET, EV_PREP = range(6)


@dataclass
class Program:
    num_qubits: int
    code: np.ndarray   # int8 opcode
    a: np.ndarray      # first qubit
    b: np.ndarray      # second qubit (pairs) or -1
    idx: np.ndarray    # record index (M), check index (EC), location index (ERASE)
    hook: np.ndarray   # hook index or -1
    cls: np.ndarray    # noise class or -1
    rkind: np.ndarray  # reset kind code
    rpol: np.ndarray   # reset policy code
    prev_ec: np.ndarray  # check index a conditional reset listens to
    f0: np.ndarray     # probability: e, p, q, q_fn
    f1: np.ndarray     # q_fp
    instr: np.ndarray  # source instruction index
    tick: np.ndarray
    n_rec: int
    n_ec: int
    n_eloc: int
    n_hooks: int
    class_prob: np.ndarray
    det_ptr: np.ndarray
    det_rec: np.ndarray
    obs_ptr: np.ndarray
    obs_rec: np.ndarray
    # worldline chains for the posterior pass
    ch_ptr: np.ndarray
    ev_type: np.ndarray
    ev_f0: np.ndarray
    ev_f1: np.ndarray
    ev_ec: np.ndarray
    ev_hook: np.ndarray
    ev_rkind: np.ndarray
    ev_rpol: np.ndarray
    ec_op: np.ndarray  # op index of each check
    hook_op: np.ndarray  # op index owning each hook
    hook_qubit: np.ndarray  # qubit a hook is about
    meta: dict = field(default_factory=dict)

    @property
    def n_ops(self) -> int:
        return len(self.code)

    @property
    def n_det(self) -> int:
        return len(self.det_ptr) - 1

    @property
    def n_obs(self) -> int:
        return len(self.obs_ptr) - 1

    @property
    def has_erasure(self) -> bool:
        """True when some erasure can occur or a reset can depolarize."""
        erase = (self.code == OP_ERASE) & (self.f0 > 0)
        unitary = (self.code == OP_RESET) & (self.rkind == 2)
        ec_fp = (self.code == OP_EC) & (self.f1 > 0)
        return bool(erase.any() or (unitary.any() and ec_fp.any()) or (unitary & (self.rpol == 0)).any())


def _csr(groups) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    for i, g in enumerate(groups):
        ptr[i + 1] = ptr[i] + len(g)
    flat = np.array([r for g in groups for r in g], dtype=np.int64)
    return ptr, flat


def compile_circuit(c: ErasureCircuit) -> Program:
    check_conditional_resets(c)
    rows = []  # (code, a, b, idx, hook, cls, rkind, rpol, prev_ec, f0, f1, instr, tick)
    n_rec = n_ec = n_eloc = n_hooks = 0
    class_of: dict[float, int] = {}
    last_ec = {}
    ec_op, hook_op, hook_qubit = [], [], []

    def noise_class(p: float) -> int:
        if p <= 0.0:
            return -1
        if p not in class_of:
            class_of[p] = len(class_of)
        return class_of[p]

    for k, ins in enumerate(c.instructions):
        code = OPCODE[ins.name]
        t = ins.tick
        if ins.name in GATE2:
            for a, b in ins.pairs():
                hook_op.extend([len(rows), len(rows)])
                hook_qubit.extend([a, b])
                rows.append((code, a, b, -1, n_hooks, -1, 0, 0, -1, 0.0, 0.0, k, t))
                n_hooks += 2
        elif ins.name == "DEPOLARIZE2":
            p = ins.args[0]
            for a, b in ins.pairs():
                rows.append((code, a, b, -1, -1, noise_class(p), 0, 0, -1, p, 0.0, k, t))
        else:
            for q in ins.targets:
                idx = hook = cls = prev = -1
                rk = rp = 0
                f0 = f1 = 0.0
                if ins.name in MEASURE:
                    idx = n_rec
                    n_rec += 1
                    f0 = ins.args[0] if ins.args else 0.0
                    cls = noise_class(f0)
                    hook = n_hooks
                    n_hooks += 1
                    hook_op.append(len(rows))
                    hook_qubit.append(q)
                elif ins.name in ("DEPOLARIZE1", "X_ERROR", "Z_ERROR"):
                    f0 = ins.args[0]
                    cls = noise_class(f0)
                elif ins.name == "ERASE":
                    idx = n_eloc
                    n_eloc += 1
                    f0 = ins.args[0]
                elif ins.name == "EC":
                    idx = n_ec
                    n_ec += 1
                    f0, f1 = ins.args if ins.args else (0.0, 0.0)
                    last_ec[q] = idx
                    ec_op.append(len(rows))
                elif ins.name == "RESET":
                    rk = RESET_KIND_CODE[ins.reset_kind]
                    rp = RESET_POLICY_CODE[ins.reset_policy]
                    prev = last_ec.get(q, -1)
                    hook = n_hooks
                    n_hooks += 1
                    hook_op.append(len(rows))
                    hook_qubit.append(q)
                rows.append((code, q, -1, idx, hook, cls, rk, rp, prev, f0, f1, k, t))

    cols = list(zip(*rows)) if rows else [()] * 13
    as_i = lambda v, dt=np.int32: np.array(v, dtype=dt)
    code = as_i(cols[0], np.int8)
    det_ptr, det_rec = _csr([d.records for d in c.detectors])
    obs_ptr, obs_rec = _csr(c.observables)
    class_prob = np.zeros(len(class_of))
    for p, i in class_of.items():
        class_prob[i] = p

    prog = Program(
        num_qubits=c.num_qubits,
        code=code, a=as_i(cols[1]), b=as_i(cols[2]), idx=as_i(cols[3]), hook=as_i(cols[4]),
        cls=as_i(cols[5]), rkind=as_i(cols[6], np.int8), rpol=as_i(cols[7], np.int8),
        prev_ec=as_i(cols[8]), f0=np.array(cols[9], dtype=np.float64), f1=np.array(cols[10], dtype=np.float64),
        instr=as_i(cols[11]), tick=as_i(cols[12]),
        n_rec=n_rec, n_ec=n_ec, n_eloc=n_eloc, n_hooks=n_hooks, class_prob=class_prob,
        det_ptr=det_ptr, det_rec=det_rec, obs_ptr=obs_ptr, obs_rec=obs_rec,
        ch_ptr=np.zeros(1, np.int64), ev_type=np.zeros(0, np.int8), ev_f0=np.zeros(0), ev_f1=np.zeros(0),
        ev_ec=np.zeros(0, np.int32), ev_hook=np.zeros(0, np.int32), ev_rkind=np.zeros(0, np.int8),
        ev_rpol=np.zeros(0, np.int8),
        ec_op=np.array(ec_op, dtype=np.int64), hook_op=np.array(hook_op, dtype=np.int64),
        hook_qubit=np.array(hook_qubit, dtype=np.int64),
        meta=dict(c.metadata),
    )
    _build_chains(prog)
    return prog


def _build_chains(prog: Program) -> None:
    """Per-qubit worldline event lists, concatenated qubit by qubit."""
    per_q: list[list[tuple]] = [[] for _ in range(prog.num_qubits)]
    for i in range(prog.n_ops):
        code = prog.code[i]
        a, b = int(prog.a[i]), int(prog.b[i])
        if code in (OP_CX, OP_CZ):
            h = int(prog.hook[i])
            per_q[a].append((EV_GATE, 0.0, 0.0, -1, h, 0, 0))
            per_q[b].append((EV_GATE, 0.0, 0.0, -1, h + 1, 0, 0))
        elif code in (OP_M, OP_MX):
            per_q[a].append((EV_MEAS, 0.0, 0.0, -1, int(prog.hook[i]), 0, 0))
        elif code == OP_ERASE:
            per_q[a].append((EV_ERASE, float(prog.f0[i]), 0.0, -1, -1, 0, 0))
        elif code == OP_EC:
            per_q[a].append((EV_EC, float(prog.f0[i]), float(prog.f1[i]), int(prog.idx[i]), -1, 0, 0))
        elif code == OP_RESET:
            per_q[a].append((EV_RESET, 0.0, 0.0, int(prog.prev_ec[i]), int(prog.hook[i]),
                             int(prog.rkind[i]), int(prog.rpol[i])))
        elif code in (OP_R, OP_RX):
            per_q[a].append((EV_PREP, 0.0, 0.0, -1, -1, 0, 0))
    ptr = [0]
    flat = []
    for evs in per_q:
        flat.extend(evs)
        ptr.append(len(flat))
    cols = list(zip(*flat)) if flat else [()] * 7
    prog.ch_ptr = np.array(ptr, dtype=np.int64)
    prog.ev_type = np.array(cols[0], dtype=np.int8)
    prog.ev_f0 = np.array(cols[1], dtype=np.float64)
    prog.ev_f1 = np.array(cols[2], dtype=np.float64)
    prog.ev_ec = np.array(cols[3], dtype=np.int32)
    prog.ev_hook = np.array(cols[4], dtype=np.int32)
    prog.ev_rkind = np.array(cols[5], dtype=np.int8)
    prog.ev_rpol = np.array(cols[6], dtype=np.int8)
