"""From an erasure circuit plus check outcomes to independent error mechanisms.

The erasure state of each qubit is a two-state chain (ok, erased): erasure
locations move ok -> erased, resets and preparations move erased -> ok, and
erasure checks are noisy observations of the state.  Posterior probabilities
of being erased at each gate, measurement and reset come from a
forward-backward pass over that chain.

*Approximate conversion*: every place where an erased qubit can damage the
state (the partner after a gate, the qubit after a depolarizing reset, a
measurement outcome) gets independent mechanisms whose marginals match the
posterior: X, Y and Z each with ``(1 - sqrt(1 - a)) / 2`` for a full
depolarization with probability ``a``, or a single flip with ``a / 2`` for a
fair coin (measurement outcomes, Z-only spread).

*Exact conversion*: within a segment the erased set is a suffix of its damage
sites, so the characteristic function of the joint damage distribution is
``1 - a_k`` with ``k`` the last site the character touches.  Taking the
Walsh-Hadamard transform of its logarithm yields one independent mechanism
per nonzero damage pattern.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .circuit import ErasureCircuit, NoiseParams, Segment
from .program import (
    OP_CX, OP_CZ, OP_DEP1, OP_DEP2, OP_M, OP_MX, OP_R, OP_RESET, OP_RX, OP_XERR, OP_ZERR, Program,
)
from .sampler import is_biased, program_for

PROB_FLOOR = 1e-15
DEGENERATE_TOL = 1e-12

RULE_FIXED, RULE_DEPOL, RULE_COIN, RULE_EXACT = range(4)
PROV_ERASURE, PROV_PAULI, PROV_FLIP = range(3)
PROVENANCE = ("erasure-induced", "pauli-noise", "classical-flip")
PAULI_BITS = {1: "X", 2: "Z", 3: "Y"}


def depolarizing_component(a):
    """Per-Pauli rate of three independent X/Y/Z mechanisms that together
    depolarize fully with probability ``a``."""
    a = np.clip(a, 0.0, 1.0)
    return 0.5 * (1.0 - np.sqrt(1.0 - a))


def dep1_component(p):
    return 0.5 * (1.0 - np.sqrt(max(0.0, 1.0 - 4.0 * p / 3.0)))


def dep2_component(p):
    return 0.5 * (1.0 - max(0.0, 1.0 - 16.0 * p / 15.0) ** 0.125)


# ---------------------------------------------------------------------------
# posteriors


@dataclass
class PosteriorTable:
    """Posteriors for one segment.

    ``a_bar[i]`` is P(erased before gate i | outcomes) for i < r, and the
    last entry is the probability the closing reset depolarizes the qubit
    (present only when the segment ends in a reset).  ``a_meas`` holds the
    probability for each in-segment measurement.
    """

    a_bar: list[float]
    a_meas: list[float]
    saturated: bool = False


def _forward_backward(events, observe):
    """Generic two-state pass; ``events`` is a list of (kind, params).

    kinds: 'erase' (e), 'ec' (q_fn, q_fp, outcome or None), 'mark' (probe
    point), 'reset' (kind, applied), 'prep'.  Returns the posterior erased
    probability at each 'mark' and P(depolarize) at each applied reset, in
    event order.
    """
    n = len(events)
    F = np.zeros((n + 1, 2))
    f = np.array([1.0, 0.0])
    for i, (kind, par) in enumerate(events):
        F[i] = f
        if kind == "erase":
            e = par[0]
            f = np.array([f[0] * (1 - e), f[1] + f[0] * e])
        elif kind == "ec":
            qfn, qfp, o = par
            if o is not None and observe:
                f = f * (np.array([qfp, 1 - qfn]) if o else np.array([1 - qfp, qfn]))
        elif kind == "reset":
            rk, applied = par
            if applied:
                f = np.array([0.5 * f[0] + f[1], 0.5 * f[0]]) if rk == "unitary" else np.array([f.sum(), 0.0])
        elif kind == "prep":
            f = np.array([f.sum(), 0.0])
        s = f.sum()
        if s > 0:
            f = f / s
    out = [None] * n
    b = np.array([1.0, 1.0])
    for i in range(n - 1, -1, -1):
        kind, par = events[i]
        g = F[i]
        if kind == "mark":
            z = g @ b
            out[i] = g[1] * b[1] / z if z > 0 else 0.0
        elif kind == "erase":
            e = par[0]
            b = np.array([(1 - e) * b[0] + e * b[1], b[1]])
        elif kind == "ec":
            qfn, qfp, o = par
            if o is not None and observe:
                b = b * (np.array([qfp, 1 - qfn]) if o else np.array([1 - qfp, qfn]))
        elif kind == "reset":
            rk, applied = par
            if applied:
                if rk == "unitary":
                    z = g[0] * 0.5 * (b[0] + b[1]) + g[1] * b[0]
                    out[i] = (g[1] * b[0] + 0.5 * g[0] * b[0]) / z if z > 0 else 0.0
                    b = np.array([0.5 * (b[0] + b[1]), b[0]])
                else:
                    z = g.sum() * b[0]
                    out[i] = g[1] * b[0] / z if z > 0 else 0.0
                    b = np.array([b[0], b[0]])
        elif kind == "prep":
            b = np.array([b[0], b[0]])
        s = b.sum()
        if s > 0:
            b = b / s
    return out


def compute_posteriors(seg: Segment, ec_outcomes, params: NoiseParams | None = None,
                       reset_kind: str = "mixed", observe: bool = True) -> PosteriorTable:
    """Exact posteriors for one segment given its check outcomes.

    ``ec_outcomes`` maps each check's instruction index to its outcome, or is
    a sequence giving the segment's check outcomes in order.  Rates come from
    the segment events; ``params`` (if given) overrides them.
    """
    if isinstance(ec_outcomes, dict):
        outcome_of = dict(ec_outcomes)
    else:
        checks = [ev.instruction for ev in seg.events if ev.kind == "ec"]
        outcome_of = dict(zip(checks, ec_outcomes))
    events = []
    probe = []
    for ev in seg.events:
        if ev.kind == "erase":
            events.append(("erase", (params.e if params else ev.rate,)))
        elif ev.kind == "ec":
            qfn = params.q_fn if params else ev.rate
            qfp = params.q_fp if params else ev.rate_fp
            events.append(("ec", (qfn, qfp, outcome_of.get(ev.instruction))))
        elif ev.kind in ("gate", "measure"):
            probe.append((ev.kind, len(events)))
            events.append(("mark", None))
    closing = None
    if seg.closed_by is not None:
        closing = len(events)
        events.append(("reset", (reset_kind, True)))
    out = _forward_backward(events, observe)
    a_gate = [out[i] for k, i in probe if k == "gate"]
    a_meas = [out[i] for k, i in probe if k == "measure"]
    if closing is not None:
        a_gate.append(out[closing])
    sat = any(a > 1 - DEGENERATE_TOL for a in a_gate + a_meas)
    return PosteriorTable(a_gate, a_meas, sat)


def posteriors(prog: Program, ec_obs: np.ndarray, observe: bool | None = None) -> np.ndarray:
    """Hook posteriors for a batch of check-outcome rows, shape (S, n_hooks)."""
    if observe is None:
        observe = bool(prog.meta.get("erasure_info", True))
    ec_obs = np.ascontiguousarray(np.atleast_2d(ec_obs), dtype=np.uint8)
    if ec_obs.shape[1] != prog.n_ec:
        raise ValueError("outcome rows do not match the number of erasure checks")
    return K.posterior_kernel(prog.ch_ptr, prog.ev_type, prog.ev_f0, prog.ev_f1, prog.ev_ec,
                              prog.ev_hook, prog.ev_rkind, prog.ev_rpol, ec_obs, observe, prog.n_hooks)


# ---------------------------------------------------------------------------
# mechanism templates


@dataclass
class ExactTable:
    """Segments handled by exact conversion.

    For segment g: ``hooks[g]`` lists the posterior hook of each damage site
    in time order, ``bits[g]`` its group size in bits, and its templates are
    ``first[g] .. first[g] + 2**K - 2`` for subsets 1 .. 2**K - 1.
    """

    hooks: list[list[int]] = field(default_factory=list)
    bits: list[list[int]] = field(default_factory=list)
    first: list[int] = field(default_factory=list)


@dataclass
class Templates:
    """Error mechanisms with structure fixed per circuit and probabilities
    that depend on the check outcomes.

    Sites are (op index, qubit) pairs meaning "right after that op".  A
    template is an XOR of components; a component is a Pauli (bit 1 = X,
    bit 2 = Z) on a site, or a flip of a measurement record.
    """

    site_op: np.ndarray
    site_q: np.ndarray
    comp_ptr: np.ndarray
    comp_site: np.ndarray  # site id, or -1 - record for an outcome flip
    comp_pauli: np.ndarray
    rule: np.ndarray
    const: np.ndarray
    hook: np.ndarray
    provenance: np.ndarray
    exact: ExactTable | None = None

    def __len__(self) -> int:
        return len(self.rule)

    def components(self, t: int) -> list[tuple[int, int]]:
        lo, hi = self.comp_ptr[t], self.comp_ptr[t + 1]
        return list(zip(self.comp_site[lo:hi].tolist(), self.comp_pauli[lo:hi].tolist()))


class _Builder:
    def __init__(self):
        self.site_index: dict[tuple[int, int], int] = {}
        self.comp_ptr = [0]
        self.comp_site: list[int] = []
        self.comp_pauli: list[int] = []
        self.rule: list[int] = []
        self.const: list[float] = []
        self.hook: list[int] = []
        self.prov: list[int] = []

    def site(self, op: int, q: int) -> int:
        key = (op, q)
        s = self.site_index.get(key)
        if s is None:
            s = self.site_index[key] = len(self.site_index)
        return s

    def add(self, comps, rule, const=0.0, hook=-1, prov=PROV_PAULI):
        for s, p in comps:
            self.comp_site.append(s)
            self.comp_pauli.append(p)
        self.comp_ptr.append(len(self.comp_site))
        self.rule.append(rule)
        self.const.append(const)
        self.hook.append(hook)
        self.prov.append(prov)

    def finish(self, exact=None) -> Templates:
        sites = sorted(self.site_index.items(), key=lambda kv: kv[1])
        return Templates(
            site_op=np.array([k[0] for k, _ in sites], dtype=np.int64),
            site_q=np.array([k[1] for k, _ in sites], dtype=np.int64),
            comp_ptr=np.array(self.comp_ptr, dtype=np.int64),
            comp_site=np.array(self.comp_site, dtype=np.int64),
            comp_pauli=np.array(self.comp_pauli, dtype=np.int8),
            rule=np.array(self.rule, dtype=np.int8),
            const=np.array(self.const, dtype=np.float64),
            hook=np.array(self.hook, dtype=np.int64),
            provenance=np.array(self.prov, dtype=np.int8),
            exact=exact,
        )


def build_templates(prog: Program, mode: str = "approximate", max_r: int = 2,
                    include_erasure: bool | None = None) -> Templates:
    """Mechanism templates for ``prog``.

    ``mode`` is 'approximate' or 'exact' and only affects erasure-induced
    mechanisms.  Ordinary channels with zero probability are skipped.
    """
    if mode not in ("approximate", "exact"):
        raise ValueError(f"unknown conversion mode {mode!r}")
    if include_erasure is None:
        include_erasure = prog.has_erasure
    biased = is_biased(prog)
    bld = _Builder()
    for i in range(prog.n_ops):
        c = prog.code[i]
        a = int(prog.a[i])
        p = float(prog.f0[i])
        if c == OP_DEP1 and p > 0:
            s = bld.site(i, a)
            pc = dep1_component(p)
            for pa in (1, 3, 2):
                bld.add([(s, pa)], RULE_FIXED, pc)
        elif c == OP_DEP2 and p > 0:
            sa, sb = bld.site(i, a), bld.site(i, int(prog.b[i]))
            pc = dep2_component(p)
            for k in range(1, 16):
                pa, pb = k & 3, k >> 2
                comps = ([(sa, pa)] if pa else []) + ([(sb, pb)] if pb else [])
                bld.add(comps, RULE_FIXED, pc)
        elif c == OP_XERR and p > 0:
            bld.add([(bld.site(i, a), 1)], RULE_FIXED, p)
        elif c == OP_ZERR and p > 0:
            bld.add([(bld.site(i, a), 2)], RULE_FIXED, p)
        elif c in (OP_M, OP_MX) and p > 0:
            bld.add([(-1 - int(prog.idx[i]), 0)], RULE_FIXED, p, prov=PROV_FLIP)
    exact = None
    if include_erasure:
        if mode == "approximate":
            _approximate_templates(prog, bld, biased)
        else:
            exact = _exact_templates(prog, bld, biased, max_r)
    return bld.finish(exact)


def _approximate_templates(prog: Program, bld: _Builder, biased: bool) -> None:
    for i in range(prog.n_ops):
        c = prog.code[i]
        if c in (OP_CX, OP_CZ):
            a, b = int(prog.a[i]), int(prog.b[i])
            h = int(prog.hook[i])
            for hook, partner in ((h, b), (h + 1, a)):
                s = bld.site(i, partner)
                if biased:
                    bld.add([(s, 2)], RULE_COIN, hook=hook, prov=PROV_ERASURE)
                else:
                    for pa in (1, 3, 2):
                        bld.add([(s, pa)], RULE_DEPOL, hook=hook, prov=PROV_ERASURE)
        elif c in (OP_M, OP_MX):
            bld.add([(-1 - int(prog.idx[i]), 0)], RULE_COIN, hook=int(prog.hook[i]), prov=PROV_ERASURE)
        elif c == OP_RESET:
            s = bld.site(i, int(prog.a[i]))
            for pa in (1, 3, 2):
                bld.add([(s, pa)], RULE_DEPOL, hook=int(prog.hook[i]), prov=PROV_ERASURE)


def _segment_damage_sites(prog: Program):
    """Per qubit segment: list of (kind, op, hook, target) damage sites.

    kind 'gate' damages the partner, 'meas' the outcome, 'reset' the qubit.
    """
    segs: dict[int, list] = {q: [] for q in range(prog.num_qubits)}
    done = []
    for i in range(prog.n_ops):
        c = prog.code[i]
        if c in (OP_CX, OP_CZ):
            a, b = int(prog.a[i]), int(prog.b[i])
            h = int(prog.hook[i])
            segs[a].append(("gate", i, h, b))
            segs[b].append(("gate", i, h + 1, a))
        elif c in (OP_M, OP_MX):
            segs[int(prog.a[i])].append(("meas", i, int(prog.hook[i]), int(prog.idx[i])))
        elif c == OP_RESET:
            q = int(prog.a[i])
            if prog.rpol[i] != 0:
                raise ValueError("exact conversion needs unconditional resets")
            segs[q].append(("reset", i, int(prog.hook[i]), q))
            done.append((q, segs[q]))
            segs[q] = []
        elif c in (OP_R, OP_RX):
            q = int(prog.a[i])
            done.append((q, segs[q]))
            segs[q] = []
    for q in range(prog.num_qubits):
        done.append((q, segs[q]))
    return [(q, s) for q, s in done if s]


def _exact_templates(prog: Program, bld: _Builder, biased: bool, max_r: int) -> ExactTable:
    table = ExactTable()
    for q, sites in _segment_damage_sites(prog):
        r = sum(1 for s in sites if s[0] == "gate")
        if r > max_r:
            raise ValueError(f"segment on qubit {q} has r={r} > max_r={max_r}; exact conversion refused")
        comps_of_site = []
        bits = []
        hooks = []
        for kind, op, hook, target in sites:
            if kind == "gate":
                s = bld.site(op, target)
                if biased:
                    comps_of_site.append([(s, 2)])
                    bits.append(1)
                else:
                    comps_of_site.append([(s, 1), (s, 2)])
                    bits.append(2)
            elif kind == "meas":
                comps_of_site.append([(-1 - target, 0)])
                bits.append(1)
            else:
                s = bld.site(op, target)
                comps_of_site.append([(s, 1), (s, 2)])
                bits.append(2)
            hooks.append(hook)
        table.hooks.append(hooks)
        table.bits.append(bits)
        table.first.append(len(bld.rule))
        K_bits = sum(bits)
        g = len(table.hooks) - 1
        for subset in range(1, 1 << K_bits):
            comps = []
            off = 0
            for j, nb in enumerate(bits):
                part = (subset >> off) & ((1 << nb) - 1)
                off += nb
                if not part:
                    continue
                if nb == 2:
                    s = comps_of_site[j][0][0]
                    comps.append((s, part))  # bit 1 = X, bit 2 = Z
                else:
                    comps.append(comps_of_site[j][0])
            bld.add(comps, RULE_EXACT, hook=g, prov=PROV_ERASURE)
    return table


def _walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalized transform along the last axis (length a power of two)."""
    v = v.copy()
    n = v.shape[-1]
    h = 1
    while h < n:
        shape = v.shape[:-1] + (n // (2 * h), 2, h)
        w = v.reshape(shape)
        a = w[..., 0, :].copy()
        b = w[..., 1, :]
        w[..., 0, :] = a + b
        w[..., 1, :] = a - b
        v = w.reshape(v.shape)
        h *= 2
    return v


def exact_segment_probabilities(a_bar: np.ndarray, bits: list[int]) -> np.ndarray:
    """Mechanism probabilities for all nonzero damage patterns of a segment.

    ``a_bar`` has shape (..., n_sites): per damage site, the probability the
    qubit is erased there (nondecreasing along the segment).  Returns shape
    (..., 2**K - 1), pattern ``s`` at index ``s - 1``.
    """
    a_bar = np.clip(np.asarray(a_bar, dtype=np.float64), 0.0, 1.0 - PROB_FLOOR)
    K_bits = sum(bits)
    N = 1 << K_bits
    # last site touched by each character
    last = np.full(N, -1)
    off = 0
    for j, nb in enumerate(bits):
        for chi in range(N):
            if (chi >> off) & ((1 << nb) - 1):
                last[chi] = j
        off += nb
    logq = np.log1p(-a_bar)
    L = np.zeros(a_bar.shape[:-1] + (N,))
    nz = last >= 0
    L[..., nz] = logq[..., last[nz]]
    w = -(2.0 / N) * _walsh_hadamard(L)
    p = 0.5 * (1.0 - np.exp(np.minimum(w, 0.0)))
    return p[..., 1:]


def template_probabilities(tpl: Templates, post: np.ndarray) -> np.ndarray:
    """Probabilities of every template for one posterior row."""
    p = tpl.const.copy()
    r = tpl.rule
    m = r == RULE_DEPOL
    if m.any():
        p[m] = depolarizing_component(post[tpl.hook[m]])
    m = r == RULE_COIN
    if m.any():
        p[m] = 0.5 * np.clip(post[tpl.hook[m]], 0.0, 1.0)
    if tpl.exact is not None and tpl.exact.hooks:
        ex = tpl.exact
        groups: dict[tuple, list[int]] = {}
        for g, b in enumerate(ex.bits):
            groups.setdefault(tuple(b), []).append(g)
        for b, gs in groups.items():
            a = np.array([[post[h] for h in ex.hooks[g]] for g in gs])
            probs = exact_segment_probabilities(a, list(b))
            n = probs.shape[1]
            idx = (np.array([ex.first[g] for g in gs])[:, None] + np.arange(n)[None, :]).ravel()
            p[idx] = probs.ravel()
    return p


# ---------------------------------------------------------------------------
# public conversion API


@dataclass
class ErrorMechanism:
    probability: float
    fault: tuple  # ((op, qubit, 'X'|'Y'|'Z'), ...) and/or (('flip', record),)
    provenance: str
    detectors: tuple[int, ...] = ()
    observables: int = 0


def _fault_of(tpl: Templates, t: int) -> tuple:
    out = []
    for s, pa in tpl.components(t):
        if s < 0:
            out.append(("flip", -1 - s))
        else:
            out.append((int(tpl.site_op[s]), int(tpl.site_q[s]), PAULI_BITS[pa]))
    return tuple(out)


def mechanisms_from_templates(tpl: Templates, probs: np.ndarray, keep_zero: bool = False) -> list[ErrorMechanism]:
    out = []
    for t in range(len(tpl)):
        if probs[t] <= 0.0 and not keep_zero:
            continue
        out.append(ErrorMechanism(float(probs[t]), _fault_of(tpl, t), PROVENANCE[tpl.provenance[t]]))
    return out


def stabilizer_part(c: ErasureCircuit) -> ErasureCircuit:
    """The circuit with erasure locations, checks, resets and noise removed."""
    keep = [i for i in c.instructions if not i.is_noise() and i.name not in ("EC", "RESET")]
    return c.copy(instructions=keep)


def _outcome_row(prog: Program, ec_outcomes) -> np.ndarray:
    if ec_outcomes is None:
        return np.zeros(prog.n_ec, dtype=np.uint8)
    return np.asarray(ec_outcomes, dtype=np.uint8).reshape(prog.n_ec)


def approximate_convert(c: ErasureCircuit, ec_outcomes=None):
    """Independent mechanisms for ``c`` given observed check outcomes.

    Returns (stabilizer circuit, mechanisms, saturated) where ``saturated``
    flags posteriors within tolerance of 1 (rates capped at 1/2).
    """
    prog = program_for(c)
    tpl = build_templates(prog, "approximate", include_erasure=True)
    post = posteriors(prog, _outcome_row(prog, ec_outcomes)[None, :])[0]
    saturated = bool((post > 1 - DEGENERATE_TOL).any())
    probs = template_probabilities(tpl, post)
    return stabilizer_part(c), mechanisms_from_templates(tpl, probs), saturated


def exact_convert(c: ErasureCircuit, ec_outcomes=None, max_r: int = 2):
    """Correlated per-segment mechanisms expanded into independent ones."""
    prog = program_for(c)
    tpl = build_templates(prog, "exact", max_r=max_r, include_erasure=True)
    post = posteriors(prog, _outcome_row(prog, ec_outcomes)[None, :])[0]
    probs = template_probabilities(tpl, post)
    return stabilizer_part(c), mechanisms_from_templates(tpl, probs)


def exact_segment_mechanisms(seg_a_bar, pauli_sites: int, flip_sites: int = 0):
    """Mechanisms for a standalone segment: ``pauli_sites`` depolarizing
    damage sites followed by ``flip_sites`` outcome-flip sites.

    Returns a list of (pattern, probability) with ``pattern`` a tuple of
    per-site letters ('I','X','Y','Z' or '0','1').
    """
    bits = [2] * pauli_sites + [1] * flip_sites
    probs = exact_segment_probabilities(np.asarray(seg_a_bar, dtype=float), bits)
    out = []
    for s in range(1, 1 << sum(bits)):
        pat = []
        off = 0
        for nb in bits:
            part = (s >> off) & ((1 << nb) - 1)
            off += nb
            pat.append("IXZY"[part] if nb == 2 else str(part))
        out.append((tuple(pat), float(probs[s - 1])))
    return out
