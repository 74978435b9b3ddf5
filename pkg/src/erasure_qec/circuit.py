"""Erasure circuits: instructions, noise annotation, segments and a text format.

An ideal circuit holds preparations, gates, measurements, erasure checks
(``EC``) and resets.  ``annotate_noise`` turns it into a simulated circuit by
adding erasure locations, Pauli channels and classical flip rates.

Text format (one instruction per line)::

    # erasure-circuit v1
    QUBITS 17
    META {"d": 3, ...}
    R 0 1 2
    TICK
    ERASE(0.001) 0 1 2
    CX 0 1
    DEPOLARIZE2(0.001) 0 1
    EC(0.01,0.01) 3
    RESET(mixed,unconditional) 3
    M(0.01) 9 10
    DETECTOR(Z;2,4,3) rec[-1] rec[-9]
    OBSERVABLE_INCLUDE(0) rec[-3]

``TICK`` advances the time step.  Measurement records are numbered in order
of appearance; ``rec[-k]`` refers to the k-th most recent one.  Detectors and
observables are written right after the measurement that completes them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

PREP = ("R", "RX")
MEASURE = ("M", "MX")
GATE1 = ("I", "H", "S")
GATE2 = ("CX", "CZ")
NOISE = ("DEPOLARIZE1", "DEPOLARIZE2", "X_ERROR", "Z_ERROR")
RESET_KINDS = ("mixed", "one-way", "unitary")
RESET_POLICIES = ("unconditional", "conditional")

KIND_OF = {
    **{n: "prep" for n in PREP},
    **{n: "measure" for n in MEASURE},
    **{n: "gate1q" for n in GATE1},
    **{n: "gate2q" for n in GATE2},
    **{n: "pauli-noise" for n in NOISE},
    "ERASE": "erasure-location",
    "EC": "erasure-check",
    "RESET": "reset",
}
FORMAT_HEADER = "# erasure-circuit v1"


@dataclass(frozen=True)
class NoiseParams:
    """Noise strengths.  ``q_fn``/``q_fp`` default to ``q``.

    ``ec_noiseless`` removes erasure locations and Pauli noise from steps in
    which a qubit only undergoes an erasure check and reset.  ``gate_only``
    keeps noise only in two-qubit-gate steps and rescales the erasure rate so
    that ``e`` stays the average per operation.
    """

    e: float = 0.0
    p: float = 0.0
    q: float = 0.0
    q_fn: float | None = None
    q_fp: float | None = None
    ec_noiseless: bool = False
    gate_only: bool = False

    def __post_init__(self):
        if self.q_fn is None:
            object.__setattr__(self, "q_fn", self.q)
        if self.q_fp is None:
            object.__setattr__(self, "q_fp", self.q)
        for name in ("e", "p", "q", "q_fn", "q_fp"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("e", "p", "q", "q_fn", "q_fp", "ec_noiseless", "gate_only")}


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple[int, ...]
    args: tuple[float, ...] = ()
    tick: int = 0
    reset_kind: str | None = None
    reset_policy: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "args", tuple(float(a) for a in self.args))
        if self.name not in KIND_OF:
            raise ValueError(f"unknown instruction {self.name!r}")
        if self.name in GATE2 or self.name == "DEPOLARIZE2":
            if len(self.targets) % 2:
                raise ValueError(f"{self.name} needs an even number of targets")
            pairs = self.pairs()
            if any(a == b for a, b in pairs):
                raise ValueError(f"{self.name} on a repeated qubit")
        if self.name == "RESET":
            if self.reset_kind not in RESET_KINDS or self.reset_policy not in RESET_POLICIES:
                raise ValueError(f"bad reset options {self.reset_kind}/{self.reset_policy}")
        elif self.reset_kind is not None or self.reset_policy is not None:
            raise ValueError("reset options on a non-reset instruction")

    @property
    def kind(self) -> str:
        return KIND_OF[self.name]

    def pairs(self) -> list[tuple[int, int]]:
        t = self.targets
        return [(t[i], t[i + 1]) for i in range(0, len(t), 2)]

    def is_noise(self) -> bool:
        return self.name in NOISE or self.name == "ERASE"


@dataclass(frozen=True)
class Detector:
    records: tuple[int, ...]
    basis: str = ""
    coords: tuple[float, ...] = ()


@dataclass
class ErasureCircuit:
    num_qubits: int
    instructions: list[Instruction]
    detectors: list[Detector] = field(default_factory=list)
    observables: list[tuple[int, ...]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.detectors = [d if isinstance(d, Detector) else Detector(tuple(d)) for d in self.detectors]
        self.observables = [tuple(o) for o in self.observables]
        n_rec = self.num_measurements
        for i, d in enumerate(self.detectors):
            if any(not 0 <= r < n_rec for r in d.records):
                raise ValueError(f"detector {i} references a missing measurement")
        for i, o in enumerate(self.observables):
            if any(not 0 <= r < n_rec for r in o):
                raise ValueError(f"observable {i} references a missing measurement")
        for ins in self.instructions:
            if any(not 0 <= t < self.num_qubits for t in ins.targets):
                raise ValueError(f"{ins.name} targets a qubit outside 0..{self.num_qubits - 1}")

    @property
    def num_measurements(self) -> int:
        return sum(len(i.targets) for i in self.instructions if i.name in MEASURE)

    @property
    def num_erasure_checks(self) -> int:
        return sum(len(i.targets) for i in self.instructions if i.name == "EC")

    @property
    def num_ticks(self) -> int:
        return 1 + max((i.tick for i in self.instructions), default=0)

    @property
    def annotated(self) -> bool:
        return bool(self.metadata.get("annotated", False))

    def copy(self, **changes) -> "ErasureCircuit":
        kw = dict(
            num_qubits=self.num_qubits,
            instructions=list(self.instructions),
            detectors=list(self.detectors),
            observables=list(self.observables),
            metadata=json.loads(json.dumps(self.metadata)),
        )
        kw.update(changes)
        return ErasureCircuit(**kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ErasureCircuit):
            return NotImplemented
        return (
            self.num_qubits == other.num_qubits
            and self.instructions == other.instructions
            and self.detectors == other.detectors
            and self.observables == other.observables
            and self.metadata == other.metadata
        )

    def count(self, name: str) -> int:
        return sum(len(i.targets) for i in self.instructions if i.name == name)

    def to_text(self) -> str:
        return dumps(self)

    @classmethod
    def from_text(cls, text: str) -> "ErasureCircuit":
        return loads(text)


# ---------------------------------------------------------------------------
# text format


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v))


def dumps(c: ErasureCircuit) -> str:
    lines = [FORMAT_HEADER, f"QUBITS {c.num_qubits}"]
    if c.metadata:
        lines.append("META " + json.dumps(c.metadata, sort_keys=True))
    # detectors/observables are emitted, in list order, as soon as the
    # measurements they reference exist
    items = []
    for d in c.detectors:
        head = "DETECTOR"
        if d.basis or d.coords:
            head += "(" + d.basis + ";" + ",".join(_fmt_num(x) for x in d.coords) + ")"
        items.append((head, d.records))
    obs_items = [(f"OBSERVABLE_INCLUDE({k})", o) for k, o in enumerate(c.observables)]
    cursor = [0, 0]

    def flush(n_rec: int):
        for which, seq in ((0, items), (1, obs_items)):
            while cursor[which] < len(seq):
                head, recs = seq[cursor[which]]
                if recs and max(recs) >= n_rec:
                    break
                refs = " ".join(f"rec[{r - n_rec}]" for r in recs)
                lines.append(f"{head} {refs}".rstrip())
                cursor[which] += 1

    n_rec = 0
    tick = 0
    flush(0)
    for ins in c.instructions:
        while tick < ins.tick:
            lines.append("TICK")
            tick += 1
        if ins.tick < tick:
            raise ValueError("instructions are not in tick order")
        head = ins.name
        if ins.name == "RESET":
            head += f"({ins.reset_kind},{ins.reset_policy})"
        elif ins.args:
            head += "(" + ",".join(repr(a) for a in ins.args) + ")"
        lines.append(head + " " + " ".join(str(t) for t in ins.targets))
        if ins.name in MEASURE:
            n_rec += len(ins.targets)
            flush(n_rec)
    if cursor != [len(items), len(obs_items)]:
        raise ValueError("unresolved detector references")
    return "\n".join(lines) + "\n"


def _split_head(tok: str) -> tuple[str, str | None]:
    if "(" in tok:
        name, rest = tok.split("(", 1)
        if not rest.endswith(")"):
            raise ValueError(f"malformed instruction head {tok!r}")
        return name, rest[:-1]
    return tok, None


def loads(text: str) -> ErasureCircuit:
    lines = [ln.strip() for ln in text.splitlines()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError("missing erasure-circuit header")
    num_qubits = None
    metadata: dict = {}
    instructions: list[Instruction] = []
    detectors: list[Detector] = []
    observables: dict[int, tuple[int, ...]] = {}
    tick = 0
    n_rec = 0
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln or ln.startswith("#"):
            continue
        head, _, rest = ln.partition(" ")
        rest = rest.strip()
        if head == "QUBITS":
            num_qubits = int(rest)
            continue
        if head == "META":
            metadata = json.loads(rest)
            continue
        if head == "TICK":
            tick += 1
            continue
        name, inner = _split_head(head)
        toks = rest.split() if rest else []
        if name in ("DETECTOR", "OBSERVABLE_INCLUDE"):
            recs = []
            for t in toks:
                if not (t.startswith("rec[-") and t.endswith("]")):
                    raise ValueError(f"line {lineno}: bad record reference {t!r}")
                recs.append(n_rec - int(t[5:-1]))
            if name == "DETECTOR":
                basis, coords = "", ()
                if inner is not None:
                    basis, _, cs = inner.partition(";")
                    coords = tuple(float(x) for x in cs.split(",") if x)
                detectors.append(Detector(tuple(recs), basis, coords))
            else:
                observables[int(inner)] = tuple(recs)
            continue
        targets = tuple(int(t) for t in toks)
        if name == "RESET":
            kind, policy = inner.split(",")
            ins = Instruction(name, targets, (), tick, kind, policy)
        else:
            args = tuple(float(a) for a in inner.split(",")) if inner else ()
            ins = Instruction(name, targets, args, tick)
        instructions.append(ins)
        if name in MEASURE:
            n_rec += len(targets)
    if num_qubits is None:
        raise ValueError("missing QUBITS line")
    obs = [observables[k] for k in sorted(observables)]
    return ErasureCircuit(num_qubits, instructions, detectors, obs, metadata)


# ---------------------------------------------------------------------------
# noise annotation


def annotate_noise(ideal: ErasureCircuit, params: NoiseParams) -> ErasureCircuit:
    """Map an ideal circuit to a simulated one.

    Per noisy time step and qubit: one erasure location at the start of the
    step (unless the qubit is freshly prepared or reset), a depolarizing
    channel after every preparation, gate and reset, an implicit erasure
    check before every readout, flip rate ``q`` on measurement outcomes and
    ``(q_fn, q_fp)`` on erasure-check outcomes.  Idle qubits get the erasure
    location and a one-qubit depolarizing channel.  Ticks listed in
    ``metadata["noiseless_ticks"]`` are copied unchanged.
    """
    if ideal.annotated or any(i.is_noise() for i in ideal.instructions):
        raise ValueError("circuit already annotated")
    md = ideal.metadata
    noiseless = set(md.get("noiseless_ticks", []))
    tick_kinds = md.get("tick_kinds")
    erasure_info = md.get("erasure_info", True)
    slots_per_round = md.get("l")
    e, p = params.e, params.p
    if params.gate_only:
        if slots_per_round is None:
            raise ValueError("gate_only noise needs the schedule size l in metadata")
        e = min(1.0, e * (4 + slots_per_round) / 4)
    by_tick: dict[int, list[Instruction]] = {}
    for ins in ideal.instructions:
        by_tick.setdefault(ins.tick, []).append(ins)
    out: list[Instruction] = []
    for t in sorted(by_tick):
        ops = by_tick[t]
        if t in noiseless:
            out.extend(ops)
            continue
        if params.gate_only and tick_kinds is not None and tick_kinds[t] != "gate":
            quiet = True
        else:
            quiet = False
        first_op: dict[int, str] = {}
        ops_of: dict[int, set[str]] = {}
        for ins in ops:
            for q in ins.targets:
                first_op.setdefault(q, ins.name)
                ops_of.setdefault(q, set()).add(ins.name)
        in_2q = {q for ins in ops if ins.name in GATE2 for q in ins.targets}

        def silent(q: int) -> bool:
            if quiet:
                return True
            if params.ec_noiseless and q in ops_of and ops_of[q] <= {"EC", "RESET"}:
                return True
            return False

        erase_targets = [
            q for q in range(ideal.num_qubits)
            if not silent(q) and first_op.get(q) not in PREP + ("RESET",)
        ]
        if erase_targets:
            out.append(Instruction("ERASE", erase_targets, (e,), t))
        for ins in ops:
            if ins.name in MEASURE:
                qs = ins.targets
                out.append(Instruction("EC", qs, (params.q_fn, params.q_fp), t))
                out.append(Instruction(ins.name, qs, (params.q,), t))
            elif ins.name == "EC":
                out.append(Instruction("EC", ins.targets, (params.q_fn, params.q_fp), t))
            elif ins.name in GATE2:
                out.append(ins)
                noisy = [q for q in ins.targets if not silent(q)]
                if len(noisy) == len(ins.targets):
                    out.append(Instruction("DEPOLARIZE2", ins.targets, (p,), t))
            elif ins.name in GATE1:
                out.append(ins)
                # single-qubit gates sharing a step with a two-qubit gate are
                # basis changes folded into that gate and carry no own channel
                noisy = [q for q in ins.targets if q not in in_2q and not silent(q)]
                if noisy:
                    out.append(Instruction("DEPOLARIZE1", noisy, (p,), t))
            else:  # prep or reset
                out.append(ins)
                if ins.name == "RESET" and not erasure_info:
                    continue  # baseline without checks: resets are noiseless
                noisy = [q for q in ins.targets if not silent(q)]
                if noisy:
                    out.append(Instruction("DEPOLARIZE1", noisy, (p,), t))
        idle = [q for q in range(ideal.num_qubits) if q not in ops_of and not silent(q)]
        if idle:
            out.append(Instruction("DEPOLARIZE1", idle, (p,), t))
    meta = dict(md)
    meta["annotated"] = True
    meta["noise"] = params.to_dict()
    return ErasureCircuit(ideal.num_qubits, out, list(ideal.detectors), list(ideal.observables), meta)


def strip_zero_noise(c: ErasureCircuit) -> ErasureCircuit:
    """Drop noise channels whose probability is zero."""
    keep = [i for i in c.instructions if not (i.is_noise() and i.args and i.args[0] == 0.0)]
    return c.copy(instructions=keep)


# ---------------------------------------------------------------------------
# segments


@dataclass(frozen=True)
class SegmentEvent:
    """One event on a qubit worldline.

    ``kind`` is 'erase', 'gate', 'measure' or 'ec'.  ``instruction`` indexes
    the circuit's instruction list; ``partner`` is the other qubit of a gate.
    """

    kind: str
    instruction: int
    partner: int | None = None
    rate: float = 0.0
    rate_fp: float = 0.0


@dataclass(frozen=True)
class Segment:
    qubit: int
    events: tuple[SegmentEvent, ...]
    opened_by: int | None  # instruction index of the opening reset/prep
    closed_by: int | None  # instruction index of the closing reset/prep

    @property
    def r(self) -> int:
        return sum(1 for ev in self.events if ev.kind == "gate")

    @property
    def num_erasure_locations(self) -> int:
        return sum(1 for ev in self.events if ev.kind == "erase")

    def gates(self) -> list[SegmentEvent]:
        return [ev for ev in self.events if ev.kind == "gate"]


def worldline_events(c: ErasureCircuit) -> list[list[tuple[str, int, Instruction, int | None]]]:
    """Per qubit, the time-ordered (kind, instruction index, instruction, partner) list."""
    lines: list[list] = [[] for _ in range(c.num_qubits)]
    for k, ins in enumerate(c.instructions):
        if ins.name in GATE2:
            for a, b in ins.pairs():
                lines[a].append(("gate", k, ins, b))
                lines[b].append(("gate", k, ins, a))
            continue
        kind = {
            "ERASE": "erase", "EC": "ec", "RESET": "reset",
            "R": "prep", "RX": "prep", "M": "measure", "MX": "measure",
        }.get(ins.name)
        if kind is None:
            continue
        for q in ins.targets:
            lines[q].append((kind, k, ins, None))
    return lines


def extract_segments(c: ErasureCircuit) -> list[Segment]:
    """Cut every qubit worldline at resets and preparations."""
    segments: list[Segment] = []
    for q, events in enumerate(worldline_events(c)):
        cur: list[SegmentEvent] = []
        opened = None
        pending_ec = False
        for kind, k, ins, partner in events:
            if kind in ("reset", "prep"):
                if cur or opened is not None:
                    segments.append(Segment(q, tuple(cur), opened, k))
                cur = []
                opened = k
                pending_ec = False
                continue
            if kind == "erase":
                cur.append(SegmentEvent("erase", k, rate=ins.args[0] if ins.args else 0.0))
            elif kind == "gate":
                cur.append(SegmentEvent("gate", k, partner=partner))
            elif kind == "measure":
                cur.append(SegmentEvent("measure", k, rate=ins.args[0] if ins.args else 0.0))
                pending_ec = False
            elif kind == "ec":
                qfn, qfp = ins.args if ins.args else (0.0, 0.0)
                cur.append(SegmentEvent("ec", k, rate=qfn, rate_fp=qfp))
                pending_ec = True
        if pending_ec:
            raise ValueError(f"qubit {q} has an erasure check with no later reset or readout")
        if cur or opened is not None:
            segments.append(Segment(q, tuple(cur), opened, None))
    segments.sort(key=lambda s: (s.events[0].instruction if s.events else (s.opened_by or 0), s.qubit))
    return segments


def check_conditional_resets(c: ErasureCircuit) -> None:
    """A conditional reset must follow an erasure check on the same qubit."""
    last_ec: dict[int, bool] = {}
    for ins in c.instructions:
        for q in ins.targets:
            if ins.name == "EC":
                last_ec[q] = True
            elif ins.name == "RESET":
                if ins.reset_policy == "conditional" and not last_ec.get(q):
                    raise ValueError(f"conditional reset on qubit {q} without a preceding check")
                last_ec[q] = False
            elif ins.kind in ("gate2q", "gate1q", "prep", "measure"):
                last_ec[q] = False


# ---------------------------------------------------------------------------
# detector validation


@dataclass
class DetectorReport:
    ok: bool
    nondeterministic: list[int]
    reference: list[int]  # noiseless parity of every detector
    observable_reference: list[int]


def validate_detectors(c: ErasureCircuit, shots: int = 256, seed: int = 0) -> DetectorReport:
    """Noiseless check that every detector parity is fixed.

    A frame simulation with randomized measurement gauges flags detectors
    whose value varies; a tableau run supplies the reference parities.
    """
    from .program import compile_circuit
    from .sampler import gauge_detector_flips
    from .tableau import reference_measurements

    if not c.detectors and not c.observables:
        return DetectorReport(True, [], [], [])
    prog = compile_circuit(c)
    flips_det, flips_obs = gauge_detector_flips(prog, shots, seed)
    bad = sorted(int(i) for i in flips_det.any(axis=0).nonzero()[0])
    rec = reference_measurements(c, seed=seed)
    ref = [sum(int(rec[r]) for r in d.records) % 2 for d in c.detectors]
    obs_ref = [sum(int(rec[r]) for r in o) % 2 for o in c.observables]
    return DetectorReport(not bad and not flips_obs.any(), bad, ref, obs_ref)
