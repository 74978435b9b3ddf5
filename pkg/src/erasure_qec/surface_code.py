"""Rotated surface-code memory circuits with erasure-check schedules.

Layout (coordinates doubled so everything is an integer): data qubits sit at
odd points ``(2i+1, 2j+1)`` for ``0 <= i, j < d``; ancillas sit at even points
``(2i, 2j)``.  Bulk ancillas alternate X/Z in a checkerboard; X-type boundary
ancillas run along ``y = 0`` and ``y = 2d``, Z-type ones along ``x = 0`` and
``x = 2d``.  The Z logical is a row of data qubits, the X logical a column.

Each syndrome round has four two-qubit-gate steps.  X ancillas visit their
data neighbours in the order NE, SE, NW, SW (offsets (+1,+1), (+1,-1),
(-1,+1), (-1,-1)); Z ancillas in the order NE, NW, SE, SW.  With this order a
fault on an ancilla halfway through its sequence spreads to two data qubits
lying perpendicular to the logical they could otherwise shorten, so the
circuit distance stays ``d``.

Erasure checks with reset sit at slots A, B, C (after gate steps 1, 2, 3;
one extra step for every qubit) and D (data qubits, while ancillas are read
out).  Schedules: 1 EC -> {D}, 2 EC -> {B, D}, 4 EC -> {A, B, C, D}.

The XZZX variant conjugates the CSS code by Hadamards on data qubits of odd
checkerboard parity.  All ancillas start in |+>, every ancilla-data
interaction is a CZ, and the interactions that are CX in the rotated frame
are written as H-CZ-H on the data qubit within one step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import RESET_KINDS, RESET_POLICIES, Detector, ErasureCircuit, Instruction
from .pauli import PauliString

SLOTS = {1: ("D",), 2: ("B", "D"), 4: ("A", "B", "C", "D")}
VARIANTS = ("standard", "xzzx")
SPREAD_MODES = ("depolarizing", "biased-Z")
X_ORDER = ((1, 1), (-1, 1), (1, -1), (-1, -1))
Z_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class ScheduleSpec:
    """EC schedule and circuit options.

    ``erasure_info=False`` gives the baseline without erasure checks: resets
    stay in place (noiseless, unconditional) but the decoder never sees a
    check outcome.
    """

    l: int = 1
    variant: str = "standard"
    spread_mode: str = "depolarizing"
    reset_kind: str = "mixed"
    reset_policy: str = "unconditional"
    erasure_info: bool = True

    def __post_init__(self):
        if self.l not in SLOTS:
            raise ValueError(f"unsupported schedule l={self.l}; choose 1, 2 or 4")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.spread_mode not in SPREAD_MODES:
            raise ValueError(f"unknown spread mode {self.spread_mode!r}")
        if self.reset_kind not in RESET_KINDS:
            raise ValueError(f"unknown reset kind {self.reset_kind!r}")
        if self.reset_policy not in RESET_POLICIES:
            raise ValueError(f"unknown reset policy {self.reset_policy!r}")
        if not self.erasure_info and self.reset_policy == "conditional":
            raise ValueError("conditional resets need erasure-check information")

    @property
    def slots(self) -> tuple[str, ...]:
        return SLOTS[self.l]

    @classmethod
    def from_slots(cls, slots, **kw) -> "ScheduleSpec":
        for l, s in SLOTS.items():
            if tuple(sorted(slots)) == s:
                return cls(l=l, **kw)
        raise ValueError(f"unknown slot set {slots!r}")

    def to_dict(self) -> dict:
        return {
            "l": self.l, "variant": self.variant, "spread_mode": self.spread_mode,
            "reset_kind": self.reset_kind, "reset_policy": self.reset_policy,
            "erasure_info": self.erasure_info,
        }


@dataclass
class Stabilizer:
    ancilla: int
    basis: str  # CSS type of the face: "X" or "Z"
    coord: tuple[int, int]
    order: tuple[int | None, ...]  # data qubit per gate step (None = no gate)

    @property
    def support(self) -> list[int]:
        return [q for q in self.order if q is not None]


@dataclass
class CodeLayout:
    d: int
    data_coords: list[tuple[int, int]]
    stabilizers: list[Stabilizer]
    rotated: set[int] = field(default_factory=set)  # data qubits Hadamard-conjugated (XZZX)

    @property
    def num_data(self) -> int:
        return len(self.data_coords)

    @property
    def num_qubits(self) -> int:
        return self.num_data + len(self.stabilizers)

    def data_index(self, coord) -> int:
        return self._index[coord]

    def __post_init__(self):
        self._index = {c: i for i, c in enumerate(self.data_coords)}

    def stabilizer_paulis(self) -> list[PauliString]:
        out = []
        for s in self.stabilizers:
            terms = {}
            for q in s.support:
                letter = s.basis
                if q in self.rotated:
                    letter = "Z" if letter == "X" else "X"
                terms[q] = letter
            out.append(PauliString.from_sparse(self.num_qubits, terms))
        return out


def make_layout(d: int, variant: str = "standard") -> CodeLayout:
    if d < 3 or d % 2 == 0:
        raise ValueError(f"code distance must be odd and >= 3, got {d}")
    data = [(2 * i + 1, 2 * j + 1) for j in range(d) for i in range(d)]
    index = {c: k for k, c in enumerate(data)}
    stabs: list[Stabilizer] = []
    anc = len(data)
    for j in range(d + 1):
        for i in range(d + 1):
            on_x_edge = i in (0, d)
            on_y_edge = j in (0, d)
            xtype = (i + j) % 2 == 1
            if on_x_edge and xtype:
                continue
            if on_y_edge and not xtype:
                continue
            c = (2 * i, 2 * j)
            order = X_ORDER if xtype else Z_ORDER
            qs = tuple(index.get((c[0] + dx, c[1] + dy)) for dx, dy in order)
            stabs.append(Stabilizer(anc, "X" if xtype else "Z", c, qs))
            anc += 1
    rotated = set()
    if variant == "xzzx":
        rotated = {k for k, (x, y) in enumerate(data) if ((x - 1) // 2 + (y - 1) // 2) % 2 == 1}
    elif variant != "standard":
        raise ValueError(f"unknown variant {variant!r}")
    return CodeLayout(d, data, stabs, rotated)


def logical_representatives(layout: CodeLayout) -> tuple[PauliString, PauliString]:
    """(X logical, Z logical): a column of X and a row of Z through the corner."""
    n = layout.num_qubits
    col = [layout.data_index((1, 2 * j + 1)) for j in range(layout.d)]
    row = [layout.data_index((2 * i + 1, 1)) for i in range(layout.d)]

    def rot(q, letter):
        if q in layout.rotated:
            return "Z" if letter == "X" else "X"
        return letter

    xl = PauliString.from_sparse(n, {q: rot(q, "X") for q in col})
    zl = PauliString.from_sparse(n, {q: rot(q, "Z") for q in row})
    return xl, zl


def build_memory_circuit(d: int, schedule: ScheduleSpec | None = None, rounds: int | None = None,
                         basis: str = "Z") -> ErasureCircuit:
    """Ideal memory experiment: ``rounds`` syndrome rounds between noiseless
    logical preparation and noiseless transversal readout."""
    schedule = schedule or ScheduleSpec()
    if rounds is None:
        rounds = 3 * d
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    layout = make_layout(d, schedule.variant)
    xzzx = schedule.variant == "xzzx"
    n_data = layout.num_data
    data = list(range(n_data))
    ancillas = [s.ancilla for s in layout.stabilizers]
    slots = schedule.slots
    ins: list[Instruction] = []
    tick_kinds: list[str] = []
    det: list[Detector] = []
    n_rec = 0
    rk, rp = schedule.reset_kind, schedule.reset_policy

    def new_tick(kind: str) -> int:
        tick_kinds.append(kind)
        return len(tick_kinds) - 1

    def data_prep_measure(q):
        # CSS basis of the memory, swapped on Hadamard-rotated data
        b = basis
        if q in layout.rotated:
            b = "X" if b == "Z" else "Z"
        return ("R", "M") if b == "Z" else ("RX", "MX")

    def anc_basis(s: Stabilizer) -> str:
        return "X" if (xzzx or s.basis == "X") else "Z"

    # logical preparation
    t = new_tick("init")
    for name in ("R", "RX"):
        qs = [q for q in data if data_prep_measure(q)[0] == name]
        qs += [s.ancilla for s in layout.stabilizers if (anc_basis(s) == "X") == (name == "RX")]
        if qs:
            ins.append(Instruction(name, qs, (), t))

    last_meas: dict[int, int] = {}
    for r in range(rounds):
        for step in range(4):
            t = new_tick("gate")
            if xzzx:
                cz, hs = [], []
                for s in layout.stabilizers:
                    q = s.order[step]
                    if q is None:
                        continue
                    cz += [s.ancilla, q]
                    # CSS-frame gate is CX(anc->q) for X faces, CZ for Z faces;
                    # Hadamard on a rotated data qubit swaps the two
                    if (s.basis == "X") != (q in layout.rotated):
                        hs.append(q)
                hs.sort()
                if hs:
                    ins.append(Instruction("H", hs, (), t))
                ins.append(Instruction("CZ", cz, (), t))
                if hs:
                    ins.append(Instruction("H", hs, (), t))
            else:
                cx = []
                for s in layout.stabilizers:
                    q = s.order[step]
                    if q is None:
                        continue
                    cx += [s.ancilla, q] if s.basis == "X" else [q, s.ancilla]
                ins.append(Instruction("CX", cx, (), t))
            slot = "ABC"[step] if step < 3 else None
            if slot in slots:
                t = new_tick("ec")
                allq = data + ancillas
                ins.append(Instruction("EC", allq, (), t))
                ins.append(Instruction("RESET", allq, (), t, rk, rp))
        # slot D: ancilla readout while data qubits are checked and reset
        t = new_tick("readout")
        for name in ("M", "MX"):
            qs = [s.ancilla for s in layout.stabilizers if (anc_basis(s) == "X") == (name == "MX")]
            if not qs:
                continue
            ins.append(Instruction(name, qs, (), t))
            for q in qs:
                s = layout.stabilizers[q - n_data]
                m = n_rec
                n_rec += 1
                coords = (float(s.coord[0]), float(s.coord[1]), float(r))
                if r == 0:
                    if s.basis == basis:
                        det.append(Detector((m,), s.basis, coords))
                else:
                    det.append(Detector((last_meas[q], m), s.basis, coords))
                last_meas[q] = m
        ins.append(Instruction("EC", data, (), t))
        ins.append(Instruction("RESET", data, (), t, rk, rp))
        if r < rounds - 1:
            for name in ("R", "RX"):
                qs = [s.ancilla for s in layout.stabilizers if (anc_basis(s) == "X") == (name == "RX")]
                if qs:
                    ins.append(Instruction(name, qs, (), t))

    # noiseless transversal readout of the data
    t = new_tick("final")
    data_rec = {}
    for name in ("M", "MX"):
        qs = [q for q in data if data_prep_measure(q)[1] == name]
        if not qs:
            continue
        ins.append(Instruction(name, qs, (), t))
        for q in qs:
            data_rec[q] = n_rec
            n_rec += 1
    for s in layout.stabilizers:
        if s.basis != basis:
            continue
        recs = tuple(sorted(data_rec[q] for q in s.support)) + (last_meas[s.ancilla],)
        det.append(Detector(recs, s.basis, (float(s.coord[0]), float(s.coord[1]), float(rounds))))
    xl, zl = logical_representatives(layout)
    logical = zl if basis == "Z" else xl
    obs = [tuple(sorted(data_rec[q] for q in logical.support))]
    meta = {
        "d": d, "rounds": rounds, "basis": basis, **schedule.to_dict(),
        "noiseless_ticks": [0, len(tick_kinds) - 1],
        "tick_kinds": tick_kinds,
        "num_data": n_data,
    }
    return ErasureCircuit(layout.num_qubits, ins, det, obs, meta)


def build_xzzx_circuit(d: int, schedule: ScheduleSpec | None = None, rounds: int | None = None,
                       basis: str = "Z") -> ErasureCircuit:
    schedule = schedule or ScheduleSpec(variant="xzzx", spread_mode="biased-Z")
    if schedule.variant != "xzzx":
        schedule = ScheduleSpec(**{**schedule.to_dict(), "variant": "xzzx"})
    return build_memory_circuit(d, schedule, rounds, basis)
