"""Phase-free Pauli strings and their propagation through Clifford operations.

Only the support of an error matters for decoding, so a Pauli string is a
pair of integer bitmasks (x part, z part). Python ints act as arbitrary-width
bitsets; the width is fixed by ``num_qubits``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


@dataclass(frozen=True)
class PauliString:
    num_qubits: int
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        full = (1 << self.num_qubits) - 1
        if self.x_mask < 0 or self.z_mask < 0 or (self.x_mask | self.z_mask) & ~full:
            raise ValueError("Pauli support exceeds the qubit count")

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliString":
        return cls(num_qubits)

    @classmethod
    def from_sparse(cls, num_qubits: int, terms: dict[int, str] | Iterable[tuple[int, str]]) -> "PauliString":
        """Build from ``{qubit: 'X'|'Y'|'Z'}``."""
        items = terms.items() if isinstance(terms, dict) else terms
        x = z = 0
        for q, letter in items:
            if not 0 <= q < num_qubits:
                raise ValueError(f"qubit {q} out of range")
            bx, bz = _LETTER_BITS[letter.upper()]
            x ^= bx << q
            z ^= bz << q
        return cls(num_qubits, x, z)

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        """Dense form, qubit 0 first: ``"XIZY"``."""
        return cls.from_sparse(len(s), [(i, c) for i, c in enumerate(s) if c not in "I_"])

    def __str__(self) -> str:
        return "".join(self[q] for q in range(self.num_qubits))

    def __getitem__(self, q: int) -> str:
        return _BITS_LETTER[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]

    def __mul__(self, other: "PauliString") -> "PauliString":
        return compose(self, other)

    @property
    def support(self) -> list[int]:
        m = self.x_mask | self.z_mask
        return [q for q in range(self.num_qubits) if (m >> q) & 1]

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def commutes(self, other: "PauliString") -> bool:
        n = (self.x_mask & other.z_mask).bit_count() + (self.z_mask & other.x_mask).bit_count()
        return n % 2 == 0


def compose(p1: PauliString, p2: PauliString) -> PauliString:
    if p1.num_qubits != p2.num_qubits:
        raise ValueError("Pauli strings act on different qubit counts")
    return PauliString(p1.num_qubits, p1.x_mask ^ p2.x_mask, p1.z_mask ^ p2.z_mask)


ONE_QUBIT_KINDS = ("I", "X", "Y", "Z", "H", "S", "S_DAG", "SQRT_X", "SQRT_X_DAG")
TWO_QUBIT_KINDS = ("CX", "CY", "CZ", "SWAP")
# Preparation clears any error on the qubit; a measurement leaves the frame alone.
PREP_KINDS = ("R", "RX", "RY")
MEASURE_KINDS = ("M", "MX", "MY")
INVERSES = {"S": "S_DAG", "S_DAG": "S", "SQRT_X": "SQRT_X_DAG", "SQRT_X_DAG": "SQRT_X"}


@dataclass(frozen=True)
class CliffordOp:
    kind: str
    targets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind in TWO_QUBIT_KINDS:
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError(f"{self.kind} needs two distinct targets")
        elif self.kind in ONE_QUBIT_KINDS + PREP_KINDS + MEASURE_KINDS:
            if len(self.targets) != 1:
                raise ValueError(f"{self.kind} needs one target")
        else:
            raise ValueError(f"unknown Clifford kind {self.kind!r}")

    def inverse(self) -> "CliffordOp":
        return CliffordOp(INVERSES.get(self.kind, self.kind), self.targets)


def _bits(p: PauliString, q: int) -> tuple[int, int]:
    return (p.x_mask >> q) & 1, (p.z_mask >> q) & 1


def _set(x: int, z: int, q: int, bx: int, bz: int) -> tuple[int, int]:
    m = 1 << q
    x = (x & ~m) | (bx << q)
    z = (z & ~m) | (bz << q)
    return x, z


def conjugate(p: PauliString, g: CliffordOp) -> PauliString:
    """Support of g p g^dagger."""
    n = p.num_qubits
    for t in g.targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")
    x, z = p.x_mask, p.z_mask
    k = g.kind
    if k in ("I", "X", "Y", "Z") or k in MEASURE_KINDS:
        return p
    if k in PREP_KINDS:
        x, z = _set(x, z, g.targets[0], 0, 0)
        return PauliString(n, x, z)
    if k in ONE_QUBIT_KINDS:
        q = g.targets[0]
        bx, bz = _bits(p, q)
        if k == "H":
            bx, bz = bz, bx
        elif k in ("S", "S_DAG"):
            bz ^= bx
        else:  # SQRT_X family
            bx ^= bz
        x, z = _set(x, z, q, bx, bz)
        return PauliString(n, x, z)
    a, b = g.targets
    ax, az = _bits(p, a)
    bx, bz = _bits(p, b)
    if k == "CX":
        bx ^= ax
        az ^= bz
    elif k == "CZ":
        az ^= bx
        bz ^= ax
    elif k == "CY":
        # CY = S_b CX S_b^dagger, applied right to left
        bz ^= bx
        bx ^= ax
        az ^= bz
        bz ^= bx
    elif k == "SWAP":
        ax, az, bx, bz = bx, bz, ax, az
    x, z = _set(x, z, a, ax, az)
    x, z = _set(x, z, b, bx, bz)
    return PauliString(n, x, z)


def propagate(p: PauliString, ops: Sequence[CliffordOp]) -> PauliString:
    for g in ops:
        p = conjugate(p, g)
    return p


def inverse_circuit(ops: Sequence[CliffordOp]) -> list[CliffordOp]:
    return [g.inverse() for g in reversed(ops)]
