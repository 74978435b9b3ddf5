"""Two-stage Monte Carlo sampling of erasure circuits.

Stage one samples which erasure locations fire and what every erasure check
reports.  Stage two fixes that configuration and samples Pauli-frame
executions, 64 shots per machine word.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .circuit import ErasureCircuit
from .program import OP_CX, OP_CZ, OP_ERASE, OP_M, OP_MX, OP_R, OP_RESET, OP_RX, Program, compile_circuit

_PROGRAM_CACHE: dict[int, tuple[ErasureCircuit, Program]] = {}


def program_for(c: ErasureCircuit) -> Program:
    """Compiled form of ``c``, cached on object identity."""
    hit = _PROGRAM_CACHE.get(id(c))
    if hit is not None and hit[0] is c:
        return hit[1]
    prog = compile_circuit(c)
    if len(_PROGRAM_CACHE) > 64:
        _PROGRAM_CACHE.clear()
    _PROGRAM_CACHE[id(c)] = (c, prog)
    return prog


def is_biased(prog: Program) -> bool:
    return prog.meta.get("spread_mode", "depolarizing") == "biased-Z"


@dataclass
class ErasureBatch:
    """Stage-one output for a run of consecutive erasure samples."""

    sample_ids: np.ndarray
    fired: np.ndarray     # (S, n_locations) uint8
    ec_true: np.ndarray   # (S, n_checks) uint8
    ec_obs: np.ndarray    # (S, n_checks) uint8
    hooks: np.ndarray     # (S, n_hooks) uint8

    def __len__(self) -> int:
        return len(self.sample_ids)


def sample_erasure_batch(prog: Program, seed: int, start: int, count: int) -> ErasureBatch:
    ids = np.arange(start, start + count, dtype=np.int64)
    fired, ec_true, ec_obs, hooks = K.sample_erasures_kernel(
        prog.code, prog.a, prog.b, prog.idx, prog.hook, prog.rkind, prog.rpol, prog.prev_ec,
        prog.f0, prog.f1, prog.num_qubits, prog.n_eloc, prog.n_ec, prog.n_hooks,
        np.uint64(seed), ids,
    )
    return ErasureBatch(ids, fired, ec_true, ec_obs, hooks)


@dataclass
class ErasureSample:
    fired: np.ndarray
    ec_outcomes: np.ndarray
    true_ec_state: np.ndarray
    erased_intervals: list[list[tuple[int, int]]]
    hooks: np.ndarray = field(repr=False)
    seed: int = 0
    index: int = 0


def sample_erasures(c: ErasureCircuit, rng_seed: int, index: int = 0) -> ErasureSample:
    prog = program_for(c)
    eb = sample_erasure_batch(prog, rng_seed, index, 1)
    fired, obs, hooks = eb.fired[0], eb.ec_obs[0], eb.hooks[0]
    intervals = _intervals_with_checks(prog, fired, obs, hooks)
    return ErasureSample(fired.astype(bool), obs, eb.ec_true[0], intervals, hooks, rng_seed, index)


def _intervals_with_checks(prog, fired, ec_obs, hooks):
    """Replay the erasure state as (start tick, end tick) per qubit.

    The end tick is that of the reset or preparation returning the qubit, or
    the circuit length when it never returns.
    """
    out: list[list[tuple[int, int]]] = [[] for _ in range(prog.num_qubits)]
    start: dict[int, int] = {}
    for i in range(prog.n_ops):
        c = prog.code[i]
        q = int(prog.a[i])
        t = int(prog.tick[i])
        if c == OP_ERASE and fired[prog.idx[i]] and q not in start:
            start[q] = t
        elif c == OP_RESET:
            applied = prog.rpol[i] == 0 or (prog.prev_ec[i] >= 0 and ec_obs[prog.prev_ec[i]])
            if not applied:
                continue
            if q in start:
                out[q].append((start.pop(q), t))
            elif prog.rkind[i] == 2 and not hooks[prog.hook[i]]:
                start[q] = t
        elif c in (OP_R, OP_RX) and q in start:
            out[q].append((start.pop(q), t))
    end = int(prog.tick.max()) + 1 if prog.n_ops else 0
    for q, s in sorted(start.items()):
        out[q].append((s, end))
    return out


@dataclass
class InstantiatedCircuit:
    """An erasure circuit with one erasure configuration fixed.

    What remains is a stabilizer circuit with Pauli channels: the ordinary
    ``p``/``q`` channels plus, for each recorded hook, a uniformly random
    Pauli (or Z coin) on a gate partner, a random outcome for an erased
    measurement, or a random frame at a depolarizing reset.
    """

    program: Program
    hooks: np.ndarray
    biased: bool

    def erasure_effects(self) -> list[tuple[str, int, int]]:
        """(effect, op index, qubit) for every active hook."""
        prog = self.program
        out = []
        for h in np.nonzero(self.hooks)[0]:
            op = int(prog.hook_op[h])
            q = int(prog.hook_qubit[h])
            code = prog.code[op]
            if code in (OP_CX, OP_CZ):
                a, b = int(prog.a[op]), int(prog.b[op])
                partner = b if q == a else a
                other = self.hooks[prog.hook[op] + (1 if q == a else 0)]
                if not other:
                    out.append(("Z-coin" if self.biased else "depolarize", op, partner))
            elif code in (OP_M, OP_MX):
                out.append(("random-outcome", op, q))
            else:
                out.append(("reset-depolarize", op, q))
        return out


def instantiate_pauli_frame_circuit(c: ErasureCircuit, es: ErasureSample) -> InstantiatedCircuit:
    prog = program_for(c)
    return InstantiatedCircuit(prog, np.asarray(es.hooks, dtype=np.uint8), is_biased(prog))


def run_frames(prog: Program, hooks: np.ndarray, seed: int, sample_ids, n_shots: int,
               gauge: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Detector and observable flips, shape (samples, shots, n)."""
    hooks = np.ascontiguousarray(hooks, dtype=np.uint8)
    if hooks.ndim == 1:
        hooks = hooks[None, :]
    ids = np.asarray(sample_ids, dtype=np.int64)
    if hooks.shape[0] != len(ids):
        hooks = np.zeros((len(ids), 0), dtype=np.uint8)
    return K.frame_kernel(
        prog.code, prog.a, prog.b, prog.idx, prog.hook, prog.cls, prog.class_prob,
        prog.det_ptr, prog.det_rec, prog.obs_ptr, prog.obs_rec, prog.num_qubits, prog.n_rec,
        hooks, np.uint64(seed), ids, int(n_shots), is_biased(prog), gauge,
    )


@dataclass
class ShotResult:
    detectors: np.ndarray
    observables: np.ndarray


@dataclass
class ShotBatch:
    """Shots as arrays: ``detectors`` (shots, n_det), ``observables`` (shots, n_obs)."""

    detectors: np.ndarray
    observables: np.ndarray

    def __len__(self) -> int:
        return len(self.detectors)

    def __getitem__(self, i: int) -> ShotResult:
        return ShotResult(self.detectors[i], self.observables[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def sample_shots(c: ErasureCircuit, es: ErasureSample, n_shots: int, rng_seed: int) -> ShotBatch:
    prog = program_for(c)
    det, obs = run_frames(prog, es.hooks, rng_seed, [es.index], n_shots)
    return ShotBatch(det[0], obs[0])


def gauge_detector_flips(prog: Program, shots: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    det, obs = run_frames(prog, np.zeros((1, 0), np.uint8), seed, [0], shots, gauge=True)
    return det[0], obs[0]


def sample_independent(c: ErasureCircuit, n_shots: int, seed: int) -> ShotBatch:
    """Every shot with its own erasure configuration (single-stage sampling)."""
    prog = program_for(c)
    eb = sample_erasure_batch(prog, seed, 0, n_shots)
    det, obs = run_frames(prog, eb.hooks, seed, eb.sample_ids, 1)
    return ShotBatch(det[:, 0, :], obs[:, 0, :])


# ---------------------------------------------------------------------------
# shot dumps
#
# Binary layout, all little-endian:
#   magic  b"EQSH"           4 bytes
#   version u32 (=1)
#   n_shots u64, n_det u32, n_obs u32
#   detector rows: n_shots rows of ceil(n_det/8) bytes, bit j of byte k is
#                  detector 8k+j
#   observable rows: same layout with n_obs bits


MAGIC = b"EQSH"


def dump_shots(batch: ShotBatch, path: str | Path, fmt: str = "b8") -> None:
    det = np.asarray(batch.detectors, dtype=np.uint8)
    obs = np.asarray(batch.observables, dtype=np.uint8)
    path = Path(path)
    if fmt == "csv":
        with path.open("w") as fh:
            head = [f"D{i}" for i in range(det.shape[1])] + [f"L{i}" for i in range(obs.shape[1])]
            fh.write(",".join(head) + "\n")
            for row in np.hstack([det, obs]):
                fh.write(",".join(str(int(v)) for v in row) + "\n")
        return
    if fmt != "b8":
        raise ValueError(f"unknown shot format {fmt!r}")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQII", 1, det.shape[0], det.shape[1], obs.shape[1]))
    buf.write(np.packbits(det, axis=1, bitorder="little").tobytes())
    buf.write(np.packbits(obs, axis=1, bitorder="little").tobytes())
    path.write_bytes(buf.getvalue())


def load_shots(path: str | Path) -> ShotBatch:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a shot dump")
    version, n, nd, no = struct.unpack_from("<IQII", raw, 4)
    if version != 1:
        raise ValueError(f"unsupported shot dump version {version}")
    off = 4 + struct.calcsize("<IQII")
    bd, bo = (nd + 7) // 8, (no + 7) // 8
    det = np.frombuffer(raw, np.uint8, n * bd, off).reshape(n, bd)
    obs = np.frombuffer(raw, np.uint8, n * bo, off + n * bd).reshape(n, bo)
    det = np.unpackbits(det, axis=1, count=nd, bitorder="little")
    obs = np.unpackbits(obs, axis=1, count=no, bitorder="little")
    return ShotBatch(det, obs)
