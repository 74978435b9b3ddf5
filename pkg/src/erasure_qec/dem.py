"""Decoding graphs from error mechanisms.

Each mechanism's fault is pushed forward through the stabilizer circuit to
the detectors and observables it flips (done for all sites at once by a
backward pass).  Flip sets are split by detector class, which separates the
X and Z parts of a fault in a CSS-like detector layout.  A part with at most
two detectors is an edge (one detector means an edge to the boundary); a
larger part is greedily decomposed into already known edges, falling back to
the edges of the fault's own sub-faults.

The structure (which mechanisms hit which edges) depends only on the circuit;
probabilities depend on the erasure-check outcomes, so a :class:`GraphModel`
builds the structure once and re-weights it per outcome pattern.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .circuit import ErasureCircuit
from .converter import (
    PROB_FLOOR, ErrorMechanism, Templates, build_templates, posteriors, template_probabilities,
)
from .program import Program
from .sampler import program_for

log = logging.getLogger(__name__)

CLASS_OF_BASIS = {"Z": 0, "X": 1}


@dataclass
class DecodingHypergraph:
    num_detectors: int
    num_observables: int
    probabilities: np.ndarray
    detectors: list[tuple[int, ...]]
    observables: np.ndarray  # bit masks
    parts: list[list[tuple[tuple[int, ...], int]]] | None = None  # per-class split

    def __len__(self) -> int:
        return len(self.probabilities)


@dataclass
class DecodingGraph:
    """Edges (u, v) with v == num_detectors meaning the boundary."""

    num_detectors: int
    num_observables: int
    u: np.ndarray
    v: np.ndarray
    probability: np.ndarray
    observables: np.ndarray
    conflicts: int = 0

    @property
    def boundary(self) -> int:
        return self.num_detectors

    @property
    def weight(self) -> np.ndarray:
        p = np.clip(self.probability, PROB_FLOOR, 0.5 - 1e-12)
        return np.log((1.0 - p) / p)

    def __len__(self) -> int:
        return len(self.u)

    def check_matrix(self):
        """(H, F): detector and observable incidence, one column per edge."""
        n = len(self.u)
        inner = self.v < self.num_detectors
        rows = np.concatenate([self.u, self.v[inner]])
        cols = np.concatenate([np.arange(n), np.nonzero(inner)[0]])
        H = sp.csc_matrix((np.ones(len(rows), np.uint8), (rows, cols)), shape=(self.num_detectors, n))
        orow, ocol = [], []
        for o in range(self.num_observables):
            hit = np.nonzero((self.observables >> np.uint64(o)) & np.uint64(1))[0]
            orow.extend([o] * len(hit))
            ocol.extend(hit.tolist())
        F = sp.csc_matrix((np.ones(len(orow), np.uint8), (orow, ocol)), shape=(self.num_observables, n))
        return H, F

    def to_csv(self, path: str | Path | None = None) -> str:
        """Vertex count line, then one row per edge sorted by endpoints."""
        order = np.lexsort((self.v, self.u))
        w = self.weight
        lines = [f"# vertices={self.num_detectors + 1} boundary={self.boundary}", "u,v,probability,weight,observables"]
        for i in order:
            lines.append(f"{self.u[i]},{self.v[i]},{self.probability[i]:.12e},{w[i]:.12e},{int(self.observables[i])}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def merge_probabilities(ps) -> float:
    """Probability that an odd number of independent flips occur."""
    acc = 1.0
    for p in ps:
        acc *= 1.0 - 2.0 * p
    return 0.5 * (1.0 - acc)


# ---------------------------------------------------------------------------
# flip sets


def record_masks(prog: Program) -> np.ndarray:
    """Packed (n_rec, W) masks: detectors (bits 0..n_det-1) and observables
    (bits n_det..) containing each record."""
    n_det, n_obs = prog.n_det, prog.n_obs
    W = max(1, (n_det + n_obs + 63) // 64)
    m = np.zeros((prog.n_rec, W), dtype=np.uint64)

    def put(groups_ptr, groups_rec, offset):
        for g in range(len(groups_ptr) - 1):
            bit = offset + g
            for r in groups_rec[groups_ptr[g]:groups_ptr[g + 1]]:
                m[r, bit // 64] ^= np.uint64(1) << np.uint64(bit % 64)

    put(prog.det_ptr, prog.det_rec, 0)
    put(prog.obs_ptr, prog.obs_rec, n_det)
    return m


def class_masks(c: ErasureCircuit, W: int) -> np.ndarray:
    m = np.zeros((2, W), dtype=np.uint64)
    for i, d in enumerate(c.detectors):
        cl = CLASS_OF_BASIS.get(d.basis, 0)
        m[cl, i // 64] |= np.uint64(1) << np.uint64(i % 64)
    return m


def site_sensitivities(prog: Program, site_op, site_q, recmask=None) -> np.ndarray:
    if recmask is None:
        recmask = record_masks(prog)
    return K.sensitivity_kernel(prog.code, prog.a, prog.b, prog.idx, prog.num_qubits, recmask,
                                np.asarray(site_op, np.int64), np.asarray(site_q, np.int64))


def unpack(mask_row: np.ndarray, n_det: int) -> tuple[tuple[int, ...], int]:
    bits = np.unpackbits(mask_row.view(np.uint8), bitorder="little")
    on = np.nonzero(bits)[0]
    dets = tuple(int(i) for i in on if i < n_det)
    obs = 0
    for i in on:
        if i >= n_det:
            obs |= 1 << int(i - n_det)
    return dets, obs


def _sub_faults(c: ErasureCircuit, fault) -> list[np.ndarray]:
    """Packed flip set of every single-Pauli-part piece of ``fault``."""
    prog = program_for(c)
    rm = record_masks(prog)
    sites = [f for f in fault if f[0] != "flip"]
    out = []
    if sites:
        ops = [f[0] for f in sites]
        if min(ops) < 0 or max(ops) >= prog.n_ops or any(not 0 <= f[1] < prog.num_qubits for f in sites):
            raise ValueError("fault location outside the circuit")
        snaps = site_sensitivities(prog, ops, [f[1] for f in sites], rm)
        for k, (_, _, pa) in enumerate(sites):
            if pa in ("X", "Y"):
                out.append(snaps[k, 0])
            if pa in ("Z", "Y"):
                out.append(snaps[k, 1])
    for f in fault:
        if f[0] == "flip":
            if not 0 <= f[1] < prog.n_rec:
                raise ValueError("flipped record outside the circuit")
            out.append(rm[f[1]])
    return out


def fault_flips(c: ErasureCircuit, fault) -> tuple[tuple[int, ...], int]:
    """Detectors and observable mask flipped by one fault.

    ``fault`` is a sequence of (op index, qubit, 'X'|'Y'|'Z') and
    ('flip', record) entries; op indices refer to the compiled program.
    """
    prog = program_for(c)
    total = np.zeros(record_masks(prog).shape[1], dtype=np.uint64)
    for sub in _sub_faults(c, fault):
        total ^= sub
    return unpack(total, prog.n_det)


def split_by_class(c: ErasureCircuit, subs: list[np.ndarray]) -> list[tuple[tuple[int, ...], int]]:
    """Class parts of a fault given its sub-fault flip sets.

    Detectors are XORed within their class; a sub-fault's observables go to
    the class of its detectors (class 0 if it touches both).
    """
    prog = program_for(c)
    n_det = prog.n_det
    if not subs:
        return []
    cm = class_masks(c, len(subs[0]))
    acc = [np.zeros_like(subs[0]), np.zeros_like(subs[0])]
    obs = [0, 0]
    for sub in subs:
        d0 = (sub & cm[0]).any()
        d1 = (sub & cm[1]).any()
        o = unpack(sub & ~(cm[0] | cm[1]), n_det)[1]
        if o and not (d0 or d1):
            raise ValueError("fault flips an observable without flipping any detector")
        acc[0] ^= sub & cm[0]
        acc[1] ^= sub & cm[1]
        obs[1 if (d1 and not d0) else 0] ^= o
    parts = []
    for k in range(2):
        d = unpack(acc[k], n_det)[0]
        if d or obs[k]:
            parts.append((d, obs[k]))
    return parts


def build_hypergraph(c: ErasureCircuit, mechanisms: list[ErrorMechanism]) -> DecodingHypergraph:
    """Flip set of every mechanism (probability-0 mechanisms dropped).

    The mechanisms get their ``detectors``/``observables`` filled in.
    """
    prog = program_for(c)
    keep = [m for m in mechanisms if m.probability > 0]
    dets, obs, parts = [], [], []
    for m in keep:
        subs = _sub_faults(c, m.fault)
        total = np.zeros(record_masks(prog).shape[1], dtype=np.uint64)
        for sub in subs:
            total ^= sub
        d, o = unpack(total, prog.n_det)
        m.detectors, m.observables = d, o
        dets.append(d)
        obs.append(o)
        parts.append(split_by_class(c, subs))
    return DecodingHypergraph(prog.n_det, prog.n_obs, np.array([m.probability for m in keep]),
                              dets, np.array(obs, dtype=np.uint64), parts)


# ---------------------------------------------------------------------------
# decomposition


class EdgeRegistry:
    def __init__(self, n_det: int):
        self.n_det = n_det
        self.index: dict[tuple[int, int, int], int] = {}
        self.by_pair: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def key(self, dets) -> tuple[int, int]:
        if len(dets) == 1:
            return (dets[0], self.n_det)
        return (min(dets), max(dets))

    def get(self, dets, obs: int, create: bool = True) -> int:
        uv = self.key(dets)
        k = uv + (obs,)
        e = self.index.get(k)
        if e is None and create:
            e = self.index[k] = len(self.index)
            self.by_pair.setdefault(uv, []).append((obs, e))
        return e

    def arrays(self):
        n = len(self.index)
        u = np.zeros(n, np.int64)
        v = np.zeros(n, np.int64)
        o = np.zeros(n, np.uint64)
        for (a, b, ob), e in self.index.items():
            u[e], v[e], o[e] = a, b, ob
        return u, v, o


def greedy_decompose(dets: tuple[int, ...], obs: int, reg: EdgeRegistry, max_nodes: int = 20000):
    """Known edges whose symmetric difference is ``dets`` with matching
    observables, or None.  Pairs are tried before boundary edges, lowest
    detector index first, so the result is deterministic."""
    B = reg.n_det
    budget = [max_nodes]

    def rec(rest: tuple[int, ...], want: int):
        if not rest:
            return [] if want == 0 else None
        budget[0] -= 1
        if budget[0] < 0:
            return None
        u = rest[0]
        for j in range(1, len(rest)):
            for ob, e in reg.by_pair.get((u, rest[j]), ()):
                sub = rec(rest[1:j] + rest[j + 1:], want ^ ob)
                if sub is not None:
                    return [e] + sub
        for ob, e in reg.by_pair.get((u, B), ()):
            sub = rec(rest[1:], want ^ ob)
            if sub is not None:
                return [e] + sub
        return None

    return rec(tuple(sorted(dets)), obs)


@dataclass
class GraphStructure:
    """Which template contributes to which edge."""

    n_det: int
    n_obs: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_obs: np.ndarray
    inc_tpl: np.ndarray
    inc_edge: np.ndarray
    pair_id: np.ndarray  # edges sharing endpoints share a pair id
    n_pairs: int
    decomposed: int = 0
    fallbacks: int = 0


def build_structure(c: ErasureCircuit, tpl: Templates) -> GraphStructure:
    prog = program_for(c)
    rm = record_masks(prog)
    W = rm.shape[1]
    cm = class_masks(c, W)
    snaps = site_sensitivities(prog, tpl.site_op, tpl.site_q, rm)
    n_det = prog.n_det
    obs_word0 = n_det // 64
    dummy_i = np.zeros(1, np.int64)
    dummy_u = np.zeros(1, np.uint64)
    n_parts, n_ent, flags = K.template_parts_kernel(
        tpl.comp_ptr, tpl.comp_site, tpl.comp_pauli, snaps, rm, cm, n_det, obs_word0, False,
        dummy_i, dummy_i, dummy_i, dummy_i, dummy_u)
    part_ptr = np.zeros(n_parts + 1, np.int64)
    part_dets = np.zeros(max(n_ent, 1), np.int64)
    part_tpl = np.zeros(n_parts, np.int64)
    part_cls = np.zeros(n_parts, np.int64)
    part_obs = np.zeros(n_parts, np.uint64)
    K.template_parts_kernel(tpl.comp_ptr, tpl.comp_site, tpl.comp_pauli, snaps, rm, cm, n_det, obs_word0, True,
                            part_ptr, part_dets, part_tpl, part_cls, part_obs)
    if (flags == 1).any():
        t = int(np.nonzero(flags == 1)[0][0])
        raise ValueError(f"mechanism {t} ({tpl.components(t)}) flips an observable without flipping any detector")
    if (flags == 2).any():
        log.warning("%d mechanisms flip observables through sub-faults spanning both detector classes",
                    int((flags == 2).sum()))

    sizes = np.diff(part_ptr)
    reg = EdgeRegistry(n_det)
    inc_t: list[int] = []
    inc_e: list[int] = []
    # pass 1: parts that already are edges
    small = np.nonzero((sizes >= 1) & (sizes <= 2))[0]
    for i in small:
        d = part_dets[part_ptr[i]:part_ptr[i + 1]]
        e = reg.get(tuple(d.tolist()), int(part_obs[i]))
        inc_t.append(int(part_tpl[i]))
        inc_e.append(e)
    empty = np.nonzero(sizes == 0)[0]
    for i in empty:
        if part_obs[i]:
            t = int(part_tpl[i])
            raise ValueError(f"mechanism {t} ({tpl.components(t)}) is an undetectable logical error")
    # pass 2: hyperedges
    decomposed = fallbacks = 0
    big = np.nonzero(sizes > 2)[0]
    for i in big:
        d = tuple(part_dets[part_ptr[i]:part_ptr[i + 1]].tolist())
        t = int(part_tpl[i])
        edges = greedy_decompose(d, int(part_obs[i]), reg)
        if edges is None:
            edges = _component_edges(tpl, t, int(part_cls[i]), snaps, rm, cm, n_det, reg)
            fallbacks += 1
        decomposed += 1
        for e in edges:
            inc_t.append(t)
            inc_e.append(e)
    u, v, o = reg.arrays()
    pairs = u * (n_det + 1) + v
    _, pair_id = np.unique(pairs, return_inverse=True)
    return GraphStructure(n_det, prog.n_obs, u, v, o, np.array(inc_t, np.int64), np.array(inc_e, np.int64),
                          pair_id.astype(np.int64), int(pair_id.max()) + 1 if len(pair_id) else 0,
                          decomposed, fallbacks)


def _component_edges(tpl, t, cls, snaps, rm, cm, n_det, reg):
    """Edges of the template's own sub-faults in class ``cls``; identical
    sub-fault edges cancel in pairs."""
    count: dict[int, int] = {}
    for s, pa in tpl.components(t):
        subs = [rm[-1 - s]] if s < 0 else [snaps[s, k] for k in range(2) if (pa >> k) & 1]
        for sub in subs:
            dets, obs = unpack(sub, n_det)
            dets = tuple(x for x in dets if (int(cm[cls, x // 64]) >> (x % 64)) & 1)
            if not dets:
                continue
            if len(dets) > 2:
                raise ValueError(f"mechanism {t} ({tpl.components(t)}) cannot be decomposed into edges: "
                                 f"sub-fault flips detectors {dets}")
            # observables belong to this class only when the sub-fault lives entirely in it
            own = unpack(sub & cm[cls], n_det)[0]
            full = unpack(sub & (cm[0] | cm[1]), n_det)[0]
            e = reg.get(dets, obs if own == full else 0)
            count[e] = count.get(e, 0) ^ 1
    return sorted(e for e, k in count.items() if k)


# ---------------------------------------------------------------------------
# per-outcome graphs


class GraphModel:
    """Decoding graphs for one circuit, re-weighted per check-outcome pattern.

    ``mode`` selects the erasure conversion ('approximate' or 'exact').
    Graphs are cached by outcome pattern (bounded LRU).
    """

    def __init__(self, c: ErasureCircuit, mode: str = "approximate", max_r: int = 2, cache_size: int = 256):
        self.circuit = c
        self.prog = program_for(c)
        self.mode = mode
        self.templates = build_templates(self.prog, mode, max_r=max_r)
        self.structure = build_structure(c, self.templates)
        self.observe = bool(self.prog.meta.get("erasure_info", True))
        self._cache: OrderedDict[bytes, object] = OrderedDict()
        self.cache_size = cache_size
        self.conflicts = 0

    def probabilities(self, ec_obs: np.ndarray | None) -> np.ndarray:
        """Template probabilities for one outcome row."""
        if self.prog.n_hooks and self.templates.hook.size and (self.templates.rule != 0).any():
            row = np.zeros(self.prog.n_ec, np.uint8) if ec_obs is None else ec_obs
            post = posteriors(self.prog, row[None, :], self.observe)[0]
        else:
            post = np.zeros(self.prog.n_hooks)
        return template_probabilities(self.templates, post)

    def graph(self, ec_obs: np.ndarray | None = None) -> DecodingGraph:
        st = self.structure
        pt = np.clip(self.probabilities(ec_obs), 0.0, 0.5)
        logs = np.log1p(-2.0 * np.minimum(pt, 0.5 - 1e-16))
        acc = np.bincount(st.inc_edge, weights=logs[st.inc_tpl], minlength=len(st.edge_u))
        pe = -0.5 * np.expm1(acc)
        keep = pe > 0.0
        # parallel edges with different observables: keep the likelier one
        conflicts = 0
        if st.n_pairs < len(st.edge_u):
            idx = np.nonzero(keep)[0]
            order = idx[np.lexsort((-pe[idx], st.pair_id[idx]))]
            first = np.ones(len(order), bool)
            first[1:] = st.pair_id[order[1:]] != st.pair_id[order[:-1]]
            conflicts = int((~first).sum())
            keep = np.zeros_like(keep)
            keep[order[first]] = True
            if conflicts:
                log.debug("%d parallel edges with conflicting observables dropped", conflicts)
        self.conflicts += conflicts
        e = np.nonzero(keep)[0]
        return DecodingGraph(st.n_det, st.n_obs, st.edge_u[e], st.edge_v[e], pe[e], st.edge_obs[e], conflicts)

    def matching(self, ec_obs: np.ndarray | None = None):
        """pymatching decoder for an outcome pattern (cached)."""
        key = b"" if ec_obs is None or not self.observe else np.packbits(ec_obs).tobytes()
        m = self._cache.get(key)
        if m is not None:
            self._cache.move_to_end(key)
            return m
        m = to_pymatching(self.graph(ec_obs))
        self._cache[key] = m
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return m


def to_pymatching(g: DecodingGraph):
    import pymatching

    H, F = g.check_matrix()
    return pymatching.Matching.from_check_matrix(H, weights=g.weight, faults_matrix=F,
                                                 use_virtual_boundary_node=True)


def decompose(h: DecodingHypergraph) -> DecodingGraph:
    """Edges from a hypergraph: split each hyperedge into its class parts
    (when known), keep parts of size <= 2 as edges, decompose larger ones
    greedily into known edges; merge parallel edges."""
    reg = EdgeRegistry(h.num_detectors)
    pieces: list[tuple[int, tuple[int, ...], int]] = []
    for i in range(len(h)):
        parts = h.parts[i] if h.parts is not None else [(h.detectors[i], int(h.observables[i]))]
        for d, o in parts:
            if not d:
                if o:
                    raise ValueError(f"hyperedge {i} flips observables without detectors")
                continue
            pieces.append((i, tuple(d), int(o)))
    contrib: list[tuple[int, int]] = []
    for i, d, o in pieces:
        if len(d) <= 2:
            contrib.append((i, reg.get(d, o)))
    for i, d, o in pieces:
        if len(d) > 2:
            edges = greedy_decompose(d, o, reg)
            if edges is None:
                raise ValueError(f"hyperedge {i} with detectors {d} cannot be decomposed into known edges")
            contrib.extend((i, e) for e in edges)
    u, v, ob = reg.arrays()
    acc = np.zeros(len(u))
    for i, e in contrib:
        acc[e] += np.log1p(-2.0 * min(h.probabilities[i], 0.5 - 1e-16))
    p = -0.5 * np.expm1(acc)
    # parallel edges with different observables: keep the likelier one
    best: dict[tuple[int, int], int] = {}
    conflicts = 0
    for e in range(len(u)):
        k = (int(u[e]), int(v[e]))
        if k in best:
            conflicts += 1
            if p[e] > p[best[k]]:
                best[k] = e
        else:
            best[k] = e
    if conflicts:
        log.warning("%d parallel edges with conflicting observables dropped", conflicts)
    e = np.array(sorted(best.values()), dtype=np.int64)
    if len(e) == 0:
        return DecodingGraph(h.num_detectors, h.num_observables, np.zeros(0, np.int64), np.zeros(0, np.int64),
                             np.zeros(0), np.zeros(0, np.uint64), conflicts)
    return DecodingGraph(h.num_detectors, h.num_observables, u[e], v[e], p[e], ob[e], conflicts)
