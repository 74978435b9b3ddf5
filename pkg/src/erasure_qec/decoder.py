"""Minimum-weight perfect matching on a decoding graph.

``decode`` is the exact reference: shortest paths by Dijkstra, then an exact
minimum over pairings of the fired detectors (each may instead go to the
boundary).  Up to 16 fired detectors the minimum is a bitmask dynamic
program with lexicographic tie-breaking; beyond that a blossom matching on
the complete graph with per-detector boundary copies.  Batch decoding uses
pymatching on the same graph.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .dem import DecodingGraph, to_pymatching

DP_LIMIT = 16
TIE_TOL = 1e-9


@dataclass
class Matching:
    pairs: list[tuple[int, int]]  # (u, v) with v == -1 for the boundary
    weight: float
    observables: int


class MatchingDecoder:
    """Holds a graph plus its shortest-path machinery (immutable)."""

    def __init__(self, g: DecodingGraph):
        self.graph = g
        n = g.num_detectors + 1
        keep = g.probability > 0
        u, v, w = g.u[keep], g.v[keep], g.weight[keep]
        self._obs = {}
        for a, b, o in zip(u.tolist(), v.tolist(), g.observables[keep].tolist()):
            self._obs[(min(a, b), max(a, b))] = int(o)
        # scipy treats explicit zeros as missing edges; keep them positive
        w = np.maximum(w, 1e-300)
        self.adj = sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                                 shape=(n, n))
        self.boundary = g.num_detectors
        self._pm = None

    def _paths(self, fired: np.ndarray):
        src = np.concatenate([fired, [self.boundary]])
        dist, pred = dijkstra(self.adj, directed=False, indices=src, return_predecessors=True)
        return dist, pred

    def _path_obs(self, pred_row: np.ndarray, target: int) -> int:
        o = 0
        t = target
        while True:
            p = pred_row[t]
            if p < 0:
                break
            o ^= self._obs[(min(p, t), max(p, t))]
            t = p
        return o

    def decode(self, fired) -> Matching:
        fired = np.unique(np.asarray(fired, dtype=np.int64))
        if len(fired) == 0:
            return Matching([], 0.0, 0)
        if fired.min() < 0 or fired.max() >= self.boundary:
            raise ValueError("fired detector outside the graph")
        dist, pred = self._paths(fired)
        n = len(fired)
        pair = dist[:n][:, fired]
        bnd = dist[:n, self.boundary]
        if n <= DP_LIMIT:
            choice = _dp_match(pair, bnd)
        else:
            choice = _blossom_match(pair, bnd)
        if choice is None:
            raise ValueError("some fired detector cannot be matched (disconnected from the boundary and partners)")
        pairs, weight, obs = [], 0.0, 0
        for i, j in choice:
            if j < 0:
                weight += bnd[i]
                obs ^= self._path_obs(pred[n], int(fired[i]))
                pairs.append((int(fired[i]), -1))
            else:
                weight += pair[i, j]
                obs ^= self._path_obs(pred[i], int(fired[j]))
                pairs.append((int(fired[i]), int(fired[j])))
        return Matching(pairs, float(weight), obs)

    def pymatching(self):
        if self._pm is None:
            self._pm = to_pymatching(self.graph)
        return self._pm


def _dp_match(pair: np.ndarray, bnd: np.ndarray):
    """Exact minimum over pairings; the lowest-index fired detector is
    matched first and partners are tried in index order (boundary last)."""
    n = len(bnd)
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def best(mask: int) -> float:
        if mask == 0:
            return 0.0
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        out = bnd[i] + best(rest)
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            c = pair[i, j] + best(rest & ~(1 << j))
            if c < out:
                out = c
        return out

    total = best(full)
    if not np.isfinite(total):
        return None
    choice = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        target = best(mask)
        picked = None
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            if abs(pair[i, j] + best(rest & ~(1 << j)) - target) <= TIE_TOL * max(1.0, abs(target)):
                picked = j
                break
        if picked is None:
            choice.append((i, -1))
            mask = rest
        else:
            choice.append((i, picked))
            mask = rest & ~(1 << picked)
    return choice


def _blossom_match(pair: np.ndarray, bnd: np.ndarray):
    import networkx as nx

    n = len(bnd)
    G = nx.Graph()
    big = 0.0
    finite = np.concatenate([pair[np.isfinite(pair)], bnd[np.isfinite(bnd)]])
    if len(finite):
        big = float(finite.max()) * (n + 1) + 1.0
    for i in range(n):
        if np.isfinite(bnd[i]):
            G.add_edge(i, n + i, weight=big - bnd[i])
        for j in range(i + 1, n):
            if np.isfinite(pair[i, j]):
                G.add_edge(i, j, weight=big - pair[i, j])
                G.add_edge(n + i, n + j, weight=big)
    m = nx.max_weight_matching(G, maxcardinality=True)
    covered = {a for e in m for a in e}
    if any(i not in covered for i in range(n)):
        return None
    choice = []
    for a, b in m:
        a, b = min(a, b), max(a, b)
        if b < n:
            choice.append((a, b))
        elif a < n:
            choice.append((a, -1))
    return sorted(choice)


def decode(g: DecodingGraph, fired) -> Matching:
    return MatchingDecoder(g).decode(fired)


def brute_force_matching(g: DecodingGraph, fired) -> tuple[float, int]:
    """Minimum total weight over every pairing (boundary allowed for any
    detector), with shortest paths from Floyd-Warshall.  Returns (weight,
    number of pairings enumerated)."""
    from scipy.sparse.csgraph import floyd_warshall

    dec = MatchingDecoder(g)
    dist = floyd_warshall(dec.adj, directed=False)
    fired = sorted(set(int(f) for f in fired))
    B = g.num_detectors
    count = 0
    best = float("inf")

    def rec(rest, acc):
        nonlocal count, best
        if not rest:
            count += 1
            best = min(best, acc)
            return
        i, tail = rest[0], rest[1:]
        rec(tail, acc + dist[i, B])
        for k, j in enumerate(tail):
            rec(tail[:k] + tail[k + 1:], acc + dist[i, j])

    rec(fired, 0.0)
    return best, count


@dataclass
class BatchResult:
    predictions: np.ndarray
    errors: np.ndarray
    num_errors: int


def decode_batch(g: DecodingGraph | MatchingDecoder, detectors: np.ndarray, observables: np.ndarray,
                 method: str = "pymatching") -> BatchResult:
    dec = g if isinstance(g, MatchingDecoder) else MatchingDecoder(g)
    det = np.asarray(detectors, dtype=np.uint8)
    obs = np.asarray(observables, dtype=np.uint8)
    if det.ndim != 2 or det.shape[1] != dec.graph.num_detectors or obs.shape[0] != det.shape[0]:
        raise ValueError("shot arrays do not match the decoding graph")
    n_obs = dec.graph.num_observables
    if method == "pymatching":
        pred = dec.pymatching().decode_batch(det).astype(np.uint8)
    elif method == "exact":
        pred = np.zeros((len(det), n_obs), np.uint8)
        for s in range(len(det)):
            o = dec.decode(np.nonzero(det[s])[0]).observables
            for k in range(n_obs):
                pred[s, k] = (o >> k) & 1
    else:
        raise ValueError(f"unknown decoding method {method!r}")
    err = (pred != obs).any(axis=1)
    return BatchResult(pred, err, int(err.sum()))
