"""Shared helpers for the test-suite."""
from collections import deque

import numpy as np

from erasure_qec.circuit import NoiseParams, annotate_noise
from erasure_qec.surface_code import ScheduleSpec, build_memory_circuit


def noisy(d=3, l=1, rounds=None, basis="Z", variant="standard", spread_mode="depolarizing", **noise):
    sched = ScheduleSpec(l=l, variant=variant, spread_mode=spread_mode,
                         **{k: noise.pop(k) for k in ("reset_kind", "reset_policy", "erasure_info") if k in noise})
    ideal = build_memory_circuit(d, sched, rounds=rounds if rounds is not None else d, basis=basis)
    return annotate_noise(ideal, NoiseParams(**noise))


def graph_distance(g) -> int:
    """Fewest edges in a boundary-to-boundary or closed path flipping the
    first observable (breadth-first search over (vertex, parity))."""
    adj = [[] for _ in range(g.num_detectors + 1)]
    for u, v, o in zip(g.u.tolist(), g.v.tolist(), g.observables.tolist()):
        adj[u].append((v, o & 1))
        adj[v].append((u, o & 1))
    best = None
    starts = [g.num_detectors] if adj[g.num_detectors] else range(g.num_detectors)
    for s in starts:
        dist = {(s, 0): 0}
        dq = deque([(s, 0)])
        while dq:
            node = dq.popleft()
            for w, o in adj[node[0]]:
                nxt = (w, node[1] ^ o)
                if nxt not in dist:
                    dist[nxt] = dist[node] + 1
                    dq.append(nxt)
        if (s, 1) in dist and (best is None or dist[(s, 1)] < best):
            best = dist[(s, 1)]
    return best


def bits(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> k) & 1 for k in range(n)], dtype=np.uint8)
