"""Aaronson-Gottesman stabilizer tableau, used for noiseless reference runs."""
from __future__ import annotations

import numpy as np


class Tableau:
    def __init__(self, n: int, rng: np.random.Generator | None = None):
        self.n = n
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        self.r = np.zeros(2 * n + 1, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True  # destabilizers
        self.z[n + idx, idx] = True  # stabilizers
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def h(self, a):
        x, z = self.x, self.z
        self.r ^= x[:, a] & z[:, a]
        x[:, a], z[:, a] = z[:, a].copy(), x[:, a].copy()

    def s(self, a):
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def cx(self, a, b):
        x, z = self.x, self.z
        self.r ^= x[:, a] & z[:, b] & ~(x[:, b] ^ z[:, a])
        x[:, b] ^= x[:, a]
        z[:, a] ^= z[:, b]

    def cz(self, a, b):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def _rowsum(self, rows: np.ndarray, i: int):
        """Left-multiply generator ``i`` into every row in ``rows``."""
        x1, z1 = self.x[i].astype(np.int64), self.z[i].astype(np.int64)
        x2, z2 = self.x[rows].astype(np.int64), self.z[rows].astype(np.int64)
        g = np.where(
            (x1 == 1) & (z1 == 1), z2 - x2,
            np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                     np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)),
        )
        total = 2 * self.r[rows].astype(np.int64) + 2 * int(self.r[i]) + g.sum(axis=1)
        self.r[rows] = (total % 4) == 2
        self.x[rows] ^= self.x[i]
        self.z[rows] ^= self.z[i]

    def measure(self, a: int) -> int:
        n = self.n
        hits = np.nonzero(self.x[n:2 * n, a])[0]
        if len(hits):
            p = n + hits[0]
            rows = np.nonzero(self.x[:2 * n, a])[0]
            rows = rows[rows != p]
            if len(rows):
                self._rowsum(rows, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            self.r[p] = bool(self.rng.integers(2))
            return int(self.r[p])
        s = 2 * n
        self.x[s] = False
        self.z[s] = False
        self.r[s] = False
        for i in np.nonzero(self.x[:n, a])[0]:
            self._rowsum(np.array([s]), n + i)
        return int(self.r[s])

    def reset(self, a: int):
        if self.measure(a):
            self._x_gate(a)

    def _x_gate(self, a):
        self.r ^= self.z[:, a]

    def measure_x(self, a: int) -> int:
        self.h(a)
        m = self.measure(a)
        self.h(a)
        return m

    def reset_x(self, a: int):
        self.h(a)
        self.reset(a)
        self.h(a)


def reference_measurements(c, seed: int = 0) -> np.ndarray:
    """Noiseless measurement record of ``c`` (noise and erasure ops ignored)."""
    t = Tableau(c.num_qubits, np.random.default_rng(seed))
    out = []
    for ins in c.instructions:
        name = ins.name
        if name == "H":
            for q in ins.targets:
                t.h(q)
        elif name == "S":
            for q in ins.targets:
                t.s(q)
        elif name == "CX":
            for a, b in ins.pairs():
                t.cx(a, b)
        elif name == "CZ":
            for a, b in ins.pairs():
                t.cz(a, b)
        elif name == "R":
            for q in ins.targets:
                t.reset(q)
        elif name == "RX":
            for q in ins.targets:
                t.reset_x(q)
        elif name == "M":
            out.extend(t.measure(q) for q in ins.targets)
        elif name == "MX":
            out.extend(t.measure_x(q) for q in ins.targets)
    return np.array(out, dtype=np.uint8)
