"""Physical hardware parameters mapped onto (e, p), and feasibility curves.

Times are in microseconds throughout.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

QUBIT_KINDS = ("dual-rail", "transmon")
DUAL_RAIL_TPHI = 1000.0  # extended dual-rail dephasing time (1 ms)
DUAL_RAIL_TPHI_FACTOR = 30.0


@dataclass(frozen=True)
class HardwareParams:
    T1: float
    Tphi: float
    T2Q: float
    TM: float
    l: int = 1
    kind: str = "dual-rail"

    def __post_init__(self):
        if self.kind not in QUBIT_KINDS:
            raise ValueError(f"unknown qubit kind {self.kind!r}")
        if self.l not in (1, 2, 4):
            raise ValueError("l must be 1, 2 or 4")
        for name in ("T1", "Tphi", "T2Q", "TM"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def map_hardware(hp: HardwareParams) -> tuple[float, float]:
    """Effective (e, p) per operation averaged over one syndrome cycle."""
    cycle_dr = 4 * hp.T2Q + hp.l * hp.TM
    if hp.kind == "dual-rail":
        e = cycle_dr / ((4 + hp.l) * hp.T1)
        p = cycle_dr / ((2 + hp.l) * 2 * hp.Tphi)
        return e, p
    cycle = 4 * hp.T2Q + hp.TM
    return 0.0, cycle / (6 * hp.Tphi) + cycle / (6 * hp.T1)


# Presets.  Transmon entries are rough illustrative device classes (fast
# tunable couplers with short coherence, slow fixed-frequency gates with long
# coherence); they are not measured values of a particular device.
PRESETS: dict[str, dict] = {
    "tunable-transmon": {"kind": "transmon", "T1": 20.0, "Tphi": 30.0, "T2Q": 0.04, "TM": 0.5},
    "fixed-transmon": {"kind": "transmon", "T1": 250.0, "Tphi": 200.0, "T2Q": 0.5, "TM": 1.0},
    "cavity-dual-rail": {"kind": "dual-rail", "T1": 250.0, "Tphi": 1.0e6, "T2Q": 2.0, "TM": 12.0,
                         "ancilla_T1": 147.0},
    "rydberg": {"kind": "dual-rail", "T1": 100.0, "Tphi": 1.0e6, "T2Q": 0.5, "TM": 20.0,
                "bias": 50.0, "metastable_T1": 3000.0, "TM_options": (2.0, 20.0)},
}


def preset(name: str, l: int = 1, **overrides) -> HardwareParams:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    fields = {k: v for k, v in PRESETS[name].items() if k in ("T1", "Tphi", "T2Q", "TM", "kind")}
    fields.update(overrides)
    return HardwareParams(l=l, **fields)


def feasibility_value(hp: HardwareParams, e_star: float, p_star: float) -> float:
    """e/e* + p/p* - 1: negative inside the correctable region."""
    e, p = map_hardware(hp)
    return e / e_star + p / p_star - 1.0


def feasibility_boundary(plane: str, fixed: HardwareParams, e_star: float, p_star: float,
                         grid, bracket=(1e-6, 1e9)) -> list[tuple[float, float]]:
    """Boundary e/e* + p/p* = 1 in a plane.

    ``plane`` is 'T2Q-TM' (grid over TM, solve for T2Q) or 'T1-Tphi' (grid
    over Tphi, solve for T1).  Points without a root in ``bracket`` are
    returned as NaN.
    """
    out = []
    for g in grid:
        if plane == "T2Q-TM":
            f = lambda v: feasibility_value(replace(fixed, TM=g, T2Q=v), e_star, p_star)
        elif plane == "T1-Tphi":
            f = lambda v: feasibility_value(replace(fixed, Tphi=g, T1=v), e_star, p_star)
        else:
            raise ValueError(f"unknown plane {plane!r}")
        lo, hi = bracket
        try:
            flo, fhi = f(lo), f(hi)
        except ValueError:
            out.append((float(g), float("nan")))
            continue
        if np.sign(flo) == np.sign(fhi):
            out.append((float(g), float("nan")))
            continue
        out.append((float(g), float(brentq(f, lo, hi, xtol=1e-14 * max(1.0, abs(g)), rtol=1e-14))))
    return out


def crossover_TM(T1: float, e_star_4: float, e_star_2: float) -> float:
    """TM where the 4 EC and 2 EC boundaries cross for an erasure-dominated
    dual-rail qubit (p negligible)."""
    return T1 * (4 * e_star_4 - 3 * e_star_2)


def write_boundary_csv(points, path: str | Path, x_name: str, y_name: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([x_name, y_name])
        for x, y in points:
            w.writerow([f"{x:.10g}", f"{y:.10g}"])
