"""The reference studies: grids, budgets and the quantities they report.

Each study returns a plain dict (JSON-ready).  Scripts in ``scripts/`` and
the acceptance tests call the same functions against the same results
store, so a study computed once is only re-read afterwards.
"""
from __future__ import annotations

import os
from pathlib import Path

from ..surface_code import ScheduleSpec
from .protocols import (Budget, LineSweep, distance_scaling, gate_only_erasure_threshold, line, locate_threshold,
                        reset_intercept, subthreshold_scaling, RESET_FAMILIES)
from .sweep import ResultStore, run_points

SCHEDULES = (4, 2, 1)
LINES = {"erasure-dominated": (1.0, 0.01, 1.0), "pauli-dominated": (1.0, 5.0, 5.0),
         "mixed": (1.0, 0.1, 1.0)}
GENERIC_GUESS = {"erasure-dominated": 0.01, "pauli-dominated": 0.001, "mixed": 0.005}


def default_store() -> ResultStore:
    root = os.environ.get("ERASURE_QEC_RESULTS")
    if root is None:
        root = Path(__file__).resolve().parents[3] / "results" / "store"
    return ResultStore(root)


def pauli_threshold(store=None, workers=1) -> dict:
    """Pure Pauli noise, standard code, one check per round, d = 3..9."""
    store = store or default_store()
    sw = LineSweep(ScheduleSpec(l=1), line(0, 1, 0))
    est = locate_threshold(sw, 0.005, ds=(3, 5, 7, 9), fine=Budget(1000, 200), store=store, workers=workers)
    return {"p_star": est.y_star, **est.to_dict()}


def xzzx_erasure_thresholds(store=None, workers=1) -> dict:
    """Erasure-only noise on the XZZX code with Z-biased spread, d rounds."""
    store = store or default_store()
    out = {}
    for l in SCHEDULES:
        sw = LineSweep(ScheduleSpec(l=l, variant="xzzx", spread_mode="biased-Z"), line(1, 0, 0), rounds_per_d=1.0)
        est = locate_threshold(sw, 0.01, fine=Budget(500, 100), store=store, workers=workers)
        out[l] = {"e_star": est.y_star, **est.to_dict()}
    return out


def line_threshold(l: int, name: str, store=None, workers=1):
    sw = LineSweep(ScheduleSpec(l=l), line(*LINES[name]))
    return sw, locate_threshold(sw, GENERIC_GUESS[name], fine=Budget(400, 100), store=store, workers=workers)


def subthreshold_alphas(store=None, workers=1) -> dict:
    store = store or default_store()
    out = {}
    for name in ("erasure-dominated", "pauli-dominated"):
        for l in SCHEDULES:
            sw, est = line_threshold(l, name, store, workers)
            entry = {"x_star": est.y_star, "threshold": est.to_dict()}
            if est.ok:
                sub = subthreshold_scaling(sw, est.y_star, store=store, workers=workers)
                entry.update(alpha=sub.fit.params.get("alpha", float("nan")), a=sub.fit.params.get("a"),
                             subthreshold=sub.to_dict())
            out[f"{name}/{l}"] = entry
    return out


def reset_intercepts(store=None, workers=1) -> dict:
    store = store or default_store()
    out = {}
    for l in SCHEDULES:
        base = gate_only_erasure_threshold(l, store=store, workers=workers)
        out[f"e_star/{l}"] = {"e_star": base.y_star, **base.to_dict()}
        for family in RESET_FAMILIES:
            if not base.ok:
                out[f"{family}/{l}"] = {"q_star": float("nan"), "message": "no q=0 threshold"}
                continue
            est = reset_intercept(l, family, base.y_star, store=store, workers=workers)
            out[f"{family}/{l}"] = est.to_dict()
    return out


COMPARISON_X = (0.002, 0.004, 0.006, 0.008)


def conversion_comparison(store=None, workers=1) -> dict:
    """Approximate vs exact conversion decoding the same shots."""
    store = store or default_store()
    out = {}
    for l in (4, 2):
        sw = LineSweep(ScheduleSpec(l=l), line(1, 0.1, 1), modes=("approximate", "exact"))
        for d in (3, 5):
            for x in COMPARISON_X:
                cfg = sw.config(x, d, Budget(300, 200))
                res = run_points([cfg], store, workers)[0]
                out[f"{l}/{d}/{x}"] = {m: r.to_dict() for m, r in res.items()}
    return out


INSIDE_FRACTION = 0.5
OUTSIDE_FRACTION = 1.5


def distance_scaling_checks(store=None, workers=1) -> dict:
    """Three lines through the origin per schedule; the inside point sits at
    half the measured threshold, the outside point at 1.5 times it."""
    store = store or default_store()
    out = {}
    for l in SCHEDULES:
        for name in LINES:
            sw, est = line_threshold(l, name, store, workers)
            entry = {"x_star": est.y_star}
            if est.ok:
                for tag, f in (("inside", INSIDE_FRACTION), ("outside", OUTSIDE_FRACTION)):
                    entry[tag] = distance_scaling(sw, est.y_star * f, store=store, workers=workers).to_dict()
            out[f"{name}/{l}"] = entry
    return out


STUDIES = {
    "pauli-threshold": pauli_threshold,
    "xzzx-thresholds": xzzx_erasure_thresholds,
    "subthreshold": subthreshold_alphas,
    "reset-intercepts": reset_intercepts,
    "conversion-comparison": conversion_comparison,
    "distance-scaling": distance_scaling_checks,
}
