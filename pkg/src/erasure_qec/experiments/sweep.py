"""Grid execution with a results store.

Points are independent; within a point the erasure-sample range can be split
across worker processes.  Because randomness is keyed by (seed, sample
index), totals do not depend on the split.
"""
from __future__ import annotations

import csv
import hashlib
import json
import multiprocessing as mp
import os
from pathlib import Path

from .. import __version__
from .estimate import PointConfig, SweepResult, count_failures, summarize

# modules whose code determines Monte Carlo results
_RESULT_SOURCES = ("_kernels.py", "program.py", "circuit.py", "sampler.py", "converter.py", "dem.py",
                   "surface_code.py", "experiments/estimate.py")


def source_hash() -> str:
    root = Path(__file__).resolve().parent.parent
    h = hashlib.sha256()
    for name in _RESULT_SOURCES:
        h.update(name.encode())
        h.update((root / name).read_bytes())
    return h.hexdigest()[:12]


def _split(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n)) if n else 1
    edges = [n * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts)]


def _task(args):
    cfg_dict, lo, hi = args
    return count_failures(PointConfig.from_dict(cfg_dict), lo, hi)


def parallel_failures(cfg: PointConfig, workers: int) -> dict[str, int]:
    ranges = _split(cfg.n_erasure_samples, workers)
    ctx = mp.get_context("fork") if hasattr(os, "fork") else mp.get_context()
    with ctx.Pool(len(ranges)) as pool:
        parts = pool.map(_task, [(cfg.to_dict(), lo, hi) for lo, hi in ranges])
    total = {m: 0 for m in cfg.modes}
    for p in parts:
        for m, v in p.items():
            total[m] += v
    return total


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


class ResultStore:
    """One JSON file per point, named by config key and code hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.code = source_hash()

    def path(self, cfg: PointConfig) -> Path:
        return self.root / f"{cfg.key()}-{self.code}.json"

    def get(self, cfg: PointConfig) -> dict[str, SweepResult] | None:
        p = self.path(cfg)
        if not p.exists():
            return None
        data = json.loads(p.read_text())
        return {m: SweepResult.from_dict(r) for m, r in data["results"].items()}

    def put(self, cfg: PointConfig, res: dict[str, SweepResult]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        data = {"config_key": cfg.key(), "code": self.code, "version": __version__,
                "results": {m: r.to_dict() for m, r in res.items()}}
        tmp = self.path(cfg).with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        tmp.replace(self.path(cfg))


def run_points(points: list[PointConfig], store: ResultStore | None = None, workers: int = 1,
               progress=None) -> list[dict[str, SweepResult]]:
    """Run (or load) every point, in order."""
    from . import estimate
    from .estimate import run_point

    out = []
    for i, cfg in enumerate(points):
        res = store.get(cfg) if store is not None else None
        if res is None:
            res = run_point(cfg, workers)
            # per-pattern matchers are large and rarely reused across points
            estimate._MODELS.clear()
            estimate._CIRCUITS.clear()
            if store is not None:
                store.put(cfg, res)
        if progress is not None:
            progress(i + 1, len(points), cfg, res)
        out.append(res)
    return out


CSV_COLUMNS = ["x", "d", "k", "l", "variant", "mode", "e", "p", "q", "q_fn", "q_fp", "shots", "failures",
               "p_raw", "p_L", "ci_lo", "ci_hi"]


def result_rows(results: list[dict[str, SweepResult]], x_of=None) -> list[dict]:
    rows = []
    for res in results:
        for mode, r in res.items():
            cfg = r.config
            nz = cfg["noise"]
            rows.append({
                "x": x_of(cfg) if x_of else "", "d": cfg["d"],
                "k": f"{PointConfig.from_dict(cfg).rounds / cfg['d']:.10g}", "l": cfg["schedule"]["l"],
                "variant": cfg["schedule"]["variant"], "mode": mode, "e": nz["e"], "p": nz["p"], "q": nz["q"],
                "q_fn": nz["q_fn"], "q_fp": nz["q_fp"], "shots": r.shots, "failures": r.failures,
                "p_raw": f"{r.p_raw:.10g}", "p_L": f"{r.p_L:.10g}", "ci_lo": f"{r.ci[0]:.10g}",
                "ci_hi": f"{r.ci[1]:.10g}",
            })
    return rows


def write_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)
