"""Logical error estimation by two-stage Monte Carlo."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from ..circuit import ErasureCircuit, NoiseParams, annotate_noise
from ..dem import GraphModel
from ..sampler import program_for, run_frames, sample_erasure_batch
from ..surface_code import ScheduleSpec, build_memory_circuit

CHUNK = 25  # erasure samples per frame-simulation call


def normalize(p_raw, k: float = 3.0):
    """Per-``d``-rounds rate from a rate over ``k * d`` rounds, treating the
    run as ``k`` independent blocks each flipping the observable."""
    p_raw = np.clip(np.asarray(p_raw, dtype=float), 0.0, 0.5)
    return 0.5 * (1.0 - (1.0 - 2.0 * p_raw) ** (1.0 / k))


def wilson(failures: int, shots: int, conf: float = 0.95) -> tuple[float, float]:
    if shots == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + conf / 2)
    ph = failures / shots
    den = 1 + z * z / shots
    mid = (ph + z * z / (2 * shots)) / den
    half = z * np.sqrt(ph * (1 - ph) / shots + z * z / (4 * shots * shots)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass(frozen=True)
class PointConfig:
    """One Monte Carlo point."""

    d: int
    schedule: ScheduleSpec
    noise: NoiseParams
    rounds_per_d: float = 3.0
    n_erasure_samples: int = 1000
    n_pauli_samples: int = 200
    seed: int = 0
    basis: str = "Z"
    modes: tuple[str, ...] = ("approximate",)

    @property
    def rounds(self) -> int:
        return max(1, int(round(self.rounds_per_d * self.d)))

    def to_dict(self) -> dict:
        return {
            "d": self.d, "schedule": self.schedule.to_dict(), "noise": self.noise.to_dict(),
            "rounds_per_d": self.rounds_per_d, "n_erasure_samples": self.n_erasure_samples,
            "n_pauli_samples": self.n_pauli_samples, "seed": self.seed, "basis": self.basis,
            "modes": list(self.modes),
        }

    @classmethod
    def from_dict(cls, m: dict) -> "PointConfig":
        m = dict(m)
        m["schedule"] = ScheduleSpec(**m["schedule"])
        m["noise"] = NoiseParams(**m["noise"])
        m["modes"] = tuple(m.get("modes", ("approximate",)))
        return cls(**m)

    def key(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SweepResult:
    """Outcome of one point for one decoding mode."""

    config: dict
    mode: str
    shots: int
    failures: int
    p_raw: float
    p_L: float
    ci_raw: tuple[float, float]
    ci: tuple[float, float]
    widened: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ci_raw"] = list(self.ci_raw)
        out["ci"] = list(self.ci)
        return out

    @classmethod
    def from_dict(cls, m: dict) -> "SweepResult":
        m = dict(m)
        m["ci_raw"] = tuple(m["ci_raw"])
        m["ci"] = tuple(m["ci"])
        return cls(**m)


_CIRCUITS: dict[tuple, ErasureCircuit] = {}
_MODELS: dict[tuple, GraphModel] = {}


def noisy_circuit(cfg: PointConfig) -> ErasureCircuit:
    key = (cfg.d, cfg.schedule, cfg.noise, cfg.rounds, cfg.basis)
    c = _CIRCUITS.get(key)
    if c is None:
        if len(_CIRCUITS) > 16:
            _CIRCUITS.clear()
            _MODELS.clear()
        ideal = build_memory_circuit(cfg.d, cfg.schedule, rounds=cfg.rounds, basis=cfg.basis)
        c = _CIRCUITS[key] = annotate_noise(ideal, cfg.noise)
    return c


def graph_model(cfg: PointConfig, mode: str) -> GraphModel:
    key = (cfg.d, cfg.schedule, cfg.noise, cfg.rounds, cfg.basis, mode)
    m = _MODELS.get(key)
    if m is None:
        m = _MODELS[key] = GraphModel(noisy_circuit(cfg), mode)
    return m


def count_failures(cfg: PointConfig, start: int, stop: int) -> dict[str, int]:
    """Failures per mode over erasure samples ``start .. stop - 1``.

    Every sample's randomness is keyed by (seed, sample index), so any split
    of the sample range gives the same total.
    """
    c = noisy_circuit(cfg)
    prog = program_for(c)
    models = {m: graph_model(cfg, m) for m in cfg.modes}
    fails = {m: 0 for m in cfg.modes}
    for lo in range(start, stop, CHUNK):
        n = min(CHUNK, stop - lo)
        eb = sample_erasure_batch(prog, cfg.seed, lo, n)
        det, obs = run_frames(prog, eb.hooks, cfg.seed, eb.sample_ids, cfg.n_pauli_samples)
        for s in range(n):
            for mode, gm in models.items():
                pred = gm.matching(eb.ec_obs[s]).decode_batch(det[s])
                fails[mode] += int((pred != obs[s]).any(axis=1).sum())
    return fails


def summarize(cfg: PointConfig, mode: str, failures: int) -> SweepResult:
    shots = cfg.n_erasure_samples * cfg.n_pauli_samples
    p_raw = failures / shots if shots else 0.0
    lo, hi = wilson(failures, shots)
    widened = failures < 10
    if widened:
        # few failures: fall back to the exact (Clopper-Pearson) upper limit
        from scipy.stats import beta

        hi = max(hi, float(beta.ppf(0.975, failures + 1, shots - failures))) if shots > failures else 1.0
    k = cfg.rounds / cfg.d
    return SweepResult(cfg.to_dict(), mode, shots, failures, p_raw, float(normalize(p_raw, k)),
                       (lo, hi), (float(normalize(lo, k)), float(normalize(hi, k))), widened)


def estimate_logical_error(d: int, schedule: ScheduleSpec, noise: NoiseParams, n_erasure_samples: int = 1000,
                           n_pauli_samples: int = 200, seed: int = 0, rounds_per_d: float = 3.0,
                           modes=("approximate",), basis: str = "Z") -> dict[str, SweepResult]:
    """Memory experiment over ``rounds_per_d * d`` rounds; one result per
    decoding mode, all modes decoding the very same shots."""
    cfg = PointConfig(d, schedule, noise, rounds_per_d, n_erasure_samples, n_pauli_samples, seed, basis,
                      tuple(modes))
    return run_point(cfg)


def run_point(cfg: PointConfig, workers: int = 1) -> dict[str, SweepResult]:
    if workers > 1:
        from .sweep import parallel_failures

        fails = parallel_failures(cfg, workers)
    else:
        fails = count_failures(cfg, 0, cfg.n_erasure_samples)
    out = {m: summarize(cfg, m, fails[m]) for m in cfg.modes}
    for r in out.values():
        if r.widened:
            warnings.warn(f"only {r.failures} failures at d={cfg.d}; confidence interval widened", stacklevel=2)
    return out
