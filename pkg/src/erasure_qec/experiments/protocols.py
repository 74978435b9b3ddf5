"""Sweep protocols: threshold search, subthreshold scaling, intercepts.

A ``LineSweep`` is a one-parameter family of noise settings
``base + y * direction`` for one schedule.  Thresholds are found in two
stages: a coarse d=3/d=7 scan locates the crossing, then a fine grid around
it (all requested distances, more shots) is fitted with the finite-size
scaling ansatz.  Every stage is deterministic given the seeds, and every
point goes through an optional ``ResultStore`` so reruns are free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..circuit import NoiseParams
from ..surface_code import ScheduleSpec
from .estimate import PointConfig, SweepResult
from .fitting import FitResult, fit_intercept, fit_subthreshold, threshold_from_counts
from .sweep import ResultStore, run_points

def _r(x: float) -> float:
    # grid values go into config hashes; trim float noise
    return float(f"{x:.10g}")


@dataclass(frozen=True)
class Budget:
    n_erasure_samples: int
    n_pauli_samples: int

    @property
    def shots(self) -> int:
        return self.n_erasure_samples * self.n_pauli_samples


@dataclass(frozen=True)
class LineSweep:
    """Noise ``base + y * direction`` on one schedule.

    ``direction`` and ``base`` are tuples of (field, value) pairs so the
    sweep stays hashable; fields not named in either are zero.
    """

    schedule: ScheduleSpec
    direction: tuple[tuple[str, float], ...]
    base: tuple[tuple[str, float], ...] = ()
    gate_only: bool = False
    rounds_per_d: float = 3.0
    seed: int = 0
    modes: tuple[str, ...] = ("approximate",)

    def noise(self, y: float) -> NoiseParams:
        # check-error rates left unset follow q
        vals = {"e": 0.0, "p": 0.0, "q": 0.0}
        vals.update(dict(self.base))
        for k, t in self.direction:
            vals[k] = vals.get(k, 0.0) + t * y
        return NoiseParams(**{k: _r(v) for k, v in vals.items()}, gate_only=self.gate_only)

    def config(self, y: float, d: int, budget: Budget) -> PointConfig:
        return PointConfig(d, self.schedule, self.noise(y), self.rounds_per_d, budget.n_erasure_samples,
                           budget.n_pauli_samples, self.seed, "Z", self.modes)


def line(t_e: float, t_p: float, t_q: float) -> tuple[tuple[str, float], ...]:
    return tuple((k, float(v)) for k, v in (("e", t_e), ("p", t_p), ("q", t_q)) if v)


@dataclass
class ThresholdEstimate:
    y_star: float
    fit: FitResult
    coarse: list[tuple[float, int, float]] = field(default_factory=list)  # (y, d, p_L)
    fine: list[tuple[float, int, int, int, float]] = field(default_factory=list)  # (y, d, failures, shots, p_L)

    @property
    def ok(self) -> bool:
        return self.fit.ok

    def to_dict(self) -> dict:
        return {"y_star": self.y_star, "fit": self.fit.to_dict(), "coarse": self.coarse, "fine": self.fine}


COARSE_FACTORS = (0.5, 0.65, 0.8, 1.0, 1.25, 1.55, 1.9)
COARSE_BUDGET = Budget(200, 50)
COARSE_DS = (3, 7)
FINE_FACTORS = (0.7, 0.85, 1.0, 1.15, 1.3)
MAX_RECENTRE = 3


def _coarse_crossing(sweep: LineSweep, guess: float, store, workers, budget: Budget, rows: list):
    """Interpolated y where the larger distance overtakes the smaller, or
    None with the direction to move the window (-1 lower, +1 higher)."""
    ys = [_r(guess * f) for f in COARSE_FACTORS]
    lo_d, hi_d = COARSE_DS
    cfgs = [sweep.config(y, d, budget) for y in ys for d in COARSE_DS]
    res = run_points(cfgs, store, workers)
    floor = 0.5 / budget.shots
    diff = []
    for i, y in enumerate(ys):
        p_lo = res[2 * i][sweep.modes[0]].p_L
        p_hi = res[2 * i + 1][sweep.modes[0]].p_L
        rows += [(y, lo_d, p_lo), (y, hi_d, p_hi)]
        diff.append(np.log(max(p_hi, floor)) - np.log(max(p_lo, floor)))
    for i in range(len(ys) - 1):
        if diff[i] < 0 <= diff[i + 1]:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(np.exp(np.log(ys[i]) + t * (np.log(ys[i + 1]) - np.log(ys[i])))), 0
    if all(v >= 0 for v in diff):
        return None, -1
    return None, +1


def locate_threshold(sweep: LineSweep, guess: float, ds=(3, 5, 7), fine: Budget = Budget(300, 100),
                     store: ResultStore | None = None, workers: int = 1, coarse: Budget = COARSE_BUDGET,
                     max_moves: int = 4) -> ThresholdEstimate:
    """Two-stage threshold search along ``sweep``; see the module docstring."""
    rows: list = []
    y0 = None
    for _ in range(max_moves + 1):
        y0, move = _coarse_crossing(sweep, guess, store, workers, coarse, rows)
        if y0 is not None:
            break
        guess *= 2.5 if move > 0 else 0.4
    if y0 is None:
        return ThresholdEstimate(float("nan"), FitResult("threshold-universal", {}, float("nan"), "fit-failed",
                                                         message="no crossing found in the coarse scan"), rows)
    est = _fine_fit(sweep, y0, ds, fine, store, workers)
    for _ in range(MAX_RECENTRE):
        if est.ok:
            break
        # recentre on the fitted crossing when it is plausible
        yc = est.fit.params.get("y_star", float("nan"))
        if not (np.isfinite(yc) and 0.5 * y0 < yc < 2 * y0):
            break
        y0 = _r(yc)
        est = _fine_fit(sweep, y0, ds, fine, store, workers)
    est.coarse = rows
    return est


def _fine_fit(sweep, y0, ds, budget, store, workers) -> ThresholdEstimate:
    ys = [_r(y0 * f) for f in FINE_FACTORS]
    cfgs = [sweep.config(y, d, budget) for y in ys for d in ds]
    res = run_points(cfgs, store, workers)
    mode = sweep.modes[0]
    pts = []
    for cfg, r in zip(cfgs, res):
        sr: SweepResult = r[mode]
        pts.append((float(sweep_value(cfg, sweep)), cfg.d, sr.failures, sr.shots, sr.p_L))
    arr = np.array([(y, d, f, s) for y, d, f, s, _ in pts], dtype=float)
    k = np.array([c.rounds / c.d for c in cfgs])
    fit = threshold_from_counts(arr[:, 1], arr[:, 0], arr[:, 2], arr[:, 3], k, seed=sweep.seed)
    return ThresholdEstimate(fit.params.get("y_star", float("nan")), fit, [], pts)


def sweep_value(cfg: PointConfig, sweep: LineSweep) -> float:
    """Recover y from a config built by ``sweep.config``."""
    k, t = sweep.direction[0]
    return (getattr(cfg.noise, k) - dict(sweep.base).get(k, 0.0)) / t


# ---------------------------------------------------------------------------
# subthreshold scaling


@dataclass
class SubthresholdEstimate:
    x_star: float
    fit: FitResult
    points: list[tuple[float, int, int, int, float]]  # (x, d, failures, shots, p_L)

    def to_dict(self) -> dict:
        return {"x_star": self.x_star, "fit": self.fit.to_dict(), "points": self.points}


def subthreshold_scaling(sweep: LineSweep, x_star: float, fractions=(0.3, 0.4, 0.5, 0.6), ds=(3, 5, 7),
                         budget: Budget = Budget(1000, 500), store: ResultStore | None = None,
                         workers: int = 1) -> SubthresholdEstimate:
    xs = [_r(x_star * f) for f in fractions]
    cfgs = [sweep.config(x, d, budget) for x in xs for d in ds]
    res = run_points(cfgs, store, workers)
    mode = sweep.modes[0]
    pts = [(float(sweep_value(c, sweep)), c.d, r[mode].failures, r[mode].shots, r[mode].p_L)
           for c, r in zip(cfgs, res)]
    arr = np.array([p[:2] + (p[4],) for p in pts])
    fit = fit_subthreshold(arr[:, 1], arr[:, 0], arr[:, 2], x_star)
    return SubthresholdEstimate(x_star, fit, pts)


# ---------------------------------------------------------------------------
# reset-imperfection intercepts

# family -> (reset kind, reset policy, varied check-error field)
RESET_FAMILIES = {
    "fn-selective": ("one-way", "conditional", "q_fn"),
    "fn-reset-all": ("one-way", "unconditional", "q_fn"),
    "fp-one-way": ("one-way", "conditional", "q_fp"),
    "fp-unitary": ("unitary", "conditional", "q_fp"),
}
FIRST_Q = {"q_fn": 0.1, "q_fp": 0.01}


def reset_sweep(l: int, family: str, q: float, seed: int = 0) -> LineSweep:
    kind, policy, field_ = RESET_FAMILIES[family]
    return LineSweep(ScheduleSpec(l=l, reset_kind=kind, reset_policy=policy), (("e", 1.0),),
                     ((field_, q),), gate_only=True, seed=seed)


@dataclass
class InterceptEstimate:
    family: str
    l: int
    e_star: float
    boundary: list[tuple[float, float]]  # (e_th, q)
    fit: FitResult
    thresholds: list[dict] = field(default_factory=list)

    @property
    def q_star(self) -> float:
        return self.fit.params.get("v_star", float("nan"))

    def to_dict(self) -> dict:
        return {"family": self.family, "l": self.l, "e_star": self.e_star, "boundary": self.boundary,
                "q_star": self.q_star, "fit": self.fit.to_dict(), "thresholds": self.thresholds}


def gate_only_erasure_threshold(l: int, store=None, workers=1, fine=Budget(300, 100), seed: int = 0,
                                guess: float = 0.01) -> ThresholdEstimate:
    """e* with p = q = 0; every reset family coincides here."""
    return locate_threshold(reset_sweep(l, "fn-selective", 0.0, seed), guess, fine=fine, store=store,
                            workers=workers)


def reset_intercept(l: int, family: str, e_star: float, store=None, workers=1, fine=Budget(300, 100),
                    seed: int = 0) -> InterceptEstimate:
    """q* of e/e* + q/q* = 1 from thresholds at two check-error rates.

    The first rate is fixed per error type; the second sits at 60% of the
    intercept implied by the first, so both probe the interior of the line.
    """
    field_ = RESET_FAMILIES[family][2]
    q1 = FIRST_Q[field_]
    boundary, infos = [], []
    t1 = locate_threshold(reset_sweep(l, family, q1, seed), 0.7 * e_star, fine=fine, store=store, workers=workers)
    infos.append({"q": q1, **t1.to_dict()})
    if t1.ok:
        boundary.append((t1.y_star, q1))
        frac = 1.0 - t1.y_star / e_star
        q2 = _r(0.6 * q1 / frac) if frac > 0.05 else _r(2 * q1)
        q2 = min(q2, 0.9)
        t2 = locate_threshold(reset_sweep(l, family, q2, seed), max(e_star * (1 - 0.6), 1e-4), fine=fine,
                              store=store, workers=workers)
        infos.append({"q": q2, **t2.to_dict()})
        if t2.ok:
            boundary.append((t2.y_star, q2))
    fit = fit_intercept(np.array(boundary) if boundary else np.zeros((0, 2)), e_star, f"{field_}-ansatz") \
        if boundary else FitResult(f"{field_}-ansatz", {}, float("nan"), "fit-failed", message="no threshold found")
    return InterceptEstimate(family, l, e_star, boundary, fit, infos)


# ---------------------------------------------------------------------------
# distance scaling at single points


@dataclass
class ScalingCheck:
    noise: dict
    l: int
    p_L: list[float]
    ci: list[tuple[float, float]]

    @property
    def decreasing(self) -> bool:
        """Strictly decreasing with non-overlapping confidence intervals."""
        return all(self.ci[i + 1][1] < self.ci[i][0] for i in range(len(self.ci) - 1))

    @property
    def not_decreasing(self) -> bool:
        return self.p_L[-1] >= self.p_L[0]

    def to_dict(self) -> dict:
        return {"noise": self.noise, "l": self.l, "p_L": self.p_L, "ci": self.ci,
                "decreasing": self.decreasing, "not_decreasing": self.not_decreasing}


def distance_scaling(sweep: LineSweep, y: float, ds=(3, 5, 7), budget: Budget = Budget(400, 200),
                     store=None, workers=1) -> ScalingCheck:
    cfgs = [sweep.config(y, d, budget) for d in ds]
    res = run_points(cfgs, store, workers)
    mode = sweep.modes[0]
    return ScalingCheck(cfgs[0].noise.to_dict(), sweep.schedule.l, [r[mode].p_L for r in res],
                        [tuple(r[mode].ci) for r in res])
