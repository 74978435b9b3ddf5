"""Threshold, subthreshold and cross-section fits.

All fits are deterministic functions of their inputs: fixed grids followed
by Nelder-Mead refinement from the best grid point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .estimate import normalize


@dataclass
class FitResult:
    kind: str
    params: dict
    residual: float
    status: str = "ok"
    errors: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "residual": self.residual, "status": self.status,
                "errors": self.errors, "message": self.message}


def _poly_residual(x, y):
    A = np.stack([x * x, x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    return float(r @ r), coef


def _scaling_residual(theta, d, y, pl):
    ystar, alpha = theta
    x = (y - ystar) * d ** alpha
    return _poly_residual(x, pl)


def fit_threshold(d, y, p_L, alpha_grid=None, n_grid: int = 61) -> FitResult:
    """Fit p_L = a x^2 + b x + c with x = (y - y*) d^alpha.

    Needs at least 3 distances and 5 swept values.  Reports ``fit-failed``
    when the crossing is outside the swept range or p_L does not grow with x.
    """
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    pl = np.asarray(p_L, dtype=float)
    if len(np.unique(d)) < 3 or len(np.unique(y)) < 5:
        return FitResult("threshold-universal", {}, float("nan"), "fit-failed",
                         message="need >= 3 distances and >= 5 swept values")
    lo, hi = float(y.min()), float(y.max())
    if alpha_grid is None:
        alpha_grid = np.linspace(0.2, 2.0, 19)
    best = (np.inf, None)
    for ys in np.linspace(lo, hi, n_grid):
        for a in alpha_grid:
            r, _ = _scaling_residual((ys, a), d, y, pl)
            if r < best[0]:
                best = (r, (ys, a))
    scale = np.array([hi - lo if hi > lo else 1.0, 1.0])
    f = lambda z: _scaling_residual(z * scale, d, y, pl)[0]
    opt = minimize(f, np.array(best[1]) / scale, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000})
    ystar, alpha = opt.x * scale
    res, coef = _scaling_residual((ystar, alpha), d, y, pl)
    params = {"y_star": float(ystar), "alpha_scaling": float(alpha),
              "a": float(coef[0]), "b": float(coef[1]), "c": float(coef[2])}
    margin = 0.02 * (hi - lo)
    if not (lo + margin < ystar < hi - margin) or coef[1] <= 0 or alpha <= 0:
        return FitResult("threshold-universal", params, res, "fit-failed",
                         message="no crossing inside the swept range")
    return FitResult("threshold-universal", params, res)


def threshold_from_counts(d, y, failures, shots, k=3.0, n_boot: int = 200, seed: int = 0) -> FitResult:
    """Threshold fit on normalized rates with a parametric bootstrap error
    (failures redrawn binomially, 200 resamples by default)."""
    d = np.asarray(d, float)
    y = np.asarray(y, float)
    failures = np.asarray(failures, float)
    shots = np.asarray(shots, float)
    k = np.broadcast_to(np.asarray(k, float), d.shape)
    pl = normalize(failures / shots, k)
    fit = fit_threshold(d, y, pl)
    if fit.ok and n_boot:
        rng = np.random.default_rng(seed)
        vals = []
        for _ in range(n_boot):
            f = rng.binomial(shots.astype(np.int64), np.clip(failures / shots, 0, 1))
            b = fit_threshold(d, y, normalize(f / shots, k))
            if b.ok:
                vals.append(b.params["y_star"])
        if vals:
            fit.errors = {"y_star": float(np.std(vals)), "bootstrap_ok": len(vals)}
    return fit


def fit_subthreshold(d, x, p_L, x_star: float) -> FitResult:
    """Regress log p_L on d log(x/x*) with a shared intercept log a."""
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=float)
    pl = np.asarray(p_L, dtype=float)
    if np.any(x >= x_star):
        return FitResult("subthreshold", {}, float("nan"), "fit-failed", message="x must be below x*")
    keep = pl > 0
    msg = ""
    if not keep.all():
        msg = f"{int((~keep).sum())} zero-failure points excluded"
    if len(np.unique(d[keep])) < 3 and len(np.unique(d)) >= 3:
        return FitResult("subthreshold", {}, float("nan"), "fit-failed", message=msg or "too few distances")
    X = d[keep] * np.log(x[keep] / x_star)
    A = np.stack([np.ones_like(X), X], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(pl[keep]), rcond=None)
    r = A @ coef - np.log(pl[keep])
    return FitResult("subthreshold", {"a": float(np.exp(coef[0])), "alpha": float(coef[1])},
                     float(r @ r), "ok", message=msg)


def fit_cross_section(points, kind: str = "cross-section") -> FitResult:
    """Intercepts (u*, v*) of u/u* + v/v* = 1 through boundary points (u, v)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        return FitResult(kind, {}, float("nan"), "fit-failed", message="need >= 2 boundary points")
    if np.linalg.matrix_rank(pts, tol=1e-12 * max(1.0, np.abs(pts).max())) < 2:
        return FitResult(kind, {}, float("nan"), "fit-failed", message="boundary points are collinear with the origin")
    inv, *_ = np.linalg.lstsq(pts, np.ones(len(pts)), rcond=None)
    if np.any(inv <= 0):
        return FitResult(kind, {"inverse": inv.tolist()}, float("nan"), "fit-failed",
                         message="fitted intercepts are not positive")
    r = pts @ inv - 1.0
    return FitResult(kind, {"u_star": float(1 / inv[0]), "v_star": float(1 / inv[1])}, float(r @ r))


def fit_intercept(points, u_star: float, kind: str) -> FitResult:
    """v* of u/u* + v/v* = 1 with u* held fixed (one-parameter least squares)."""
    pts = np.asarray(points, dtype=float)
    keep = pts[:, 1] > 0
    if not keep.any():
        return FitResult(kind, {}, float("nan"), "fit-failed", message="no point off the u axis")
    u, v = pts[keep, 0], pts[keep, 1]
    # minimize sum (u/u* + v w - 1)^2 over w = 1/v*
    t = 1.0 - u / u_star
    w = float(v @ t / (v @ v))
    if w <= 0:
        return FitResult(kind, {}, float("nan"), "fit-failed", message="boundary does not shrink with v")
    r = u / u_star + v * w - 1.0
    return FitResult(kind, {"u_star": u_star, "v_star": 1.0 / w}, float(r @ r))
