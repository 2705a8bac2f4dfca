"""Maximum likelihood fitting of relational models.

G-IPF searches the adjustment factor gamma so that the inner fit of
``A p = gamma A q`` sums to one.  G-IPFm fits the model with the overall
effect added, ``Abar p = (1, gamma A q)``, and searches gamma until the
non-homogeneous log odds ratio ``d1' log p`` vanishes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linprog

from . import _rational as rat
from .errors import (
    InnerNoConvergence,
    NoPositiveMLE,
    OuterNoBracket,
    OuterNoConvergence,
    TargetOnBoundary,
    ZeroInData,
)
from .existence import existence_check
from .model import ModelMatrix, validate_model

log = logging.getLogger(__name__)

ALGORITHMS = ("auto", "gipf", "gipfm", "both")
EXTENDED_MODES = ("auto", "on", "off")


@dataclass(frozen=True)
class Tolerances:
    inner: float = 1e-10
    outer: float = 1e-10
    membership: float = 1e-8
    max_sweeps: int = 100_000
    max_doublings: int = 60


DEFAULT_TOL = Tolerances()
# models up to this many cells run the inner sweeps on Python floats
SMALL_CELLS = 32


@dataclass(frozen=True)
class Observed:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.ndim != 1:
            raise ValueError("counts must be a vector")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("counts must be finite and nonnegative")
        if c.sum() <= 0:
            raise ValueError("counts must have a positive total")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def q(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.counts > 0))

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.counts > 0))


def as_observed(data, model: ModelMatrix | None = None) -> Observed:
    obs = data if isinstance(data, Observed) else Observed(np.asarray(data, dtype=float))
    if model is not None and obs.counts.size != model.I:
        raise ValueError(f"data has {obs.counts.size} cells, model has {model.I}")
    return obs


@dataclass(frozen=True)
class InnerFit:
    p: np.ndarray
    theta: np.ndarray
    sweeps: int
    residual: float


def inner_solve(model: ModelMatrix | np.ndarray, target, tol_inner: float = DEFAULT_TOL.inner,
                max_sweeps: int = DEFAULT_TOL.max_sweeps, theta0=None) -> InnerFit:
    """Fit p = exp(A' theta) with A p = target by cyclic proportional scaling.

    Each step solves the j-th dual coordinate exactly: with 0-1 entries the
    cells in row j are scaled by target_j / (A p)_j.
    """
    A = model.array if isinstance(model, ModelMatrix) else np.asarray(model, dtype=float)
    t = np.asarray(target, dtype=float)
    if np.any(t <= 0):
        raise TargetOnBoundary("target has a nonpositive coordinate")
    theta = np.zeros(A.shape[0]) if theta0 is None else np.array(theta0, dtype=float)
    if A.shape[1] <= SMALL_CELLS:
        return _inner_small(A, t, tol_inner, max_sweeps, theta)
    masks = [row > 0 for row in A]
    p = np.exp(A.T @ theta)
    resid = np.inf
    for sweep in range(1, max_sweeps + 1):
        for j, m in enumerate(masks):
            s = p[m].sum()
            if not 0.0 < s < math.inf:
                raise TargetOnBoundary("inner iterates left the interior")
            step = math.log(t[j] / s)
            theta[j] += step
            p[m] *= math.exp(step)
        if sweep % 64 == 0:
            p = np.exp(A.T @ theta)
        resid = float(np.max(np.abs(A @ p - t)))
        if resid <= tol_inner:
            p = np.exp(A.T @ theta)
            return InnerFit(p, theta, sweep, resid)
        if not np.all(np.isfinite(p)) or np.any(p == 0):
            raise TargetOnBoundary("inner iterates left the interior")
    raise InnerNoConvergence(max_sweeps, resid)


def _inner_small(A: np.ndarray, t: np.ndarray, tol_inner: float, max_sweeps: int,
                 theta: np.ndarray) -> InnerFit:
    # same sweeps as inner_solve on plain floats; numpy call overhead
    # dominates when rows have only a handful of cells
    rows = [np.flatnonzero(row).tolist() for row in A]
    targets = t.tolist()
    th = theta.tolist()
    p = np.exp(A.T @ theta).tolist()
    resid = math.inf
    for sweep in range(1, max_sweeps + 1):
        for j, cells in enumerate(rows):
            s = 0.0
            for i in cells:
                s += p[i]
            if not 0.0 < s < math.inf:
                raise TargetOnBoundary("inner iterates left the interior")
            step = math.log(targets[j] / s)
            th[j] += step
            e = math.exp(step)
            for i in cells:
                p[i] *= e
        if sweep % 64 == 0:
            p = np.exp(A.T @ np.array(th)).tolist()
        resid = max(abs(sum(p[i] for i in cells) - tj) for cells, tj in zip(rows, targets))
        if resid <= tol_inner:
            theta = np.array(th)
            return InnerFit(np.exp(A.T @ theta), theta, sweep, resid)
        if not all(0.0 < x < math.inf for x in p):
            raise TargetOnBoundary("inner iterates left the interior")
    raise InnerNoConvergence(max_sweeps, resid)


@dataclass
class MLEResult:
    p_hat: np.ndarray
    gamma: float
    theta: np.ndarray | None
    outer_iterations: int
    inner_sweeps: int
    converged: bool
    residuals: dict
    extended: bool = False
    zero_cells: frozenset[int] = frozenset()
    algorithm: str = ""
    discrepancy: float | None = None
    trace: list = field(default_factory=list)

    @property
    def iterations(self) -> tuple[int, int]:
        return self.outer_iterations, self.inner_sweeps

    def loglik(self, counts) -> float:
        return loglik(self.p_hat, counts)

    def to_dict(self, cells: Sequence[str] | None = None) -> dict:
        out = {
            "p_hat": [float(x) for x in self.p_hat],
            "gamma": float(self.gamma),
            "theta": None if self.theta is None else [float(x) for x in self.theta],
            "converged": self.converged,
            "iterations": {"outer": self.outer_iterations, "inner": self.inner_sweeps},
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "extended": self.extended,
            "zero_cells": sorted(self.zero_cells),
            "algorithm": self.algorithm,
        }
        if cells is not None:
            out["cells"] = list(cells)
        if self.discrepancy is not None:
            out["discrepancy"] = float(self.discrepancy)
        return out


def loglik(p, counts) -> float:
    """sum_i q_i log p_i with 0 log 0 = 0; -inf if p vanishes on the support."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(counts, dtype=float)
    q = c / c.sum()
    pos = q > 0
    if np.any(p[pos] <= 0):
        return -math.inf
    return float(np.dot(q[pos], np.log(p[pos])))


def _kernel_rows_on(model: ModelMatrix, cells: Sequence[int]) -> np.ndarray:
    """Kernel vectors of A supported on ``cells`` (restricted to those cells)."""
    sub = [[row[i] for i in cells] for row in model.entries]
    null = rat.nullspace(sub)
    if not null:
        return np.zeros((0, len(cells)))
    return np.array([rat.primitive(v) for v in null], dtype=float)


def kkt_residuals(model: ModelMatrix, q, p, gamma: float) -> dict:
    A = model.array
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    pos = np.flatnonzero(p > 0)
    if pos.size == model.I:
        D = model.kernel.array
        kern = D @ np.log(p)
    else:
        D = _kernel_rows_on(model, pos)
        kern = D @ np.log(p[pos])
    return {
        "subset_sum": float(np.max(np.abs(A @ p - gamma * (A @ q)))),
        "kernel": float(np.max(np.abs(kern))) if kern.size else 0.0,
        "normalization": float(abs(p.sum() - 1.0)),
    }


def _theta_of(p: np.ndarray, model: ModelMatrix) -> np.ndarray:
    theta, *_ = np.linalg.lstsq(model.array.T, np.log(p), rcond=None)
    return theta


def _finish(model, obs, p, gamma, outer, sweeps, algorithm, trace) -> MLEResult:
    s = p.sum()
    p = p / s
    gamma = gamma / s
    res = kkt_residuals(model, obs.q, p, gamma)
    return MLEResult(p, gamma, _theta_of(p, model), outer, sweeps, True, res,
                     algorithm=algorithm, trace=trace)


def _fit_with_overall(model: ModelMatrix, obs: Observed, tol: Tolerances, algorithm: str) -> MLEResult:
    fit = inner_solve(model, model.array @ obs.q, tol.inner, tol.max_sweeps)
    p = fit.p / fit.p.sum()
    res = kkt_residuals(model, obs.q, p, 1.0)
    return MLEResult(p, 1.0, fit.theta, 1, fit.sweeps, True, res, algorithm=algorithm)


def _require_existence(model: ModelMatrix, obs: Observed) -> None:
    if obs.strictly_positive:
        return
    rep = existence_check(model, obs.counts)
    if not rep.exists_positive:
        raise NoPositiveMLE(rep.facial_set)


class _Evaluator:
    """Inner fits along the outer search, warm-started from the last theta."""

    def __init__(self, A, tol: Tolerances):
        self.A = A
        self.tol = tol
        self.theta = None
        self.sweeps = 0
        self.calls = 0
        self.trace: list[tuple[float, float]] = []

    def fit(self, target, tol_inner=None) -> InnerFit:
        # the outer residual is only as accurate as the inner fit behind it
        tol_inner = tol_inner or min(self.tol.inner, 1e-2 * self.tol.outer)
        try:
            f = inner_solve(self.A, target, tol_inner, self.tol.max_sweeps, self.theta)
        except TargetOnBoundary:
            if self.theta is None:
                raise
            # cold restart; the warm start can overshoot far from the last target
            f = inner_solve(self.A, target, tol_inner, self.tol.max_sweeps)
        self.theta = f.theta
        self.sweeps += f.sweeps
        self.calls += 1
        return f


def fit_gipf(model: ModelMatrix, data, tol: Tolerances = DEFAULT_TOL,
             check_existence: bool = True) -> MLEResult:
    """G-IPF: root of g(gamma) = 1'p_gamma - 1 with A p_gamma = gamma A q.

    The search runs on log gamma; the bracket grows by factors of two from
    gamma = 1.
    """
    obs = as_observed(data, model)
    if model.has_overall_effect:
        if check_existence:
            _require_existence(model, obs)
        return _fit_with_overall(model, obs, tol, "ipf")
    if check_existence:
        _require_existence(model, obs)
    Aq = model.array @ obs.q
    ev = _Evaluator(model, tol)

    def g(lam: float) -> float:
        fit = ev.fit(math.exp(lam) * Aq)
        val = float(fit.p.sum() - 1.0)
        ev.trace.append((math.exp(lam), val))
        return val

    lo = hi = 0.0
    g0 = g(0.0)
    if abs(g0) <= tol.outer:
        lam = 0.0
    else:
        step = -math.log(2.0) if g0 > 0 else math.log(2.0)
        lam_prev, g_prev = 0.0, g0
        for _ in range(tol.max_doublings):
            lam_new = lam_prev + step
            g_new = g(lam_new)
            if np.sign(g_new) != np.sign(g_prev):
                lo, hi = sorted((lam_prev, lam_new))
                break
            lam_prev, g_prev = lam_new, g_new
        else:
            raise OuterNoBracket(f"no sign change of 1'p - 1 within 2^{tol.max_doublings}")
        lam = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    final = ev.fit(math.exp(lam) * Aq, tol_inner=min(tol.inner, 1e-13))
    gval = float(final.p.sum() - 1.0)
    # tol.outer drives the search; a collapsed bracket may leave |g| slightly
    # above it, which is acceptable up to the membership tolerance
    if abs(gval) > max(tol.outer, tol.membership):
        raise OuterNoConvergence(f"|1'p - 1| = {gval:.3g} after the gamma search")
    return _finish(model, obs, final.p, math.exp(lam), ev.calls, ev.sweeps, "gipf", ev.trace)


def gamma_range(model: ModelMatrix, q) -> tuple[float, float]:
    """Open interval of kappa for which {r > 0 : 1'r = 1, A r = kappa A q} is nonempty."""
    A = model.array
    Aq = A @ np.asarray(q, dtype=float)
    I = model.I
    A_eq = np.vstack([np.hstack([A, -Aq[:, None]]), np.concatenate([np.ones(I), [0.0]])])
    b_eq = np.concatenate([np.zeros(model.J), [1.0]])
    bounds = [(0, None)] * (I + 1)
    out = []
    for sign in (1.0, -1.0):
        cost = np.zeros(I + 1)
        cost[-1] = sign
        res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status != 0:
            raise OuterNoBracket("could not determine the feasible range of gamma")
        out.append(res.x[-1])
    return float(out[0]), float(out[1])


def fit_gipfm(model: ModelMatrix, data, tol: Tolerances = DEFAULT_TOL) -> MLEResult:
    """G-IPFm: root of f(gamma) = d1' log p_gamma with Abar p_gamma = (1, gamma A q).

    Requires strictly positive data.  f is increasing, so gamma = 1 and the
    feasible range of gamma give a bracket.  If sampled values are not
    monotone the search falls back to plain bisection.
    """
    obs = as_observed(data, model)
    if not obs.strictly_positive:
        raise ZeroInData("G-IPFm needs strictly positive observed frequencies")
    if model.has_overall_effect:
        return _fit_with_overall(model, obs, tol, "ipf")
    from .transform import add_overall

    bar = add_overall(model)
    d1 = np.array(model.kernel.rows[0], dtype=float)
    Aq = model.array @ obs.q
    ev = _Evaluator(bar, tol)

    def f(gamma: float) -> float:
        fit = ev.fit(np.concatenate([[1.0], gamma * Aq]))
        val = float(d1 @ np.log(fit.p))
        ev.trace.append((gamma, val))
        return val

    f1 = f(1.0)
    if abs(f1) <= tol.outer:
        gamma = 1.0
    else:
        g_lo, g_hi = gamma_range(model, obs.q)
        gamma = _bracket_and_solve(f, f1, g_lo, g_hi, tol)
    final = ev.fit(np.concatenate([[1.0], gamma * Aq]), tol_inner=min(tol.inner, 1e-13))
    fval = float(d1 @ np.log(final.p))
    if abs(fval) > max(tol.outer, tol.membership):
        raise OuterNoConvergence(f"|d1' log p| = {fval:.3g} after the gamma search")
    return _finish(model, obs, final.p, gamma, ev.calls, ev.sweeps, "gipfm", ev.trace)


def _bracket_and_solve(f, f1: float, g_lo: float, g_hi: float, tol: Tolerances) -> float:
    samples = [(1.0, f1)]

    def approach(end: float):
        prev = (1.0, f1)
        for k in range(1, tol.max_doublings + 1):
            gamma = 1.0 + (end - 1.0) * (1.0 - 2.0 ** -k)
            if gamma == prev[0]:
                break
            try:
                val = f(gamma)
            except (InnerNoConvergence, TargetOnBoundary):
                break
            samples.append((gamma, val))
            if np.sign(val) != np.sign(prev[1]):
                return tuple(sorted((prev, (gamma, val))))
            prev = (gamma, val)
        return None

    first, second = (g_hi, g_lo) if f1 < 0 else (g_lo, g_hi)
    bracket = approach(first) or approach(second)
    if bracket is None:
        raise OuterNoBracket("d1' log p does not change sign over the feasible gamma range")
    (a, fa), (b, fb) = bracket
    ordered = sorted(samples)
    vals = [v for _, v in ordered]
    monotone = all(x <= y for x, y in zip(vals, vals[1:]))
    if monotone:
        return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    log.warning("non-monotone d1' log p samples; falling back to bisection")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) <= tol.outer or b - a <= 1e-15 * max(1.0, abs(mid)):
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    raise OuterNoConvergence("bisection on gamma did not converge")


def fit_extended(model: ModelMatrix, data, tol: Tolerances = DEFAULT_TOL) -> MLEResult:
    """MLE in the closure of the model; always exists.

    When the support of q lies in a proper face of the cone of A, the MLE
    vanishes off the smallest such face F and is the MLE of the model
    restricted to the cells of F.
    """
    obs = as_observed(data, model)
    rep = existence_check(model, obs.counts)
    if rep.exists_positive:
        return fit_gipf(model, obs, tol, check_existence=False)
    face = sorted(rep.minimal_facial_set)
    zero = frozenset(range(model.I)) - frozenset(face)
    q_face = obs.q[face]
    if len(face) == 1:
        p_face = np.ones(1)
        outer = sweeps = 0
    else:
        sub_rows = [[row[i] for i in face] for row in model.entries]
        sub_rows = [r for r in sub_rows if any(r)]
        keep = rat.independent_rows(sub_rows)
        sub = validate_model([sub_rows[i] for i in keep], [model.cells[i] for i in face])
        inner = fit_gipf(sub, q_face, tol, check_existence=False)
        p_face = inner.p_hat
        outer, sweeps = inner.outer_iterations, inner.inner_sweeps
    p = np.zeros(model.I)
    p[face] = p_face
    A = model.array
    Aq = A @ obs.q
    nz = Aq > 0
    gamma = float(np.dot(A[nz] @ p, Aq[nz]) / np.dot(Aq[nz], Aq[nz]))
    res = kkt_residuals(model, obs.q, p, gamma)
    return MLEResult(p, gamma, None, outer, sweeps, True, res, extended=True,
                     zero_cells=zero, algorithm="extended")


def fit(model: ModelMatrix, data, algorithm: str = "auto", extended: str = "auto",
        tol: Tolerances = DEFAULT_TOL) -> MLEResult:
    """Fit by the method suited to the model and the data.

    ``algorithm``: auto | gipf | gipfm | both.  ``extended``: auto falls back
    to the extended MLE when the positive one does not exist, off raises
    NoPositiveMLE, on always returns the extended fit.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if extended not in EXTENDED_MODES:
        raise ValueError(f"unknown extended mode {extended!r}; choose from {EXTENDED_MODES}")
    obs = as_observed(data, model)
    if extended == "on":
        return fit_extended(model, obs, tol)
    if not obs.strictly_positive:
        rep = existence_check(model, obs.counts)
        if not rep.exists_positive:
            if extended == "off":
                raise NoPositiveMLE(rep.facial_set)
            return fit_extended(model, obs, tol)
    if model.has_overall_effect:
        return _fit_with_overall(model, obs, tol, "ipf")
    if not obs.strictly_positive or algorithm == "gipf":
        return fit_gipf(model, obs, tol, check_existence=False)
    if algorithm in ("auto", "gipfm"):
        return fit_gipfm(model, obs, tol)
    a = fit_gipf(model, obs, tol, check_existence=False)
    b = fit_gipfm(model, obs, tol)
    return replace(a, algorithm="both", discrepancy=float(np.max(np.abs(a.p_hat - b.p_hat))))
