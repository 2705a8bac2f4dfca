"""Brute-force maximum likelihood for small relational models.

Independent of the fitting algorithms: the log-likelihood is maximized
directly over theta with a quadratic penalty on 1'exp(A'theta) = 1, using
Nelder-Mead from several starting points.  Intended for validation at desk
scale only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import InfeasiblePenalty
from .mle import as_observed
from .model import ModelMatrix

DEFAULT_SEED = 20240101
PENALTIES = (1e2, 1e4, 1e6, 1e8)
FEASIBILITY_TOL = 1e-8
# Nelder-Mead (xatol, fatol): intermediate levels only need to hand on a
# good starting point, the last level sets the accuracy
LEVEL_TOL = (1e-6, 1e-10)
FINAL_TOL = (1e-10, 1e-15)
WARM_SIMPLEX = 1e-2


@dataclass
class OracleResult:
    p_star: np.ndarray
    theta: np.ndarray
    loglik: float
    constraint_residual: float
    method_trace: list = field(default_factory=list)

    def to_dict(self, cells=None) -> dict:
        out = {
            "p_star": [float(x) for x in self.p_star],
            "theta": [float(x) for x in self.theta],
            "loglik": self.loglik,
            "constraint_residual": self.constraint_residual,
            "starts": len(self.method_trace),
        }
        if cells is not None:
            out["cells"] = list(cells)
        return out


def _restore(A: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Shift every theta_j by the same t so that 1'exp(A'theta) = 1 exactly.

    Column sums of A are positive, so the total is increasing in t.
    """
    colsum = A.sum(axis=0)
    base = A.T @ theta

    def total(t):
        return np.exp(base + t * colsum).sum() - 1.0

    lo, hi = -1.0, 1.0
    while total(lo) > 0:
        lo *= 2
    while total(hi) < 0:
        hi *= 2
    t = brentq(total, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return theta + t


def brute_force_mle(model: ModelMatrix, data, seed: int = DEFAULT_SEED, n_starts: int = 20,
                    max_cells: int = 16, max_params: int = 8) -> OracleResult:
    """Maximize sum_i q_i a_i'theta subject to 1'exp(A'theta) = 1.

    Starts from theta = 0 and ``n_starts`` random points; for each, the
    penalty weight runs through 1e2, 1e4, 1e6, 1e8 with a Nelder-Mead solve
    at each level, warm-started from the previous one.  The penalized optimum misses the constraint by about
    1/(2 mu gamma), so the end point is shifted back onto it along the
    all-ones direction in theta.
    """
    if model.I > max_cells or model.J > max_params:
        raise ValueError(f"oracle is limited to I <= {max_cells}, J <= {max_params}")
    obs = as_observed(data, model)
    A = model.array
    Aq = A @ obs.q
    rng = np.random.default_rng(seed)
    J = model.J
    starts = [np.zeros(J)] + [rng.normal(0.0, 1.0, J) - math.log(model.I) for _ in range(n_starts)]

    AT = np.ascontiguousarray(A.T)
    best = None
    trace = []
    for k, theta in enumerate(starts):
        for level, mu in enumerate(PENALTIES):
            def objective(th, mu=mu):
                z = AT @ th
                if z.max() > 700.0:  # exp overflows
                    return 1e300
                return -float(Aq @ th) + mu * (np.exp(z).sum() - 1.0) ** 2

            xatol, fatol = FINAL_TOL if level == len(PENALTIES) - 1 else LEVEL_TOL
            options = {"xatol": xatol, "fatol": fatol, "maxiter": 4000 * J,
                       "maxfev": 8000 * J, "adaptive": True}
            if level:
                options["initial_simplex"] = np.vstack([theta, theta + WARM_SIMPLEX * np.eye(J)])
            res = minimize(objective, theta, method="Nelder-Mead", options=options)
            theta = res.x
        penalized_resid = abs(np.exp(A.T @ theta).sum() - 1.0)
        theta = _restore(A, theta)
        p = np.exp(A.T @ theta)
        resid = abs(p.sum() - 1.0)
        ll = float(Aq @ theta)
        trace.append({"start": k, "loglik": ll, "penalized_residual": float(penalized_resid),
                      "residual": float(resid)})
        if resid < FEASIBILITY_TOL and (best is None or ll > best.loglik):
            best = OracleResult(p, theta, ll, float(resid))
    if best is None:
        raise InfeasiblePenalty("no start reached the normalization constraint")
    best.method_trace = trace
    return best
