import math

import numpy as np
import pytest
from scipy.optimize import linprog

from relmodels import (
    InnerNoConvergence,
    NoPositiveMLE,
    OuterNoBracket,
    TargetOnBoundary,
    Tolerances,
    ZeroInData,
    add_overall,
    as_independence,
    fit,
    fit_extended,
    fit_gipf,
    fit_gipfm,
    gamma_range,
    inner_solve,
    log_linear_params,
    validate_model,
)
from relmodels import mle
from relmodels.io import load_model
from relmodels.mle import as_observed, kkt_residuals, loglik

from .conftest import random_model

EX21 = [[1, 1, 1, 0], [0, 0, 1, 1]]
AS3_COUNTS = [2, 3, 5, 1, 4, 2, 6]

# Frozen from independent computations (see the comments at each use).
EX21_INNER = [0.3150996611745185, 0.3150996611745185, 0.11980067765096307, 0.3801993223490369]
EX21_UNIFORM_ORACLE = [0.28077640721686303, 0.28077640721686303, 0.09611796783886196,
                       0.3423292177274119]
ELP_CURVED_SCALE = 0.8848981747568158


def assert_kkt(res, model, counts):
    q = np.asarray(counts, float) / np.sum(counts)
    r = kkt_residuals(model, q, res.p_hat, res.gamma)
    assert r["subset_sum"] <= 1e-8
    assert r["normalization"] <= 1e-10
    assert r["kernel"] <= 1e-8
    assert res.converged


# --- inner solve -------------------------------------------------------------

def test_inner_solve_two_by_two_independence():
    # cells (1,1), (1,0), (0,1), (0,0)
    model = validate_model([[1, 1, 1, 1], [1, 1, 0, 0], [1, 0, 1, 0]])
    q = np.array([0.1, 0.3, 0.2, 0.4])
    out = inner_solve(model, model.array @ q)
    row, col = 0.4, 0.3
    expected = [row * col, row * (1 - col), (1 - row) * col, (1 - row) * (1 - col)]
    np.testing.assert_allclose(out.p, expected, atol=1e-10)


def test_inner_solve_example_target():
    # frozen by bisection on p = (a, a, ab, b): b = 0.5 / (1 + a), 2a + ab = 0.75
    model = validate_model(EX21)
    out = inner_solve(model, [0.75, 0.5])
    np.testing.assert_allclose(out.p, EX21_INNER, atol=1e-10)
    assert out.p[:3].sum() == pytest.approx(0.75, abs=1e-10)
    assert out.p[2:].sum() == pytest.approx(0.5, abs=1e-10)
    assert np.max(np.abs(model.kernel.array[1:] @ np.log(out.p))) < 1e-12


def test_inner_solve_paths_agree(rng, monkeypatch):
    model = as_independence(4)
    target = model.array @ rng.dirichlet(np.ones(model.I))
    small = inner_solve(model, target)
    monkeypatch.setattr(mle, "SMALL_CELLS", 0)
    large = inner_solve(model, target)
    assert small.sweeps == large.sweeps
    np.testing.assert_allclose(small.p, large.p, atol=1e-12)


def test_inner_solve_errors():
    model = validate_model(EX21)
    with pytest.raises(TargetOnBoundary):
        inner_solve(model, [0.75, 0.0])
    with pytest.raises(InnerNoConvergence):
        inner_solve(as_independence(3), [0.3, 0.2, 0.4], max_sweeps=1)


# --- G-IPF -------------------------------------------------------------------

def test_gipf_as3_closed_form():
    model = as_independence(3)
    res = fit_gipf(model, [0, 0, 0, 0, 0, 0, 1])
    c = 2 ** (1 / 3) - 1
    np.testing.assert_allclose(res.p_hat, [c, c, c, c * c, c * c, c * c, c ** 3], atol=1e-12)
    assert res.gamma == pytest.approx(2 - 4 ** (1 / 3), abs=1e-12)
    assert_kkt(res, model, [0, 0, 0, 0, 0, 0, 1])


def test_gipf_recovers_a_member_of_the_curved_family():
    # alpha = t (0.3, 0.2, 0.4) with 0.9 t + 0.26 t^2 = 1
    t = ELP_CURVED_SCALE
    assert 0.9 * t + 0.26 * t * t == pytest.approx(1.0, abs=1e-15)
    a = t * np.array([0.3, 0.2, 0.4])
    p = np.array([a[0], a[1], a[2], a[0] * a[1], a[0] * a[2], a[1] * a[2]])
    model = load_model("elp")
    for algorithm in ("gipf", "gipfm"):
        res = fit(model, p, algorithm=algorithm)
        np.testing.assert_allclose(res.p_hat, p / p.sum(), atol=1e-10)
        assert res.gamma == pytest.approx(1.0, abs=1e-10)


def test_gipf_uniform_example_matches_frozen_oracle():
    res = fit_gipf(validate_model(EX21), [1, 1, 1, 1])
    np.testing.assert_allclose(res.p_hat, EX21_UNIFORM_ORACLE, atol=1e-4)
    np.testing.assert_allclose(res.p_hat, EX21_UNIFORM_ORACLE, atol=1e-8)


def test_gipf_requires_existence():
    with pytest.raises(NoPositiveMLE) as exc:
        fit_gipf(as_independence(3), [1, 0, 0, 0, 0, 0, 0])
    assert exc.value.facial_set == {0, 1, 3}


def test_gipf_bracket_cap():
    with pytest.raises(OuterNoBracket):
        fit_gipf(as_independence(3), [0, 0, 0, 0, 0, 0, 1], Tolerances(max_doublings=1))


# --- G-IPFm ------------------------------------------------------------------

def test_gipfm_agrees_with_gipf():
    model = as_independence(3)
    a = fit_gipf(model, AS3_COUNTS)
    b = fit_gipfm(model, AS3_COUNTS)
    np.testing.assert_allclose(a.p_hat, b.p_hat, atol=1e-7)
    assert a.gamma == pytest.approx(b.gamma, abs=1e-7)
    assert_kkt(b, model, AS3_COUNTS)


def test_gipfm_member_stops_at_gamma_one():
    model = validate_model(EX21)
    x = 0.2
    y = (1 - 2 * x) / (1 + x)
    q = [x, x, x * y, y]
    res = fit_gipfm(model, q)
    assert res.gamma == pytest.approx(1.0, abs=1e-12)
    assert res.trace[0][0] == 1.0 and abs(res.trace[0][1]) <= 1e-10
    assert len(res.trace) == 1


def test_gipfm_rejects_zeros():
    with pytest.raises(ZeroInData):
        fit_gipfm(as_independence(3), [0, 0, 0, 0, 0, 0, 1])


def test_f_is_increasing_in_gamma():
    model = as_independence(3)
    q = np.array(AS3_COUNTS, float) / sum(AS3_COUNTS)
    lo, hi = gamma_range(model, q)
    assert lo < 1 < hi
    bar = add_overall(model)
    d1 = np.array(model.kernel.rows[0], float)
    Aq = model.array @ q
    grid = np.linspace(lo, hi, 14)[1:-1]
    vals = [d1 @ np.log(inner_solve(bar, np.concatenate([[1.0], g * Aq])).p) for g in grid]
    assert all(x < y for x, y in zip(vals, vals[1:]))
    res = fit_gipfm(model, q)
    samples = sorted(res.trace)
    # near the root, gamma steps of 1e-14 sit below the inner-fit noise
    assert all(x[1] <= y[1] + 1e-9 for x, y in zip(samples, samples[1:]))


# --- extended MLE ------------------------------------------------------------

def test_extended_first_cell_under_as3():
    res = fit_extended(as_independence(3), [1, 0, 0, 0, 0, 0, 0])
    np.testing.assert_allclose(res.p_hat, [1, 0, 0, 0, 0, 0, 0])
    assert res.extended and res.zero_cells == frozenset(range(1, 7))
    assert res.gamma == pytest.approx(1.0)
    assert res.residuals["subset_sum"] <= 1e-12


def test_extended_last_cell_under_as3_bar():
    res = fit_extended(load_model("as3-bar"), [0, 0, 0, 0, 0, 0, 1])
    np.testing.assert_allclose(res.p_hat, [0, 0, 0, 0, 0, 0, 1])
    assert res.zero_cells == frozenset(range(6))


def test_extended_with_larger_face():
    # support {1, 2} of AS3 lies in the face {1, 2, 4} (cells 100, 010, 110)
    model = as_independence(3)
    counts = [3, 1, 0, 0, 0, 0, 0]
    res = fit_extended(model, counts)
    assert res.zero_cells == frozenset({2, 4, 5, 6})
    assert_kkt(res, model, counts)
    # on the face the model is AS independence of two attributes
    sub = fit_gipf(load_model("crabs"), [1, 3, 0])
    np.testing.assert_allclose(res.p_hat[[1, 0, 3]], sub.p_hat, atol=1e-10)


def test_extended_full_support_is_the_ordinary_fit():
    model = as_independence(3)
    a = fit_extended(model, AS3_COUNTS)
    b = fit_gipf(model, AS3_COUNTS)
    assert not a.extended
    np.testing.assert_allclose(a.p_hat, b.p_hat, atol=1e-12)


# --- dispatch ----------------------------------------------------------------

def test_overall_effect_gives_gamma_one():
    res = fit(add_overall(validate_model(EX21)), [3, 1, 4, 2])
    assert res.gamma == 1.0 and res.algorithm == "ipf"
    assert_kkt(res, add_overall(validate_model(EX21)), [3, 1, 4, 2])


def test_both_reports_discrepancy():
    res = fit(as_independence(3), AS3_COUNTS, algorithm="both")
    assert res.algorithm == "both"
    assert res.discrepancy is not None and res.discrepancy < 1e-7


def test_unknown_options():
    with pytest.raises(ValueError):
        fit(as_independence(3), AS3_COUNTS, algorithm="newton")
    with pytest.raises(ValueError):
        fit(as_independence(3), AS3_COUNTS, extended="maybe")


def test_dispatch_with_zeros():
    model = as_independence(3)
    assert fit(model, [0, 0, 0, 0, 0, 0, 1]).algorithm == "gipf"
    assert fit(model, [1, 0, 0, 0, 0, 0, 0]).extended
    with pytest.raises(NoPositiveMLE):
        fit(model, [1, 0, 0, 0, 0, 0, 0], extended="off")
    assert fit(model, AS3_COUNTS, extended="on").algorithm == "gipf"


def test_observed_validation():
    with pytest.raises(ValueError):
        as_observed([0, 0, 0])
    with pytest.raises(ValueError):
        as_observed([1, -1, 2])
    with pytest.raises(ValueError):
        as_observed([1, 2], as_independence(3))


def test_loglik_conventions():
    assert loglik([0.5, 0.5, 0.0], [1, 1, 0]) == pytest.approx(math.log(0.5))
    assert loglik([1.0, 0.0], [1, 1]) == -math.inf


# --- properties --------------------------------------------------------------

def fiber_partner(model, r1, kappa):
    """A strictly positive distribution r2 with A r1 = kappa A r2, by LP."""
    A = model.array
    I = model.I
    # variables (r2, s): maximize s subject to r2 >= s
    A_eq = np.vstack([np.hstack([A, np.zeros((model.J, 1))]),
                      np.concatenate([np.ones(I), [0.0]])])
    b_eq = np.concatenate([A @ r1 / kappa, [1.0]])
    A_ub = np.hstack([-np.eye(I), np.ones((I, 1))])
    res = linprog(np.concatenate([np.zeros(I), [-1.0]]), A_ub=A_ub, b_ub=np.zeros(I),
                  A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * I + [(0, 0.2)], method="highs")
    assert res.status == 0 and res.x[-1] > 1e-3
    return res.x[:I]


@pytest.mark.parametrize("kappa", [0.5, 2.0, 3.0])
def test_fiber_invariance(kappa, rng):
    model = as_independence(4)
    sizes = model.array.sum(axis=0)
    # kappa < 1 needs small subset sums, kappa > 1 large ones
    weight = np.where(sizes == (1 if kappa < 1 else 4), 30.0, 1.0)
    r1 = weight * (1 + rng.random(model.I))
    r1 /= r1.sum()
    r2 = fiber_partner(model, r1, kappa)
    assert not np.allclose(r1, r2)
    a = fit_gipf(model, r1)
    b = fit_gipf(model, r2)
    np.testing.assert_allclose(a.p_hat, b.p_hat, atol=1e-7)
    assert kappa * a.gamma == pytest.approx(b.gamma, abs=1e-7)


def test_overall_effect_fiber(rng):
    model = load_model("as3-bar")
    r1 = rng.random(7) + 0.5
    r1 /= r1.sum()
    d = model.kernel.array[0]
    r2 = r1 + 0.1 * d / np.abs(d).max() * r1.min()
    np.testing.assert_allclose(model.array @ r1, model.array @ r2)
    np.testing.assert_allclose(fit(model, r1).p_hat, fit(model, r2).p_hat, atol=1e-7)


def test_theta0_vanishes_on_fits(rng):
    for _ in range(10):
        model = random_model(rng, 8)
        counts = rng.integers(1, 20, model.I)
        res = fit_gipf(model, counts)
        out = log_linear_params(res.p_hat, add_overall(model))
        assert out.theta0 == pytest.approx(0.0, abs=1e-8)


def test_kkt_on_random_fits(rng):
    for _ in range(15):
        model = random_model(rng, 9)
        counts = rng.integers(0, 6, model.I)
        if counts.sum() == 0:
            continue
        res = fit(model, counts)
        assert_kkt(res, model, counts)
