"""Weights, density extremes, exponent fits, box scans, bk partial sums."""

import math

import numpy as np
import pytest

from delrep import (
    Box,
    ContractError,
    CubeUnion,
    DyadicCube,
    InfeasibleScaleError,
    InsufficientDataError,
    InvalidInputError,
    bk_partial_sum,
    density_curve,
    density_extremes,
    discrepancy_scan,
    fit_delta,
    gen_lattice,
    gen_perturbed,
    theoretical_delta,
    volume_weight,
    weight_patch_count,
    weight_point_count,
)
from delrep.discrepancy import (
    DensityCurve,
    WeightDistribution,
    bk_csv_rows,
    point_count_cw,
)


# -- theoretical exponent --------------------------------------------------------


def test_theoretical_delta_extreme_value():
    assert theoretical_delta(1.0, 1) == pytest.approx(math.log(4 / 3) / math.log(2))
    assert theoretical_delta(1.0, 2) == pytest.approx(math.log(16 / 15) / math.log(2))


def test_theoretical_delta_range_and_monotonicity():
    rng = np.random.default_rng(2)
    for _ in range(200):
        crep = float(rng.uniform(1.0, 50.0))
        d = int(rng.integers(1, 5))
        v = theoretical_delta(crep, d)
        assert 0.0 < v < 0.5
        assert theoretical_delta(crep + 1.0, d) < v
        assert theoretical_delta(crep, d + 1) < v


def test_theoretical_delta_validation():
    with pytest.raises(InvalidInputError):
        theoretical_delta(0.5, 1)
    with pytest.raises(InvalidInputError):
        theoretical_delta(1.0, 0)


# -- weight distributions ----------------------------------------------------------


def test_volume_weight_is_exact():
    w = volume_weight(3.0)
    assert w.cw == 3.0 and w.t0 == 0.0 and w.supports_unions
    assert w.evaluate(Box([0, 0], [2, 5])) == 30.0
    assert w.evaluate(DyadicCube(2, (0, 0))) == 48.0
    assert w.evaluate(CubeUnion([(0, 0), (1, 0)])) == 6.0


def test_point_count_weight_on_lattice():
    P = gen_lattice(2, 1.0, Box([0, 0], [20, 20]))
    assert point_count_cw(P) == 4.0  # ceil((1/r + 1)^d) at r = 1
    w = weight_point_count(P)
    assert w.cw == 4.0 and w.t0 == 1.0
    assert w.evaluate(Box([0.5, 0.5], [3.5, 1.5])) == 3.0
    assert w.evaluate(DyadicCube(1, (0, 0))) == 4.0  # half-open 2x2 cube
    with pytest.raises(InvalidInputError, match="domain minimum"):
        w.evaluate(Box([0, 0], [0.5, 5]))


def test_weight_rejects_unsupported_region_kinds():
    w = WeightDistribution(evaluator=lambda b: 0.0, cw=1.0, t0=0.0,
                           label="boxes-only")
    assert w.evaluate(Box([0], [1])) == 0.0
    with pytest.raises(InvalidInputError, match="does not support"):
        w.evaluate(CubeUnion([(0,)]))
    with pytest.raises(InvalidInputError, match="unsupported region"):
        w.evaluate("not a region")


def test_weight_boundedness_contract_enforced():
    w = WeightDistribution(evaluator=lambda b: 10.0 * b.vol, cw=1.0, t0=0.0,
                           label="liar")
    with pytest.raises(ContractError, match="boundedness"):
        w.evaluate(Box([0], [2]))


def test_weight_constructor_validation():
    with pytest.raises(InvalidInputError):
        WeightDistribution(evaluator=lambda b: 0.0, cw=0.5, t0=0.0, label="x")
    with pytest.raises(InvalidInputError):
        WeightDistribution(evaluator=lambda b: 0.0, cw=1.0, t0=-1.0, label="x")


def test_patch_count_weight_on_lattice():
    P = gen_lattice(2, 1.0, Box([0, 0], [20, 20]))
    Q = P.patch(np.array([10.0, 10.0]), 1.0)
    w = weight_patch_count(P, Q, eps=1e-9)
    # all interior lattice points carry an exact copy of the 3x3 patch
    assert w.evaluate(Box([5.5, 5.5], [8.5, 8.5])) == 9.0
    # near the window edge the candidate patch truncates and never counts:
    # in the strip y <= 1 only the 19 interior points of the y = 1 row qualify
    assert w.evaluate(Box([0, 0], [20, 1])) == 19.0


def test_patch_count_weight_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [20, 20]))
    Q = P.patch(np.array([10.0, 10.0]), 1.0)
    with pytest.raises(InvalidInputError, match="eps"):
        weight_patch_count(P, Q, eps=0.0)
    truncated = P.patch(np.array([0.0, 0.0]), 3.0)
    with pytest.raises(InvalidInputError, match="truncated"):
        weight_patch_count(P, truncated, eps=0.1)


# -- density extremes ----------------------------------------------------------------


def test_density_extremes_exact_weight_has_zero_gap():
    sup, inf = density_extremes(volume_weight(3.0), 5.0, Box([0, 0], [40, 40]),
                                samples=50, seed=0)
    # w(B)/vol(B) is 3 up to one roundoff in the division
    assert sup == pytest.approx(3.0, rel=1e-14)
    assert inf == pytest.approx(3.0, rel=1e-14)
    assert sup - inf < 1e-12


def test_density_extremes_bracket_lattice_density():
    P = gen_lattice(2, 1.0, Box([0, 0], [100, 100]))
    sup, inf = density_extremes(weight_point_count(P), 10.0,
                                Box([0, 0], [100, 100]), samples=100, seed=1)
    assert inf <= 1.0 <= sup
    assert sup - inf < 0.5


def test_density_extremes_validation():
    w = weight_point_count(gen_lattice(1, 1.0, Box([0], [40])))
    with pytest.raises(InvalidInputError, match="domain minimum"):
        density_extremes(w, 0.5, Box([0], [40]), samples=5, seed=0)
    with pytest.raises(InvalidInputError, match="samples"):
        density_extremes(w, 2.0, Box([0], [40]), samples=0, seed=0)
    with pytest.raises(InvalidInputError, match="window sides"):
        density_extremes(w, 30.0, Box([0], [40]), samples=5, seed=0)


def test_density_curve_narrows_on_lattice():
    P = gen_lattice(2, 1.0, Box([0, 0], [100, 100]))
    curve = density_curve(weight_point_count(P), [2, 4, 8, 16],
                          P.window, samples=60, seed=5)
    assert curve.mu_est == pytest.approx(1.0098327646505203)
    assert curve.mu_err == pytest.approx(0.06880210473406295)
    assert all(p >= m for p, m in zip(curve.mu_plus, curve.mu_minus))
    assert curve.delta_gap[-1] < curve.delta_gap[0]
    assert curve.samples_per_t == 60
    header, rows = curve.csv_rows()
    assert header == ("t", "mu_plus", "mu_minus", "delta_gap")
    assert len(rows) == 4
    assert set(curve.to_json()) == {
        "t_grid", "mu_plus", "mu_minus", "delta_gap", "mu_est", "mu_err",
        "samples_per_t",
    }


def test_density_curve_deterministic_and_thread_invariant():
    P = gen_lattice(2, 1.0, Box([0, 0], [60, 60]))
    w = weight_point_count(P)
    a = density_curve(w, [2, 4, 8], P.window, samples=30, seed=9)
    b = density_curve(w, [2, 4, 8], P.window, samples=30, seed=9)
    c = density_curve(w, [2, 4, 8], P.window, samples=30, seed=9, threads=4)
    assert a.mu_plus == b.mu_plus == c.mu_plus
    assert a.mu_minus == b.mu_minus == c.mu_minus
    with pytest.raises(InvalidInputError, match="increasing"):
        density_curve(w, [4, 2], P.window, samples=5, seed=0)


# -- power-law fit ---------------------------------------------------------------------


def test_fit_delta_recovers_synthetic_power_law():
    ts = [2.0, 4.0, 8.0, 16.0, 32.0]
    gaps = [0.8 * t**-0.6 for t in ts]
    curve = DensityCurve(t_grid=ts, mu_plus=gaps, mu_minus=[0.0] * 5,
                         delta_gap=gaps, mu_est=1.0, mu_err=0.0, samples_per_t=1)
    fit = fit_delta(curve)
    assert fit.delta_emp == pytest.approx(0.6, abs=1e-9)
    assert fit.alpha_fit == pytest.approx(0.8, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_delta_lattice_gap_decays_about_linearly():
    P = gen_lattice(2, 1.0, Box([0, 0], [100, 100]))
    curve = density_curve(weight_point_count(P), [2, 4, 8, 16],
                          P.window, samples=60, seed=5)
    fit = fit_delta(curve)
    assert fit.delta_emp == pytest.approx(0.9595202044309894)
    assert fit.r2 > 0.9


def test_fit_delta_needs_positive_gaps():
    curve = density_curve(volume_weight(2.0), [1, 2, 4, 8],
                          Box([0, 0], [40, 40]), samples=20, seed=0)
    assert all(g <= 1e-12 for g in curve.delta_gap)
    flat = DensityCurve(t_grid=[1.0, 2.0, 4.0, 8.0], mu_plus=[1.0] * 4,
                        mu_minus=[1.0] * 4, delta_gap=[0.0, 0.0, 0.1, 0.05],
                        mu_est=1.0, mu_err=0.0, samples_per_t=1)
    with pytest.raises(InsufficientDataError):
        fit_delta(flat)


# -- discrepancy scan ---------------------------------------------------------------


def test_scan_rows_satisfy_fitted_bound():
    P = gen_lattice(2, 1.0, Box([0, 0], [200, 200]))
    rep = discrepancy_scan(P, mu=1.0, delta=0.4, boxes=150, t_range=(2, 20), seed=3)
    assert len(rep.rows) == 150
    tight = 0
    for row in rep.rows:
        assert row.discrepancy == abs(row.weight - 1.0 * row.vol)
        assert row.bound == pytest.approx(rep.alpha_fit * row.vol / row.width**0.4)
        assert row.discrepancy <= row.bound * (1 + 1e-12)
        assert 2.0 <= row.width <= row.box.sides.max() <= 20.0
        assert P.window.contains_box(row.box)
        if row.discrepancy >= row.bound * (1 - 1e-9):
            tight += 1
    assert tight >= 1  # alpha_fit is attained, not padded
    assert rep.alpha_fit == pytest.approx(0.4860686762925014)


def test_scan_decay_diagnostic_accepts_true_mu():
    P = gen_lattice(2, 1.0, Box([0, 0], [200, 200]))
    rep = discrepancy_scan(P, mu=1.0, delta=0.4, boxes=150, t_range=(2, 20), seed=3)
    assert not rep.mu_suspect
    assert rep.boundary_decay_r2 == pytest.approx(0.12800399879943924)


def test_scan_decay_diagnostic_flags_wrong_mu():
    P = gen_lattice(2, 1.0, Box([0, 0], [200, 200]))
    rep = discrepancy_scan(P, mu=2.0, delta=0.4, boxes=150, t_range=(2, 20), seed=3)
    assert rep.mu_suspect
    assert rep.boundary_decay_r2 < -10


def test_scan_deterministic_and_thread_invariant():
    P = gen_perturbed(2, 1.0, Box([0, 0], [80, 80]), 0.2, seed=5)
    a = discrepancy_scan(P, 1.0, 0.3, 40, (2, 10), seed=7)
    b = discrepancy_scan(P, 1.0, 0.3, 40, (2, 10), seed=7, threads=4)
    assert [r.discrepancy for r in a.rows] == [r.discrepancy for r in b.rows]
    assert a.alpha_fit == b.alpha_fit


def test_scan_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [40, 40]))
    with pytest.raises(InvalidInputError):
        discrepancy_scan(P, 0.0, 0.4, 10, (1, 5))
    with pytest.raises(InvalidInputError):
        discrepancy_scan(P, 1.0, 1.0, 10, (1, 5))
    with pytest.raises(InvalidInputError):
        discrepancy_scan(P, 1.0, 0.4, 0, (1, 5))
    with pytest.raises(InvalidInputError):
        discrepancy_scan(P, 1.0, 0.4, 10, (5, 1))
    with pytest.raises(InvalidInputError, match="exceeds"):
        discrepancy_scan(P, 1.0, 0.4, 10, (1, 5), window=Box([0, 0], [50, 50]))
    with pytest.raises(InvalidInputError, match="window sides"):
        discrepancy_scan(P, 1.0, 0.4, 10, (1, 50))
    doc = discrepancy_scan(P, 1.0, 0.4, 10, (1, 5)).to_json()
    assert set(doc) == {"alpha_fit", "delta_used", "mu_used",
                        "boundary_decay_r2", "mu_suspect", "rows"}


# -- bk partial sums ------------------------------------------------------------------


def test_bk_lattice_terms_exact():
    P = gen_lattice(2, 1.0, Box([0, 0], [64, 64]))
    rows = bk_partial_sum(P, 1.0, 3, Box([30, 30], [34, 34]))
    # ball of radius 2^k: count (2^{k+1}+1)^2 against volume (2^{k+1})^2
    assert [r.sup_term for r in rows] == [1.25, 0.5625, 0.265625, 0.12890625]
    assert [r.partial_sum for r in rows] == [1.25, 1.8125, 2.078125, 2.20703125]
    for r in rows:
        assert r.sup_term <= 4.0 / 2**r.k


def test_bk_wrong_density_diverges_fast():
    P = gen_lattice(2, 1.0, Box([0, 0], [64, 64]))
    rows = bk_partial_sum(P, 0.0, 3, Box([30, 30], [34, 34]))
    assert [r.partial_sum for r in rows] == [2.25, 3.8125, 5.078125, 6.20703125]
    assert rows[2].partial_sum > 5.0


def test_bk_k_min_offsets_the_sum():
    P = gen_lattice(2, 1.0, Box([0, 0], [64, 64]))
    rows = bk_partial_sum(P, 1.0, 3, Box([30, 30], [34, 34]), k_min=2)
    assert [r.k for r in rows] == [2, 3]
    assert rows[0].partial_sum == 0.265625


def test_bk_skips_escaping_centers_then_fails():
    P = gen_lattice(2, 1.0, Box([0, 0], [8, 8]))
    rows = bk_partial_sum(P, 1.0, 2, Box([3, 3], [5, 5]))
    assert rows[2].centers_probed == 1 and rows[2].centers_skipped == 8
    assert rows[2].sup_term == 0.265625  # only the exact middle fits radius 4
    with pytest.raises(InfeasibleScaleError):
        bk_partial_sum(P, 1.0, 3, Box([3, 3], [5, 5]))


def test_bk_center_budget_and_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [64, 64]))
    rows = bk_partial_sum(P, 1.0, 1, Box([20, 20], [40, 40]),
                          max_centers_per_k=1)
    assert all(r.centers_probed == 1 for r in rows)
    with pytest.raises(InvalidInputError):
        bk_partial_sum(P, 1.0, 1, Box([20, 20], [40, 40]), k_min=2)
    with pytest.raises(InvalidInputError, match="no integer point"):
        bk_partial_sum(P, 1.0, 1, Box([20.2, 20.2], [20.8, 20.8]))
    header, rows_csv = bk_csv_rows(rows)
    assert header == ("k", "sup_term", "partial_sum")
    assert len(rows_csv) == 2


def test_bk_thread_invariant():
    P = gen_lattice(2, 1.0, Box([0, 0], [64, 64]))
    a = bk_partial_sum(P, 1.0, 3, Box([28, 28], [36, 36]))
    b = bk_partial_sum(P, 1.0, 3, Box([28, 28], [36, 36]), threads=4)
    assert [r.partial_sum for r in a] == [r.partial_sum for r in b]
