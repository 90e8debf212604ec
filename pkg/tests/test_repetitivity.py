"""Repetitivity radius estimation: grids, matching, profiles, contrasts."""

from fractions import Fraction

import numpy as np
import pytest

from delrep import (
    Box,
    InvalidInputError,
    example_scheme,
    extract_delone,
    gen_lattice,
    gen_perturbed,
    generate_patch,
    profile,
    radius_passes,
    repetitivity_radius,
)
from delrep.repetitivity import radius_grid


# -- radius grid ----------------------------------------------------------------


def test_radius_grid_geometric():
    grid = radius_grid(2.0, 10.0)
    assert grid[0] == 2.0
    assert grid == [2.0 * 1.25**j for j in range(8)]
    assert all(R <= 10.0 * 1.001 for R in grid)
    assert radius_grid(5.0, 5.0) == [5.0]


# -- single-radius checks ---------------------------------------------------------


def test_radius_passes_lattice_translates():
    P = gen_lattice(2, 1.0, Box([0, 0], [40, 40]))
    assert radius_passes(P, 2, 2, 0.0, [(10, 10), (20, 20)], [(15, 15), (25, 25)])


def test_radius_passes_needs_alignment_slack():
    P = gen_lattice(2, 1.0, Box([0, 0], [40, 40]))
    # at R = r the only candidate center is the off-lattice location itself
    assert not radius_passes(P, 2, 2, 0.0, [(10, 10)], [(15.5, 15.5)])
    assert radius_passes(P, 2, 4, 0.0, [(10, 10)], [(15.5, 15.5)])


def test_radius_passes_eps_tolerance_on_perturbed_set():
    Q = gen_perturbed(2, 1.0, Box([0, 0], [60, 60]), 0.1, seed=3)
    c = Q.points[np.argmin(np.abs(Q.points - 30).max(axis=1))]
    locs = [(20.0, 20.0), (35.0, 35.0)]
    assert not radius_passes(Q, 2, 8, 0.01, [c], locs)
    assert radius_passes(Q, 2, 8, 1.0, [c], locs)


def test_radius_passes_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [40, 40]))
    with pytest.raises(InvalidInputError, match="0 < r <= R"):
        radius_passes(P, 4, 2, 0.0, [(10, 10)], [(20, 20)])
    with pytest.raises(InvalidInputError, match="untruncated nonempty"):
        radius_passes(P, 2, 4, 0.0, [(0, 0)], [(20, 20)])


# -- repetitivity radius ------------------------------------------------------------


def test_repetitivity_radius_lattice_matches_at_first_grid_radius():
    P = gen_lattice(2, 1.0, Box([0, 0], [60, 60]))
    res = repetitivity_radius(P, 2.0, 0.0, probe_patches=4, probe_locations=4,
                              R_max=10.0, seed=0)
    assert res.R_est == 2.0
    assert res.checked == 16 and res.failures == 0
    assert res.ok and res.witness is None
    assert res.grid[:3] == (2.0, 2.5, 3.125)


def test_repetitivity_radius_monotone_in_eps():
    W = gen_perturbed(1, 1.0, Box([0], [600]), 0.04, seed=21)
    ests = []
    for eps in (0.05, 0.1, 0.3):
        res = repetitivity_radius(W, 3.0, eps, probe_patches=6,
                                  probe_locations=6, R_max=50.0, seed=2)
        assert res.failures == 0
        ests.append(res.R_est)
    assert ests == [14.30511474609375, 9.1552734375, 9.1552734375]
    assert ests[0] >= ests[1] >= ests[2]


def test_repetitivity_radius_reports_failure_witness():
    B = gen_perturbed(2, 1.0, Box([0, 0], [60, 60]), 0.3, seed=1)
    res = repetitivity_radius(B, 2.0, 1e-9, probe_patches=3, probe_locations=3,
                              R_max=10.0, seed=0)
    assert res.R_est is None and not res.ok
    assert res.failures == 8
    assert res.witness is not None
    assert B.window.contains_points(np.array([res.witness.patch_center])).all()
    assert B.window.contains_points(np.array([res.witness.location])).all()


def test_repetitivity_radius_deterministic():
    P = gen_perturbed(2, 1.0, Box([0, 0], [80, 80]), 0.1, seed=4)
    a = repetitivity_radius(P, 2.0, 0.5, probe_patches=4, probe_locations=4,
                            R_max=12.0, seed=5)
    b = repetitivity_radius(P, 2.0, 0.5, probe_patches=4, probe_locations=4,
                            R_max=12.0, seed=5)
    assert a == b


def test_repetitivity_radius_window_capacity_guard():
    P = gen_lattice(2, 1.0, Box([0, 0], [60, 60]))
    with pytest.raises(InvalidInputError,
                       match=r"fits only 1 disjoint R_max-balls, need 4"):
        repetitivity_radius(P, 2.0, 0.0, probe_patches=4, probe_locations=4,
                            R_max=30.0, seed=0)


def test_repetitivity_radius_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [60, 60]))
    with pytest.raises(InvalidInputError):
        repetitivity_radius(P, 12.0, 0.0, R_max=10.0)
    with pytest.raises(InvalidInputError, match="nonnegative"):
        repetitivity_radius(P, 2.0, -0.1, probe_patches=2, probe_locations=2,
                            R_max=10.0)
    with pytest.raises(InvalidInputError, match="probe counts"):
        repetitivity_radius(P, 2.0, 0.0, probe_patches=0, probe_locations=2,
                            R_max=10.0)


def test_repetitivity_radius_thread_invariant():
    P = gen_perturbed(2, 1.0, Box([0, 0], [60, 60]), 0.05, seed=7)
    a = repetitivity_radius(P, 2.0, 0.3, probe_patches=3, probe_locations=3,
                            R_max=10.0, seed=1)
    b = repetitivity_radius(P, 2.0, 0.3, probe_patches=3, probe_locations=3,
                            R_max=10.0, seed=1, threads=4)
    assert a == b


# -- profiles -----------------------------------------------------------------------


def test_profile_lattice_crep_is_one():
    P = gen_lattice(2, 1.0, Box([0, 0], [120, 120]))
    prof = profile(P, 0.0, [2, 4], probe_patches=6, probe_locations=6,
                   R_max=20.0, seed=0)
    assert [(s.r, s.R_est) for s in prof.samples] == [(2.0, 2.0), (4.0, 4.0)]
    assert prof.crep_est == 1.0
    assert prof.failures == []
    header, rows = prof.csv_rows()
    assert header == ("r", "R_est", "checked", "failures")
    assert len(rows) == 2


def test_profile_separates_failures():
    B = gen_perturbed(2, 1.0, Box([0, 0], [60, 60]), 0.3, seed=1)
    prof = profile(B, 1e-9, [2, 3], probe_patches=3, probe_locations=3,
                   R_max=10.0, seed=0)
    assert prof.samples == [] and len(prof.failures) == 2
    assert prof.crep_est is None
    doc = prof.to_json()
    assert doc["failed_r"] == [2.0, 3.0]
    assert doc["crep_est"] is None


def test_profile_validation():
    P = gen_lattice(2, 1.0, Box([0, 0], [120, 120]))
    with pytest.raises(InvalidInputError, match="increasing"):
        profile(P, 0.0, [4, 2], probe_patches=2, probe_locations=2, R_max=20.0)


# -- lattice vs incommensurable substitution -----------------------------------------


def test_substitution_set_is_far_from_linearly_repetitive():
    # same probe budget on the same window scale: a lattice returns copies
    # within a tick of r, while the incommensurable substitution point set
    # needs a far larger radius at loose eps and fails outright at tight eps
    patch = generate_patch(example_scheme("ternary"), 0, 8.0)
    L = extract_delone(patch, [[Fraction(1, 2)]])
    Z = gen_lattice(1, 1.0, Box([0], [2980]))

    z1 = repetitivity_radius(Z, 2.0, 0.1, probe_patches=4, probe_locations=4,
                             R_max=100.0, seed=1)
    z2 = repetitivity_radius(Z, 2.0, 0.2, probe_patches=4, probe_locations=4,
                             R_max=100.0, seed=1)
    assert z1.R_est == 2.5 and z2.R_est == 2.5

    tight = repetitivity_radius(L, 2.0, 0.1, probe_patches=4, probe_locations=4,
                                R_max=100.0, seed=1)
    assert tight.R_est is None and tight.failures > 0

    loose = repetitivity_radius(L, 2.0, 0.2, probe_patches=4, probe_locations=4,
                                R_max=100.0, seed=1)
    assert loose.failures == 0
    assert loose.R_est == pytest.approx(71.05427357601002)
    assert loose.R_est / loose.r > 20 * (z2.R_est / z2.r)
