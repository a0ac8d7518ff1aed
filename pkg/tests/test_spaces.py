"""Norms, restriction, extension upper bounds, membership scans."""

import numpy as np
import pytest

from jetlab import domains, spaces
from jetlab.errors import MaskMismatchError, NotAnExtensionError
from jetlab.functions import get_function, polynomial_jet
from jetlab.grid import (
    GridMask,
    GridSpec,
    SampledJet,
    jet_add,
    jet_scale,
    multi_indices,
)
from jetlab.spaces import (
    check_membership_e,
    check_membership_f,
    h_norm_upper_bound,
    norm_e,
    norm_f,
    norm_g,
    restrict_to_omega,
)


def comb_masks(h=2.0**-6, n_teeth=3):
    return domains.build_domain(domains.comb(n_teeth), h=h)


def random_jet(mask, order, seed):
    rng = np.random.default_rng(seed)
    components = {}
    for alpha in multi_indices(order, mask.grid.dim):
        arr = np.zeros(mask.grid.extents)
        arr[mask.member] = rng.uniform(-5.0, 5.0, mask.count)
        components[alpha] = arr
    return SampledJet(order, mask.grid, mask, components)


def test_norm_hand_value():
    g = GridSpec.cover((0.0,), (1.0,), 0.25)
    mask = GridMask(g, np.ones(5, dtype=bool))
    jet = SampledJet(
        1, g, mask,
        {(0,): np.array([0.0, -3.0, 1.0, 0.5, 2.0]),
         (1,): np.array([1.0, 1.0, -4.0, 0.0, 0.0])},
    )
    rep = norm_f(jet)
    assert rep.per_alpha[(0,)] == 3.0
    assert rep.per_alpha[(1,)] == 4.0
    assert rep.overall == 4.0
    assert rep.space == "F"
    assert rep.point_count == 5
    assert rep.to_payload()["per_alpha"] == {"0": 3.0, "1": 4.0}


def test_norm_algebra_on_random_jets():
    q, omega = comb_masks()
    for seed in range(12):
        x = random_jet(q, 1, seed)
        y = random_jet(q, 1, 1000 + seed)
        nx = norm_f(x).overall
        ny = norm_f(y).overall
        # exact homogeneity, dyadic factor
        assert norm_f(jet_scale(x, -2.0)).overall == 2.0 * nx
        assert norm_f(jet_add(x, y)).overall <= nx + ny
        # restriction never increases the norm
        assert norm_e(restrict_to_omega(x, omega)).overall <= nx


def test_restriction_zeroes_dropped_points():
    q, omega = comb_masks()
    x = random_jet(q, 1, 5)
    r = restrict_to_omega(x, omega)
    gone = q.member & ~omega.member
    assert gone.any()
    assert (r.components[(0, 0)][gone] == 0.0).all()
    assert np.array_equal(
        r.components[(0, 0)][omega.member], x.components[(0, 0)][omega.member]
    )


def test_restriction_rejects_foreign_masks():
    q, omega = comb_masks()
    x = random_jet(omega, 1, 2)
    with pytest.raises(MaskMismatchError):
        restrict_to_omega(x, q)  # superset, not subset
    other = GridSpec.cover((-1.0, -1.0), (1.0, 1.0), 2.0**-5)
    foreign = GridMask(other, np.ones(other.extents, dtype=bool))
    with pytest.raises(MaskMismatchError):
        restrict_to_omega(x, foreign)


def test_h_upper_bound_accepts_true_extension():
    spec = domains.rectangle()
    q, _ = domains.build_domain(spec, h=2.0**-4)
    x = get_function("sum_st", order=1).sample(q, order=1)
    window = GridSpec.cover((-0.5, -0.5), (1.5, 1.5), 2.0**-4)
    all_mask = GridMask(window, np.ones(window.extents, dtype=bool))
    xbar = get_function("sum_st", order=1).sample(all_mask, order=1)
    rep = h_norm_upper_bound(x, xbar)
    assert rep.space == "H-upper"
    assert rep.overall == 3.0  # |s + t| peaks at the window corner
    assert rep.overall >= norm_f(x).overall


def test_h_upper_bound_rejects_non_extensions():
    spec = domains.rectangle()
    q, _ = domains.build_domain(spec, h=2.0**-4)
    x = get_function("sum_st", order=1).sample(q, order=1)
    window = GridSpec.cover((-0.5, -0.5), (1.5, 1.5), 2.0**-4)
    all_mask = GridMask(window, np.ones(window.extents, dtype=bool))
    # wrong values on Q
    wrong = get_function("sin_cos", order=1).sample(all_mask, order=1)
    with pytest.raises(NotAnExtensionError):
        h_norm_upper_bound(x, wrong)
    # window that misses part of Q
    small = GridSpec.cover((0.25, 0.25), (1.5, 1.5), 2.0**-4)
    small_mask = GridMask(small, np.ones(small.extents, dtype=bool))
    clipped = get_function("sum_st", order=1).sample(small_mask, order=1)
    with pytest.raises(NotAnExtensionError):
        h_norm_upper_bound(x, clipped)
    # misaligned lattice
    shifted = GridSpec((-0.5 + 0.3 * 2.0**-4, -0.5), 2.0**-4, window.extents)
    sh_mask = GridMask(shifted, np.ones(shifted.extents, dtype=bool))
    sh = get_function("sum_st", order=1).sample(sh_mask, order=1)
    with pytest.raises(MaskMismatchError):
        h_norm_upper_bound(x, sh)
    # coarser lattice
    coarse_g = GridSpec.cover((-0.5, -0.5), (1.5, 1.5), 2.0**-3)
    coarse_mask = GridMask(coarse_g, np.ones(coarse_g.extents, dtype=bool))
    coarse = get_function("sum_st", order=1).sample(coarse_mask, order=1)
    with pytest.raises(MaskMismatchError):
        h_norm_upper_bound(x, coarse)


def test_smooth_field_scans_consistent():
    q, omega = comb_masks(h=2.0**-7, n_teeth=2)
    jet = get_function("sin_cos", order=1).sample(q, order=1)
    verdict = check_membership_f(jet)
    assert verdict.consistent
    assert verdict.certificate is None
    assert verdict.fd_defect <= verdict.tolerances["fd_bound"]
    assert max(verdict.modulus.values()) < 1e-2
    r = restrict_to_omega(jet, omega)
    assert check_membership_e(r).consistent


def test_scan_catches_jump_discontinuity():
    g = GridSpec.cover((0.0,), (1.0,), 2.0**-6)
    mask = GridMask(g, np.ones(g.extents, dtype=bool))
    xs = g.axis_coords(0)
    step = np.where(xs < 0.5, 0.0, 1.0)
    jet = SampledJet(0, g, mask, {(0,): step})
    verdict = check_membership_f(jet)
    assert not verdict.consistent
    assert verdict.verdict == "violation"
    cert = verdict.certificate
    assert cert is not None
    assert cert.claim == "not-in-F-at-resolution"
    assert cert.gap == 1.0
    term = cert.terms[0]
    # the witness pair straddles the jump at s = 1/2
    assert abs(term.base[0] - 0.5) <= 2.0**-6 + 1e-12
    assert "jumps by 1" in term.note


def test_scan_catches_wrong_declared_partial():
    g = GridSpec.cover((0.0,), (1.0,), 2.0**-6)
    mask = GridMask(g, np.ones(g.extents, dtype=bool))
    xs = g.axis_coords(0)
    jet = SampledJet(
        1, g, mask,
        {(0,): np.sin(xs), (1,): np.cos(xs) + 0.5},
    )
    verdict = check_membership_f(jet)
    assert not verdict.consistent
    assert verdict.fd_defect == pytest.approx(0.5, abs=1e-3)
    assert "finite difference" in verdict.certificate.terms[0].note


def test_scan_round_trips_through_payload():
    g = GridSpec.cover((0.0,), (1.0,), 2.0**-5)
    mask = GridMask(g, np.ones(g.extents, dtype=bool))
    xs = g.axis_coords(0)
    jet = SampledJet(0, g, mask, {(0,): np.where(xs < 0.5, 0.0, 1.0)})
    verdict = check_membership_f(jet)
    payload = verdict.to_payload()
    assert payload["verdict"] == "violation"
    assert payload["certificate"]["claim"] == "not-in-F-at-resolution"
    assert payload["tolerances"]["modulus"] == spaces.DEFAULT_TOL


def test_tol_by_order_overrides_flat_tolerance():
    # first derivative of |sin| has a genuine O(1) kink step at the origin
    g = GridSpec.cover((-1.0,), (1.0,), 2.0**-8)
    mask = GridMask(g, np.ones(g.extents, dtype=bool))
    xs = g.axis_coords(0)
    jet = SampledJet(
        1, g, mask, {(0,): np.abs(np.sin(xs)), (1,): np.sign(xs) * np.cos(xs)}
    )
    strict = check_membership_f(jet, tol=1e-2)
    assert not strict.consistent
    lax = check_membership_f(jet, tol=1e-2, tol_by_order={1: 3.0})
    assert lax.consistent
    assert lax.modulus[1] > 0.9


def test_comb_field_passes_f_scan_on_fine_lattice():
    q, _ = comb_masks(h=2.0**-8, n_teeth=4)
    jet = get_function("example3", order=1).sample(q, order=1)
    verdict = check_membership_f(jet)
    assert verdict.consistent
    assert verdict.h == 2.0**-8


def test_scan_e_on_open_mask_skips_straddling_pairs():
    # a jump across a single excluded lattice point passes the open scan
    # but fails the closed one; the scans differ only through the mask
    g = GridSpec.cover((0.0,), (1.0,), 2.0**-5)
    full = GridMask(g, np.ones(g.extents, dtype=bool))
    punctured = full.member.copy()
    punctured[16] = False  # s = 1/2
    xs = g.axis_coords(0)
    vals = np.where(xs < 0.5, 0.0, 1.0)
    jet_q = SampledJet(0, g, full, {(0,): vals})
    assert not check_membership_f(jet_q).consistent
    omega = GridMask(g, punctured)
    jet_o = SampledJet(0, g, omega, {(0,): np.where(punctured, vals, 0.0)})
    assert check_membership_e(jet_o).consistent
