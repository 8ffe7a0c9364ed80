"""Depth profiles: cutoffs, the log-correction integral, the collar flow,
collar depth selection, and the adjusted tensor."""

import math

import numpy as np
import pytest

import ccembed as cc
from ccembed.bdf import compute_phi
from ccembed.errors import (ConsistencyError, FlowError, GridError,
                            HypothesisViolation)
from ccembed.errors import FlowExitsChartError
from oracles import (PLATEAU_DROP_04_MINUS_025, collar_h_scaled_disk4,
                     collar_k2_scaled_disk4, integrate_flow, piecewise_phi,
                     radial_flow_field, simpson_dense)

# the quintic ramp integrates to exactly 47/60 over its own support
QUINTIC_RAMP_INTEGRAL = 47.0 / 60.0


# --- cutoffs -----------------------------------------------------------------

def test_cutoff_endpoint_values():
    for kind in ("smoothstep5", "piecewise-linear", "exp-bump"):
        q = cc.make_cutoff(kind, 0.5)
        assert q.value(0.0) == pytest.approx(0.0, abs=1e-15)
        assert q.value(0.25) == pytest.approx(1.0, abs=1e-15)
        assert q.value(0.4) == 1.0
        assert q.value(0.125) == pytest.approx(0.5, abs=1e-12)


def test_smoothstep_joins_are_flat():
    q = cc.make_cutoff("smoothstep5", 0.5)
    assert q.derivative(0.0) == 0.0
    assert q.derivative(0.25) == 0.0
    assert q.derivative(0.3) == 0.0
    assert q.derivative(0.125) > 0.0


def test_zero_cutoff_is_the_identity_profile():
    profile = cc.assemble_bdf(cc.make_cutoff("zero", 0.5))
    r = np.linspace(0.0, 0.5, 11)
    assert np.array_equal(profile.x(r), r)
    assert np.array_equal(profile.phi(r), np.zeros_like(r))
    assert not profile.has_plateau


def test_unknown_cutoff():
    with pytest.raises(GridError, match="unknown cutoff"):
        cc.make_cutoff("boxcar", 0.5)
    with pytest.raises(GridError):
        cc.make_cutoff("smoothstep5", -1.0)


# --- phi ---------------------------------------------------------------------

def test_phi_against_dense_quadrature_oracle():
    q = cc.make_cutoff("smoothstep5", 0.5)
    table = compute_phi(q, tol=1e-12)
    for r in (0.05, 0.13, 0.25, 0.37, 0.5):
        want = -simpson_dense(q.q_over_r, 0.0, r)
        assert table.phi(r) == pytest.approx(want, abs=1e-10)


def test_phi_linear_ramp_closed_form():
    eps = 0.4
    profile = cc.assemble_bdf(cc.make_cutoff("piecewise-linear", eps))
    r = np.linspace(0.0, eps / 2, 9)
    assert np.allclose(profile.phi(r), piecewise_phi(r, eps), atol=1e-10)


def test_phi_value_at_the_plateau_edge():
    # independent of eps by substitution
    for eps in (0.1, 0.5, 0.8):
        profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", eps))
        assert profile.phi(eps / 2) == pytest.approx(-QUINTIC_RAMP_INTEGRAL,
                                                     abs=1e-10)


def test_phi_logarithmic_drop_beyond_the_ramp():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.5))
    drop = profile.phi(0.4) - profile.phi(0.25)
    assert drop == pytest.approx(PLATEAU_DROP_04_MINUS_025, abs=1e-10)


def test_phi_rejects_negative_depth():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.5))
    with pytest.raises(GridError):
        profile.phi(-0.1)


def test_phi_table_size_must_be_odd():
    q = cc.make_cutoff("smoothstep5", 0.5)
    with pytest.raises(GridError):
        compute_phi(q, table_size=100)


# --- the assembled profile -----------------------------------------------------

def test_profile_plateau_is_bit_exact():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.5))
    r = np.array([0.25, 0.3, 0.42, 0.5])
    x = profile.x(r)
    assert np.all(x == profile.x_plateau)
    assert np.all(profile.dx_dr(r) == 0.0)
    assert profile.x_plateau == pytest.approx(
        0.25 * math.exp(-QUINTIC_RAMP_INTEGRAL), abs=1e-10)


def test_profile_is_monotone_then_flat():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.5))
    r = np.linspace(0.0, 0.25, 200)
    x = profile.x(r)
    assert np.all(np.diff(x) > 0.0)
    assert profile.x(0.0) == 0.0
    assert np.all(profile.dx_dr(r[:-1]) > 0.0)


def test_cutoff_identity_on_the_sample():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.3))
    rows = profile.sample(200)
    r, one_plus = rows[:, 0], rows[:, 3]
    q = profile.cutoff.value(r)
    assert np.array_equal(one_plus, 1.0 - q)
    assert np.allclose(1.0 + r * profile.phi_prime(r), 1.0 - q, atol=1e-15)


def test_stretch_limit_and_continuity():
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", 0.5))
    assert profile.stretch(0.0) == 1.0
    below = profile.stretch(0.25 - 1e-12)
    above = profile.stretch(0.25 + 1e-12)
    assert above == pytest.approx(below, rel=1e-9)


def test_assemble_bdf_rejects_foreign_table():
    q1 = cc.make_cutoff("smoothstep5", 0.5)
    q2 = cc.make_cutoff("smoothstep5", 0.5)
    table = compute_phi(q1)
    with pytest.raises(ConsistencyError):
        cc.assemble_bdf(q2, table=table)


# --- the collar flow -----------------------------------------------------------

def test_flow_scaled_disk_closed_form(small_collar):
    nf, _, _ = small_collar
    grid = nf.grid
    r = grid.r_nodes
    # trajectories stay radial with |y|^2 = 1 - r
    norms2 = np.einsum("kni,kni->kn", nf.chart_points, nf.chart_points)
    assert np.allclose(norms2, (1.0 - r)[:, None], atol=1e-10)
    assert np.allclose(nf.k2, collar_k2_scaled_disk4(r)[:, None], atol=1e-10)
    assert np.allclose(nf.h[:, :, 0, 0], collar_h_scaled_disk4(r)[:, None],
                       atol=1e-8)
    assert np.allclose(nf.vnorm2, (4.0 / (1.0 - r))[:, None], atol=1e-8)
    assert nf.max_drift <= 1e-8
    assert nf.max_cross <= 1e-8


def test_flow_against_adaptive_integrator_oracle(scaled4):
    grid = cc.make_collar_grid(scaled4.manifold, 0.3, 9, (8,))
    nf = cc.flow_collar(scaled4, grid)
    for n in (0, 3):
        y0 = grid.boundary.nodes[n]
        want = integrate_flow(radial_flow_field, y0, 0.3)
        assert np.allclose(nf.chart_points[-1, n], want, atol=1e-9)


def test_flow_normal_form_round_trip():
    spec = cc.make_builtin("normal-form-constK(0.7)")
    grid = cc.make_collar_grid(spec.manifold, 0.4, 9, (8,))
    nf = cc.flow_collar(spec, grid)
    # the transverse coefficient is constant and the angular entry is carried
    # along unchanged, so the measured data reproduce the inputs exactly
    assert np.allclose(nf.k2, 0.49, atol=1e-12)
    want_h = (1.0 + grid.r_nodes / 2.0) ** 2
    assert np.allclose(nf.h[:, :, 0, 0], want_h[:, None], atol=1e-12)


def test_flow_exits_chart():
    spec = cc.make_builtin("hyperbolic-disk")
    grid = cc.make_collar_grid(spec.manifold, 1.2, 9, (8,))
    with pytest.raises(FlowExitsChartError, match="exits chart"):
        cc.flow_collar(spec, grid)


def test_flow_grid_manifold_mismatch(scaled4):
    other = cc.collar_torus(2)
    grid = cc.make_collar_grid(other, 0.3, 9, (8,))
    with pytest.raises(GridError, match="different manifold"):
        cc.flow_collar(scaled4, grid)


def test_collar_grid_validation(scaled4):
    man = scaled4.manifold
    with pytest.raises(GridError):
        cc.make_collar_grid(man, -0.1, 9, (8,))
    with pytest.raises(GridError):
        cc.make_collar_grid(man, 0.3, 3, (8,))
    with pytest.raises(GridError):
        cc.make_collar_grid(man, 0.3, 9, (3,))


# --- collar depth selection ------------------------------------------------------

def _torus_nf(g11, eps, n_r=9, n_b=12):
    spec = cc.make_metric_spec(cc.collar_torus(2), {"g11": g11, "g22": "1"},
                               bdf="r")
    grid = cc.make_collar_grid(spec.manifold, eps, n_r, (n_b,))
    return cc.flow_collar(spec, grid)


def test_choose_epsilon_dyadic_shrink():
    # squared transverse coefficient 0.9 + 0.3 r: the bound 0.95 first holds
    # on the third halving of the requested depth
    nf = _torus_nf("1/(0.9 + 0.3*r)", 1.0, n_r=33)
    assert cc.choose_epsilon(nf) == 0.125


def test_choose_epsilon_keeps_full_depth_when_safe():
    nf = _torus_nf("1/(0.5 + 0.1*r)", 0.8)
    assert cc.choose_epsilon(nf) == 0.8


def test_choose_epsilon_margin_validation():
    nf = _torus_nf("2", 0.5)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(GridError):
            cc.choose_epsilon(nf, margin=bad)


def test_borderline_fails_the_gate():
    spec = cc.make_builtin("borderline")
    grid = cc.make_collar_grid(spec.manifold, 0.05, 9, (16,))
    nf = cc.flow_collar(spec, grid)
    with pytest.raises(HypothesisViolation) as err:
        cc.choose_epsilon(nf)
    assert err.value.k2 == pytest.approx(1.0, abs=1e-12)
    assert err.value.node is not None


def test_gate_tolerance_is_strict():
    # coefficient 1 - 5e-10 sits inside the default gate band
    nf = _torus_nf("1/(1 - 5e-10)", 0.25)
    with pytest.raises(HypothesisViolation):
        cc.choose_epsilon(nf)
    # same data passes when the band is narrowed below the gap
    assert cc.choose_epsilon(nf, hypothesis_tol=1e-10) > 0.0


# --- the adjusted tensor ----------------------------------------------------------

def test_adjusted_tensor_two_assemblies_agree(small_collar):
    _, _, gfield = small_collar
    assert gfield.max_consistency <= 1e-9


def test_adjusted_tensor_positive_definite(small_collar):
    _, _, gfield = small_collar
    assert gfield.min_eig_overall > 0.0
    assert np.all(gfield.min_eig > 0.0)


def test_adjusted_tensor_boundary_values(small_collar):
    nf, profile, gfield = small_collar
    # at depth 0: stretch 1, slope 1, so the transverse entry is 1/K^2 - 1
    # = 3 and the angular entry is 16
    assert np.allclose(gfield.values[0, :, 0, 0], 3.0, atol=1e-8)
    assert np.allclose(gfield.values[0, :, 1, 1], 16.0, atol=1e-8)
    assert np.allclose(gfield.boundary_min_eig(), 3.0, atol=1e-8)


def test_adjusted_tensor_plateau_is_a_constant_multiple(small_collar):
    """Beyond half depth the tensor must be exactly the plateau constant
    squared times the interior metric in the flow frame."""
    nf, profile, gfield = small_collar
    grid = nf.grid
    r = grid.r_nodes
    on_plateau = r >= 0.5 * grid.eps
    assert on_plateau.sum() >= 3
    xc = profile.x_plateau
    for k in np.where(on_plateau)[0]:
        rr = r[k]
        frame_g = np.zeros((grid.n_b, 2, 2))
        frame_g[:, 0, 0] = nf.vnorm2[k]
        frame_g[:, 0, 1] = frame_g[:, 1, 0] = nf.cross[k, :, 0]
        frame_g[:, 1, 1] = nf.h[k, :, 0, 0]
        want = (xc / rr) ** 2 * frame_g
        assert np.allclose(gfield.values[k], want, rtol=1e-13, atol=1e-13)


def test_adjusted_tensor_needs_a_deep_enough_profile(small_collar):
    nf, _, _ = small_collar
    shallow = cc.assemble_bdf(cc.make_cutoff("smoothstep5", nf.eps / 4))
    with pytest.raises(GridError, match="shallower"):
        cc.assemble_G(nf, shallow)


def test_borderline_tensor_degenerates_at_the_touch_point():
    spec = cc.make_builtin("borderline")
    grid = cc.make_collar_grid(spec.manifold, 0.05, 9, (16,))
    nf = cc.flow_collar(spec, grid)
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", grid.eps))
    gfield = cc.assemble_G(nf, profile)
    # the boundary node with coefficient 1 contributes a zero eigenvalue
    floor = np.min(gfield.boundary_min_eig())
    assert abs(floor) <= 1e-6 * gfield.trace_scale
    # away from the touch point the tensor is honestly positive
    assert np.max(gfield.boundary_min_eig()) > 0.1
