import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab import conductivity_zoo as zoo
from condlab.capacity_solver import (
    capacity,
    capacity_ratio_bounds,
    richardson,
    solve_dirichlet,
    vol_w_sphere,
)
from condlab.errors import NotPolarAdapted
from condlab.geometry import ChartManifold, euclidean, polar_chart
from condlab.model_space import WarpedModel, capacity_model, radial_solution, space_form_warping

from conftest import identity_field, scaled_field


def test_potential_matches_logarithm():
    grid = solve_dirichlet(euclidean(2), identity_field(2), 1.0, 2.0, 128, 128)
    exact = np.log(2.0 / grid.r) / math.log(2.0)
    assert np.abs(grid.u - exact[:, None]).max() < 1e-3
    assert grid.energy == pytest.approx(2 * math.pi / math.log(2), rel=1e-3)
    assert grid.flux == pytest.approx(2 * math.pi / math.log(2), rel=1e-2)


def test_capacity_is_linear_in_constant_scaling():
    m = euclidean(2)
    base = solve_dirichlet(m, identity_field(2), 1.0, 3.0, 32, 32)
    five = solve_dirichlet(m, scaled_field(identity_field(2), 5.0), 1.0, 3.0, 32, 32)
    assert five.energy == pytest.approx(5 * base.energy, rel=1e-12)
    assert np.allclose(five.u, base.u, atol=1e-9)


def test_ladder_converges_to_plane_capacity():
    est = capacity(euclidean(2), identity_field(2), 1.0, 2.0)
    exact = 2 * math.pi / math.log(2)
    assert est.richardson_extrapolate == pytest.approx(exact, rel=1e-5)
    assert est.observed_order == pytest.approx(2.0, abs=0.2)
    assert est.estimators_agree
    assert all(row["range_violation"] == 0.0 for row in est.ladder)


def test_warped_model_potential_matches_radial_solution():
    w = space_form_warping(-1.0)
    grid = solve_dirichlet(polar_chart(2, w), identity_field(2), 0.5, 2.0, 128, 32)
    sol = radial_solution(WarpedModel(2, w), 0.5, 2.0)
    assert np.abs(grid.u - sol(grid.r)[:, None]).max() < 1e-3
    assert grid.energy == pytest.approx(capacity_model(WarpedModel(2, w), 0.5, 2.0), rel=1e-3)


def test_radially_anisotropic_capacity():
    # 2 I + N N^T with N the unit radial field: the potential stays logarithmic and only the
    # radial eigenvalue 3 enters, so Cap = 3 * 2 pi / log(R / rho)
    def W(x):
        x = np.asarray(x, dtype=float)
        N = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return 2 * np.eye(2) + N[..., :, None] * N[..., None, :]

    est = capacity(euclidean(2), W, 1.0, 3.0, ladder=((32, 32), (64, 64), (128, 128)))
    assert est.richardson_extrapolate == pytest.approx(3 * 2 * math.pi / math.log(3.0), rel=1e-5)


def test_vol_w_sphere_values():
    assert vol_w_sphere(euclidean(2), identity_field(2), 2.0) == pytest.approx(4 * math.pi, rel=1e-12)
    for lam, alpha in ((2.0, 0.0), (3.0, 0.5), (0.5, -1.0)):
        got = vol_w_sphere(euclidean(2), zoo.w_lambda_alpha(lam, alpha).field, 1.0)
        assert got == pytest.approx(2 * math.pi * math.exp(alpha) * (lam + 1), rel=1e-10)


def test_ratio_bounds_examples():
    m = euclidean(2)
    b = capacity_ratio_bounds(m, scaled_field(identity_field(2), 3.0), 1.0, 2.0, 32, 32)
    assert b.ratio == pytest.approx(3.0, rel=1e-10)
    b = capacity_ratio_bounds(m, zoo.w_lambda_alpha(4.0, 0.0).field, 1.0, 2.0, 32, 32)
    assert b.lower == pytest.approx(2.0) and b.upper == pytest.approx(8.0) and b.holds
    b = capacity_ratio_bounds(m, zoo.radial_diagonal().field, 1.0, 2.0, 32, 32)
    assert b.lower == pytest.approx(1.0) and b.upper <= 5.0 and b.holds


@settings(max_examples=10)
@given(st.floats(0.25, 4.0), st.floats(-0.5, 0.5))
def test_maximum_principle_and_ratio_sandwich(lam, alpha):
    nc = zoo.w_lambda_alpha(lam, alpha)
    grid = solve_dirichlet(nc.manifold, nc.field, 1.0, 2.0, 16, 32)
    assert grid.range_violation() == 0.0
    assert capacity_ratio_bounds(nc.manifold, nc.field, 1.0, 2.0, 16, 16).holds


@settings(max_examples=10)
@given(st.floats(1.5, 4.0), st.floats(0.1, 2.0))
def test_capacity_decreases_with_outer_radius(R, dR):
    m = euclidean(2)
    W = zoo.w_lambda_alpha(2.0, 0.1).field
    assert solve_dirichlet(m, W, 1.0, R + dR, 16, 16).energy < solve_dirichlet(m, W, 1.0, R, 16, 16).energy


def test_richardson_recovers_second_order_limit():
    vals = [1.0 + 3.0 / n**2 for n in (16, 32, 64)]
    lim, p, err = richardson(vals)
    assert lim == pytest.approx(1.0, abs=1e-12)
    assert p == pytest.approx(2.0)
    assert richardson([2.0])[2] == math.inf


def test_export_csv(tmp_path):
    grid = solve_dirichlet(euclidean(2), identity_field(2), 1.0, 2.0, 8, 8)
    path = tmp_path / "u.csv"
    grid.export_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,theta,u"
    assert len(lines) == 1 + 9 * 8


def test_rejects_bad_input():
    m = euclidean(2)
    with pytest.raises(ValueError):
        solve_dirichlet(m, identity_field(2), 2.0, 1.0, 16, 16)
    with pytest.raises(ValueError):
        solve_dirichlet(m, identity_field(2), 1.0, 2.0, 4, 16)
    with pytest.raises(ValueError):
        solve_dirichlet(euclidean(3), identity_field(3), 1.0, 2.0, 16, 16)
    with pytest.raises(NotPolarAdapted):
        solve_dirichlet(ChartManifold(2, euclidean(2).metric), identity_field(2), 1.0, 2.0, 16, 16)
