"""
Tests for jet-evaluated fields, free Majorana plane waves and lattice jets
"""
import math

import numpy as np
import pytest

from errors import BoundaryTooCloseError, JetOrderError, ZeroAmplitudeError
from jets import Jet
from spinor_ops import PhysParams
from taylor_fields import (LatticeGrid, PlaneWaveMode, ScalarField, Stencil, VectorField, central_difference,
                           constant_field, current_conservation_residual, current_field_of, current_jet,
                           dirac_residual, dirac_time_derivatives, directional_derivative, fd_weights_on,
                           lattice_jet, majorana_plane_wave, observed_order, random_matter)

PARAMS = PhysParams(m=1.0, e=1.0)
POINT = (0.1, -0.2, 0.3, 0.05)


# ============================================================================
# TEST DATA
# ============================================================================

@pytest.fixture
def matter():
    return random_matter(np.random.default_rng(11), PARAMS, n_modes=3)


def smooth_scalar(X):
    return X[1].sin() * (X[2] * 2.0).cos() * (X[3] * 0.5).exp()


def smooth_values(x, y, z):
    return np.sin(x) * np.cos(2 * y) * np.exp(0.5 * z)


def sampled_grid(h, n=9, center=(0.2, -0.1, 0.3)):
    c = n // 2
    origin = tuple(center[a] - c * h for a in range(3))
    grid = LatticeGrid(np.zeros((n, n, n)), origin, (h, h, h))
    X, Y, Z = grid.mesh()
    grid.values = smooth_values(X, Y, Z)
    return grid, (c, c, c)


# ============================================================================
# FREE MAJORANA FIELDS
# ============================================================================

def test_plane_wave_solves_the_free_dirac_equation():
    wave = majorana_plane_wave((0.3, -0.2, 0.5), (1.0, 0.5, -0.3, 0.2), PARAMS)
    residual = dirac_residual(wave.evaluate(POINT, 3), PARAMS)
    assert np.max(np.abs(residual.coeffs)) <= 1e-10


def test_superposition_solves_the_free_dirac_equation(matter):
    residual = dirac_residual(matter.evaluate(POINT, 4), PARAMS)
    assert np.max(np.abs(residual.coeffs)) <= 1e-10


def test_current_is_conserved(matter):
    assert abs(current_conservation_residual(matter, POINT)) <= 1e-10


def test_current_of_real_field_is_null(matter):
    J = current_jet(matter.evaluate(POINT, 0)).value
    assert J[0] > 0
    assert abs(J[0] ** 2 - J[1] ** 2 - J[2] ** 2 - J[3] ** 2) <= 1e-10 * J[0] ** 2


def test_time_derivatives_rebuilt_from_hyperplane_data(matter):
    full = matter.evaluate(POINT, 4)
    rebuilt = dirac_time_derivatives(full, PARAMS, upto=4)
    np.testing.assert_allclose(rebuilt.coeffs, full.coeffs, atol=1e-10)


def test_time_derivatives_need_enough_spatial_order(matter):
    with pytest.raises(JetOrderError):
        dirac_time_derivatives(matter.evaluate(POINT, 2), PARAMS, upto=3)


def test_array_values_match_jet_derivatives(matter):
    jet = matter.evaluate(POINT, 4)
    for multi in [(0, 0, 0, 0), (1, 0, 0, 0), (1, 0, 2, 0), (0, 1, 1, 1), (2, 0, 0, 1)]:
        values = matter.values(*POINT, derivative=multi)
        np.testing.assert_allclose(values, jet.derivative(multi), atol=1e-10)


def test_annihilated_seed_raises():
    with pytest.raises(ZeroAmplitudeError):
        PlaneWaveMode.build((0.1, 0.2, 0.3), (0.0, 0.0, 0.0, 0.0), 1.0)


def test_current_field_is_flagged():
    wave = majorana_plane_wave((0.0, 0.0, 0.4), (1.0, 0.0, 0.0, 0.0), PARAMS)
    field = current_field_of(wave)
    assert field.is_current
    assert field.evaluate(POINT, 2).shape == (4,)


# ============================================================================
# FINITE DIFFERENCES
# ============================================================================

def test_fd_weights_reproduce_classic_stencils():
    np.testing.assert_allclose(fd_weights_on([-1, 0, 1], 1), [-0.5, 0.0, 0.5], atol=1e-14)
    np.testing.assert_allclose(fd_weights_on([-1, 0, 1], 2), [1.0, -2.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(fd_weights_on([-2, -1, 0, 1, 2], 1),
                               [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12], atol=1e-14)
    with pytest.raises(ValueError):
        fd_weights_on([-1, 0, 1], 3)


def test_central_stencil_radius():
    assert Stencil.central(1, 4).radius == 2
    assert Stencil.central(2, 6).radius == 3
    assert Stencil.central(4, 4).radius == 3
    with pytest.raises(ValueError):
        Stencil.central(1, 3)


def test_richardson_central_difference():
    fn = lambda p: math.sin(p[1]) * math.exp(p[0])
    point = np.array([0.2, 0.7, 0.0, 0.0])
    d = central_difference(fn, point, axis=1, h=1e-2)
    assert d == pytest.approx(math.cos(0.7) * math.exp(0.2), abs=1e-9)


def test_observed_order():
    np.testing.assert_allclose(observed_order([1e-2, 1e-2 / 16], [0.2, 0.1]), [4.0])


@pytest.mark.parametrize('accuracy', [4, 6])
def test_lattice_jet_converges_at_stencil_order(accuracy):
    errors, spacings = [], [0.1, 0.05]
    for h in spacings:
        grid, index = sampled_grid(h, n=13)
        approx = lattice_jet(grid, index, order=2, accuracy=accuracy)
        exact = ScalarField(smooth_scalar).evaluate(grid.point(index), 2)
        errors.append(float(np.max(np.abs(approx.coeffs - exact.coeffs))))
    order = observed_order(errors, spacings)[0]
    assert abs(order - accuracy) <= 0.3


def test_lattice_jet_has_no_time_coefficients():
    grid, index = sampled_grid(0.1)
    jet = lattice_jet(grid, index, order=2)
    assert jet.center == grid.point(index)
    assert jet.coefficient((1, 0, 0, 0)) == 0.0
    assert jet.coefficient((1, 1, 0, 0)) == 0.0


def test_lattice_jet_near_the_boundary_raises():
    grid, _ = sampled_grid(0.1)
    with pytest.raises(BoundaryTooCloseError):
        lattice_jet(grid, (1, 4, 4), order=2)


def test_grid_csv_round_trip(tmp_path):
    values = np.arange(24.0).reshape(3, 2, 2, 2) / 7.0
    grid = LatticeGrid(values, (0.5, -1.0, 2.0), (0.25, 0.5, 0.125), time=1.5, names=('a', 'b'))
    path = str(tmp_path / 'grid.csv')
    grid.to_csv(path)
    back = LatticeGrid.from_csv(path)
    np.testing.assert_array_equal(back.values, values)
    np.testing.assert_allclose(back.origin, grid.origin)
    np.testing.assert_allclose(back.spacing, grid.spacing)
    assert back.time == 1.5
    assert back.names == ('a', 'b')


def test_superposed_modes_solve_the_free_dirac_equation():
    first = majorana_plane_wave((0.3, -0.2, 0.5), (1.0, 0.5, -0.3, 0.2), PARAMS)
    second = majorana_plane_wave((-0.1, 0.4, 0.2), (0.0, 1.0, 0.2, -0.5), PARAMS)
    both = first.superpose(second)
    residual = dirac_residual(both.evaluate(POINT, 3), PARAMS)
    assert np.max(np.abs(residual.coeffs)) <= 1e-10
    np.testing.assert_allclose(both.values(*POINT), first.values(*POINT) + second.values(*POINT), atol=1e-14)


# ============================================================================
# DIRECTIONAL DERIVATIVES
# ============================================================================

def test_directional_derivative_of_a_coordinate():
    d = directional_derivative(ScalarField(lambda X: X[1]), constant_field(np.array([0.0, 1.0, 0.0, 0.0]),
                                                                           VectorField), POINT, order=2)
    assert d.order == 1
    assert float(d.value) == pytest.approx(1.0)
    np.testing.assert_allclose(d.coeffs[1:], 0.0, atol=1e-15)


def test_directional_derivative_matches_finite_differences():
    direction = np.array([0.3, -0.2, 0.5, 0.1])
    d = directional_derivative(ScalarField(smooth_scalar), constant_field(direction, VectorField), POINT)
    fn = lambda p: smooth_values(p[1], p[2], p[3])
    expected = sum(direction[mu] * central_difference(fn, np.array(POINT), axis=mu, h=1e-2) for mu in range(4))
    assert float(d.value) == pytest.approx(expected, abs=1e-6)


def test_directional_derivative_needs_order():
    with pytest.raises(JetOrderError):
        directional_derivative(ScalarField(smooth_scalar), constant_field(np.zeros(4), VectorField), POINT, order=0)
