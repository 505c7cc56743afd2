"""
Tests for chiral phase recovery: the frame pipeline on exact currents of free
Majorana matter, the sign-continuity sweep and the region pipeline
"""
import logging
import math

import numpy as np
import pytest

import phase_recovery
from errors import DegenerateFrameError, JetOrderError, SignAmbiguityError, VanishingDeterminantError
from jets import Jet, directional
from phase_recovery import (FrameData, FrameExpansion, RecoveryPipeline, expand_in_frame, expand_in_frame_jet,
                            fix_signs, frame_vectors, recover_at_point, recover_majorana, scalar_p, scalars_qr,
                            solve_phase, transport_residuals, vector_w, vectors_ts)
from spinor_ops import PhysParams, apply_chiral_rotation, chiral_phase_between, reconstruct_jet_from_current
from taylor_fields import (current_field_of, current_jet, dirac_residual, majorana_plane_wave, matter_from_modes,
                           random_matter)

logger = logging.getLogger(__name__)

PARAMS = PhysParams(m=1.0, e=1.0)


# ============================================================================
# TEST DATA
# ============================================================================

PLANE_WAVE = ((0.4, -0.2, 0.3), (1.0, 0.0, 0.5, 0.0))
SECOND_WAVE = ((-0.2, 0.1, 0.35), (0.0, 1.0, 0.3, -0.2))
THREE_MODES = [
    ((0.3, 0.1, -0.2), (1.0, 0.0, 0.5, 0.0)),
    ((-0.1, 0.25, 0.15), (0.0, 1.0, 0.0, -0.4)),
    ((0.2, -0.3, 0.1), (0.3, 0.0, 1.0, 0.2)),
]
ANCHORS = np.array([
    [0.0, 0.0, 0.0, 0.0],
    [0.1, 0.2, -0.1, 0.05],
    [-0.2, 0.1, 0.3, -0.15],
    [0.05, -0.3, 0.2, 0.25],
])
POINTS = np.random.default_rng(20240601).uniform(-0.3, 0.3, size=(100, 4))
# frames and phase systems are regular at generic points
MAX_ATYPICAL = 5


def same_up_to_sign(a, b):
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b)) / np.linalg.norm(b)


def recover_region(current_at, points=POINTS):
    """(point, PointRecovery) at every point where the frame and the phase system are regular"""
    recovered = []
    for point in points:
        point = tuple(float(x) for x in point)
        try:
            recovered.append((point, recover_at_point(current_at(point), PARAMS, point=point)))
        except (DegenerateFrameError, VanishingDeterminantError) as e:
            logger.warning(f"skipping {point}: {e}")
    assert len(recovered) >= len(points) - MAX_ATYPICAL
    return recovered


def assert_region_recovered(spinors, report, truth):
    assert all(entry['status'] in ('ok', 'skipped') for entry in report['points'])
    assert report['recovered'] >= len(truth) - MAX_ATYPICAL
    good = np.flatnonzero(~np.isnan(spinors[:, 0]))
    sign = 1.0 if float(spinors[good[0]] @ truth[good[0]]) >= 0 else -1.0
    rel = np.linalg.norm(spinors[good] - sign * truth[good], axis=1) / np.linalg.norm(truth[good], axis=1)
    logger.info(f"recovered {len(good)}/{len(truth)}, worst relative error {rel.max():.3g}")
    assert rel.max() <= 1e-6


@pytest.fixture(scope='module')
def three_modes():
    return matter_from_modes(THREE_MODES, PARAMS)


@pytest.fixture(scope='module')
def region(three_modes):
    return recover_region(lambda point: current_jet(three_modes.evaluate(point, 4)))


# ============================================================================
# FRAME
# ============================================================================

def test_frame_vectors_are_spatial_and_orthonormal(three_modes):
    J = current_jet(three_modes.evaluate(tuple(ANCHORS[1]), 1))
    psi = reconstruct_jet_from_current(J)
    v, u = frame_vectors(psi)
    assert abs(v.value[0]) <= 1e-12 and abs(u.value[0]) <= 1e-12
    assert np.linalg.norm(v.value[1:]) == pytest.approx(1.0)
    assert np.linalg.norm(u.value[1:]) == pytest.approx(1.0)
    assert float(v.value[1:] @ u.value[1:]) == pytest.approx(0.0, abs=1e-12)


def test_degenerate_frame_raises():
    v = np.array([0.0, 1.0, 0.0, 0.0])
    u = np.array([0.0, 0.0, 1.0, 0.0])
    with pytest.raises(DegenerateFrameError):
        expand_in_frame(v, u, v, u, v + u)
    vj, uj = Jet.constant(v, 1), Jet.constant(u, 1)
    with pytest.raises(DegenerateFrameError):
        expand_in_frame_jet(vj, uj, vj, uj, vj + uj)


def test_jet_expansion_carries_the_value_solve(three_modes):
    point = tuple(ANCHORS[1])
    psi = reconstruct_jet_from_current(current_jet(three_modes.evaluate(point, 4)))
    v, u = frame_vectors(psi)
    q, r = scalars_qr(psi)
    w = vector_w(v, u, q, r)
    t, s = vectors_ts(w, v, u)
    a, b, checked = expand_in_frame_jet(t, s, v, u, w)
    np.testing.assert_allclose([float(x.value) for x in a], checked.a, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose([float(x.value) for x in b], checked.b, rtol=1e-9, atol=1e-12)
    assert checked.cond >= 1.0
    rec = recover_at_point(current_jet(three_modes.evaluate(point, 4)), PARAMS, point=point)
    assert rec.expansion.cond == checked.cond
    np.testing.assert_array_equal(rec.expansion.a, [float(x.value) for x in a])


def test_point_recovery_solves_the_frame_once(three_modes, monkeypatch):
    calls = []
    original = phase_recovery.expand_in_frame

    def counting(*args, **kwargs):
        calls.append(args)
        return original(*args, **kwargs)

    monkeypatch.setattr(phase_recovery, 'expand_in_frame', counting)
    point = tuple(ANCHORS[2])
    recover_at_point(current_jet(three_modes.evaluate(point, 4)), PARAMS, point=point)
    assert len(calls) == 1


def test_vanishing_determinant_raises():
    frame = FrameData(*(np.zeros(4),) * 5, q=0.0, r=0.0, p=0.0)
    expansion = FrameExpansion(np.zeros(3), np.zeros(3))
    with pytest.raises(VanishingDeterminantError):
        solve_phase(frame, expansion, 0.0, 0.0, 0.0, 0.0, PARAMS)


def test_recovery_needs_third_order_jets():
    J = current_jet(majorana_plane_wave(*PLANE_WAVE, PARAMS).evaluate((0.0,) * 4, 2))
    with pytest.raises(JetOrderError):
        recover_at_point(J, PARAMS)


# ============================================================================
# POINT RECOVERY
# ============================================================================

@pytest.mark.parametrize('modes', [[PLANE_WAVE], THREE_MODES], ids=['plane-wave', 'three-modes'])
def test_recovered_field_matches_the_matter(modes):
    matter = matter_from_modes(modes, PARAMS)
    point = tuple(ANCHORS[1])
    J = current_jet(matter.evaluate(point, 4))
    rec = recover_at_point(J, PARAMS, point=point)
    truth = matter.values(*point)
    logger.info(f"phi = {rec.solution.phi:.6f}, det = {rec.solution.det:.4g}")
    assert 0.0 <= rec.solution.phi < math.pi
    assert same_up_to_sign(rec.phi_spinor, truth) <= 1e-6
    assert rec.current_error <= 1e-10
    assert rec.dirac_residual <= 1e-6
    assert rec.solution.residual_unit <= 1e-6


def test_recovered_phase_is_the_chiral_angle_to_psi(three_modes, region):
    for point, rec in region:
        angle = chiral_phase_between(three_modes.values(*point), rec.psi, tol=1e-8)
        gap = abs(angle - rec.solution.phi)
        assert min(gap, math.pi - gap) <= 1e-6, point


def test_transport_equations_hold_for_the_true_phase(three_modes, region):
    worst = 0.0
    for point, rec in region:
        psi = reconstruct_jet_from_current(current_jet(three_modes.evaluate(point, 4)))
        assert rec.angle_jet.value == pytest.approx(rec.solution.phi)
        residuals = transport_residuals(psi, rec.angle_jet, PARAMS)
        worst = max(worst, max(abs(x) for x in residuals))
    logger.info(f"worst transport residual over {len(region)} points: {worst:.3g}")
    assert worst <= 1e-6


def test_constant_chiral_rotation_keeps_the_current_but_not_the_field(three_modes):
    angle = 0.4

    def rotated_current(point):
        return current_jet(apply_chiral_rotation(three_modes.evaluate(point, 4), angle))

    for point, rec in recover_region(rotated_current):
        truth = three_modes.values(*point)
        rotated = apply_chiral_rotation(truth, angle)
        np.testing.assert_allclose(rec.phi_spinor @ rec.phi_spinor, truth @ truth, rtol=1e-10)
        assert same_up_to_sign(rec.phi_spinor, truth) <= 1e-6, point
        assert same_up_to_sign(rec.phi_spinor, rotated) >= 0.1, point


# ============================================================================
# INVARIANCES
# ============================================================================

def test_chiral_rotation_commutes_with_the_dirac_operator_only_without_mass():
    angle = 0.4
    massless = PhysParams(m=0.0, e=1.0)
    light = random_matter(np.random.default_rng(11), massless, n_modes=3)
    heavy = matter_from_modes(THREE_MODES, PARAMS)
    for point in ANCHORS:
        point = tuple(point)
        residual = dirac_residual(apply_chiral_rotation(light.evaluate(point, 2), angle), massless)
        assert np.max(np.abs(residual.coeffs)) <= 1e-10
        # the mass term picks up exp(-i gamma5 angle) instead of exp(i gamma5 angle)
        residual = dirac_residual(apply_chiral_rotation(heavy.evaluate(point, 2), angle), PARAMS)
        expected = 2 * PARAMS.m * math.sin(angle) * np.linalg.norm(heavy.values(*point))
        assert np.linalg.norm(residual.value) == pytest.approx(expected, rel=1e-8)


def test_q_and_r_depend_on_the_spinor_scale(three_modes):
    point = tuple(ANCHORS[1])
    J = current_jet(three_modes.evaluate(point, 4))
    psi = reconstruct_jet_from_current(J)
    X = Jet.coordinates(point, psi.order)
    scale = 1 + X[1] * 0.3 - X[3] * 0.2
    v, u = frame_vectors(psi)
    q, r = scalars_qr(psi)
    q2, r2 = scalars_qr(psi * scale)
    du = float(directional(u, scale).value) / float(scale.value)
    dv = float(directional(v, scale).value) / float(scale.value)
    assert max(abs(du), abs(dv)) >= 1e-2
    assert float(q2.value) - float(q.value) == pytest.approx(du, abs=1e-12)
    assert float(r2.value) - float(r.value) == pytest.approx(-dv, abs=1e-12)
    q3, r3 = scalars_qr(psi * 2.5)
    assert float(q3.value) == pytest.approx(float(q.value), abs=1e-12)
    assert float(r3.value) == pytest.approx(float(r.value), abs=1e-12)
    # recovery starts from the canonical spinor, whose norm is fixed by J
    rec = recover_at_point(J, PARAMS, point=point)
    assert float(rec.psi @ rec.psi) == pytest.approx(float(J.value[0]), rel=1e-12)


def test_recovery_is_unique_up_to_one_sign_for_any_base_point(three_modes):
    source = current_field_of(three_modes)
    forward, _ = RecoveryPipeline(PARAMS).run(source, POINTS)
    backward, _ = RecoveryPipeline(PARAMS).run(source, POINTS[::-1])
    backward = backward[::-1]
    good = np.flatnonzero(~np.isnan(forward[:, 0]))
    np.testing.assert_array_equal(np.isnan(backward[:, 0]), np.isnan(forward[:, 0]))
    sign = 1.0 if float(forward[good[0]] @ backward[good[0]]) >= 0 else -1.0
    np.testing.assert_allclose(backward[good], sign * forward[good], atol=1e-12)


# ============================================================================
# SIGNS AND REGIONS
# ============================================================================

def test_fix_signs_follows_nearest_neighbours():
    points = np.array([[0.0, 0, 0, 0], [0.1, 0, 0, 0], [0.2, 0, 0, 0]])
    base = np.array([0.0, 1.0, 0.2, 0.0])
    spinors = np.array([-base, base + 0.01, -(base + 0.02)])
    fixed = fix_signs(points, spinors)
    assert fixed[0][1] > 0
    assert all(float(fixed[i] @ fixed[0]) > 0 for i in range(3))


def test_fix_signs_ignores_the_input_signs(three_modes):
    spinors = np.array([three_modes.values(*p) for p in POINTS])
    flips = np.random.default_rng(8).choice([-1.0, 1.0], size=len(POINTS))
    np.testing.assert_array_equal(fix_signs(POINTS, spinors * flips[:, None]), fix_signs(POINTS, spinors))


def test_fix_signs_rejects_orthogonal_neighbours():
    points = np.array([[0.0, 0, 0, 0], [0.1, 0, 0, 0]])
    spinors = np.array([[1.0, 0, 0, 0], [0.0, 1.0, 0, 0]])
    with pytest.raises(SignAmbiguityError):
        fix_signs(points, spinors)


def test_pipeline_recovers_a_region_up_to_one_sign(three_modes):
    spinors, report = RecoveryPipeline(PARAMS).run(current_field_of(three_modes), POINTS)
    assert_region_recovered(spinors, report, np.array([three_modes.values(*p) for p in POINTS]))


def test_pipeline_recovers_superposed_waves():
    both = majorana_plane_wave(*PLANE_WAVE, PARAMS).superpose(majorana_plane_wave(*SECOND_WAVE, PARAMS))
    spinors, report = RecoveryPipeline(PARAMS).run(current_field_of(both), POINTS)
    assert_region_recovered(spinors, report, np.array([both.values(*p) for p in POINTS]))


def test_pipeline_accepts_spinor_sources():
    matter = majorana_plane_wave(*PLANE_WAVE, PARAMS)
    spinors, report = recover_majorana(matter, ANCHORS[:2], PARAMS)
    assert report['recovered'] == 2
    truth = np.array([matter.values(*p) for p in ANCHORS[:2]])
    assert max(same_up_to_sign(spinors[i], truth[i]) for i in range(2)) <= 1e-6


# ============================================================================
# FREE MATTER SCALARS AND SMALL SYSTEMS
# ============================================================================

@pytest.mark.parametrize('point', [tuple(p) for p in POINTS])
def test_free_matter_has_q_zero_r_minus_m_p_zero(three_modes, point):
    phi = three_modes.evaluate(point, 2)
    v, u = frame_vectors(phi)
    q, r = scalars_qr(phi)
    p = scalar_p(q, r, v, u, PARAMS)
    assert float(q.value) == pytest.approx(0.0, abs=1e-10)
    assert float(r.value) == pytest.approx(-PARAMS.m, abs=1e-10)
    assert float(p.value) == pytest.approx(0.0, abs=1e-10)


def test_frame_vectors_ignore_the_spinor_scale():
    psi = np.array([0.3, -1.2, 0.7, 0.4])
    v, u = frame_vectors(psi)
    v3, u3 = frame_vectors(-3.0 * psi)
    np.testing.assert_allclose(v3, v, atol=1e-14)
    np.testing.assert_allclose(u3, u, atol=1e-14)


def test_expansion_of_a_frame_vector():
    v = np.array([0.0, 1.0, 0.0, 0.0])
    u = np.array([0.0, 0.0, 1.0, 0.0])
    w = np.array([0.0, 0.2, 0.1, 1.0])
    expansion = expand_in_frame(v, u, v, u, w)
    np.testing.assert_allclose(expansion.a, [1.0, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(expansion.b, [0.0, 1.0, 0.0], atol=1e-14)


def test_diagonal_phase_system():
    frame = FrameData(*(np.zeros(4),) * 5, q=0.0, r=0.0, p=0.0)
    expansion = FrameExpansion(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    m = PARAMS.m
    solution = solve_phase(frame, expansion, -m * 0.6, 0.0, m * 0.8, 0.0, PARAMS)
    assert solution.sin2phi == pytest.approx(0.6)
    assert solution.cos2phi == pytest.approx(0.8)
    assert solution.det == pytest.approx(-m ** 2)
    assert solution.phi == pytest.approx(0.5 * math.atan2(0.6, 0.8))
