"""
Regression tests for the closed-form example frame
"""
import math

import numpy as np
import pytest

from errors import OutOfDomainError, VanishingDeterminantError
from worked_example import (ORIGIN, ExampleConfig, evaluate_example, example_frame, example_vu,
                            example_vu_jet, published_values, sample_domain)


@pytest.mark.parametrize('m', [0.5, 1.0, 2.0])
def test_origin_values_match_the_published_ones(m):
    report = evaluate_example(ExampleConfig(m=m))
    failed = {name: check for name, check in report['comparison'].items() if not check['passed']}
    assert failed == {}
    assert report['det'] == pytest.approx(m ** 2 * (2 - 4 * m + 4 * m ** 2), rel=1e-12)


def test_unit_mass_example():
    report = evaluate_example(ExampleConfig(m=1.0))
    assert report['det'] == pytest.approx(2.0)
    np.testing.assert_allclose(report['w'], [0.0, 0.0, -1.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(report['t'], [0.0, 0.0, -2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(report['a'], [0.0, -2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(report['b'], [-1.0, 0.0, 0.0], atol=1e-12)
    # sin 2phi = 0, cos 2phi = 1
    assert report['sin2phi'] == pytest.approx(0.0, abs=1e-12)
    assert report['cos2phi'] == pytest.approx(1.0)
    assert min(report['phi'], math.pi - report['phi']) <= 1e-12


def test_massless_example_has_a_vanishing_determinant():
    with pytest.raises(VanishingDeterminantError):
        evaluate_example(ExampleConfig(m=0.0))


def test_published_values_are_consistent():
    for m in (0.5, 1.0, 2.0):
        values = published_values(m)
        assert values['det'] > 0
        np.testing.assert_allclose(values['v'][1:] @ values['u'][1:], 0.0)


def test_off_origin_frame_stays_spatial():
    frame = example_frame(ExampleConfig(m=1.0, probe=(0.1, -0.1, 0.05)))
    for vec in (frame.v, frame.u, frame.w, frame.t, frame.s):
        assert abs(vec[0]) <= 1e-12
    assert frame.r == -1.0


def test_frame_is_orthonormal_inside_the_domain():
    rng = np.random.default_rng(5)
    for x in sample_domain(rng, 10):
        v, u = example_vu(x)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.linalg.norm(u) == pytest.approx(1.0)
        assert float(v @ u) == pytest.approx(0.0, abs=1e-12)


def test_jets_agree_with_point_values():
    point = (0.0, 0.2, -0.1, 0.3)
    v_jet, u_jet = example_vu_jet(point, 2)
    v, u = example_vu(point[1:])
    np.testing.assert_allclose(v_jet.value, v, atol=1e-14)
    np.testing.assert_allclose(u_jet.value, u, atol=1e-14)


@pytest.mark.parametrize('probe', [(0.0, 0.8, 0.8), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 0.0)])
def test_out_of_domain_probes(probe):
    with pytest.raises(OutOfDomainError):
        ExampleConfig(m=1.0, probe=probe)


def test_probe_must_have_three_or_four_coordinates():
    with pytest.raises(ValueError):
        ExampleConfig(probe=(0.0, 0.0))
    assert ExampleConfig().probe == ORIGIN
