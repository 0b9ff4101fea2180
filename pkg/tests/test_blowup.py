import math

import numpy as np
import pytest

from reeblab.blowup import J2, TubularFrame, build_tubular_frame, frame_checks, rotation_number
from reeblab.dynamics import build_orbits
from reeblab.measures import CohomologyClass, TorusMeasure, measure_intersection


def _wrap(angle):
    return math.atan2(math.sin(angle), math.cos(angle))


@pytest.fixture(scope="module")
def ellipsoid_frames(ellipsoid):
    b4 = math.sqrt(math.sqrt(2.0))
    orbs = build_orbits(ellipsoid, [[1, 0, 0, 0], [0, 0, b4, 0]],
                        [math.pi, math.pi * math.sqrt(2)], n_samples=128)
    return [build_tubular_frame(ellipsoid, o) for o in orbs]


def test_model_frame_rotation_rate(ellipsoid_frames):
    # the transverse plane of each axis circle turns by 2 pi (ratio of axes) per period
    a, b = 1.0, math.sqrt(2.0)
    for fr, ratio in zip(ellipsoid_frames, (a / b, b / a)):
        c = _wrap(2 * math.pi * ratio) / fr.period
        t = np.linspace(0, fr.period, 40)
        th = np.linspace(0, 2 * math.pi, 9)
        vals = fr.b_eval(t[:, None], th[None, :])
        assert np.max(np.abs(vals - c)) < 1e-6


def test_frame_checks(ellipsoid, ellipsoid_frames):
    for fr in ellipsoid_frames:
        chk = frame_checks(ellipsoid, fr)
        assert chk["closure"] < 1e-10
        assert chk["min_orientation"] > 0
        assert chk["b_period_theta"] < 1e-12
        assert fr.is_conformal()


def test_b_periodic_in_theta():
    fr = TubularFrame.from_generator(2.0, lambda t: np.stack(
        [np.stack([np.sin(t), 1 + t], -1), np.stack([0.3 * t, np.cos(t)], -1)], -2))
    t = np.linspace(0, 2, 7)
    th = np.linspace(0, 2 * math.pi, 5)
    diff = fr.b_eval(t[:, None], th[None] + 2 * math.pi) - fr.b_eval(t[:, None], th[None])
    assert np.max(np.abs(diff)) < 1e-14


def test_hyperbolic_frame_invariant_rays():
    mu, T = 0.7, 1.5
    fr = TubularFrame.from_generator(T, np.diag([mu / T, -mu / T]))
    t = np.linspace(0, T, 5)
    for th in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
        assert np.max(np.abs(fr.b_eval(t, th))) < 1e-15
    # sign pattern of -(mu/T) sin(2 theta)
    assert fr.b_eval(0.0, math.pi / 4) < 0 < fr.b_eval(0.0, 3 * math.pi / 4)
    res = rotation_number(fr, (0.0, 1.0), tol=1e-6)
    assert abs(res.rho) < 1e-6


def test_constant_rate_closed_form():
    fr = TubularFrame.from_generator(2.5, 0.4 * J2)
    res = rotation_number(fr, (0.3, -1.2))
    assert abs(res.rho - 2.5 / (2 * math.pi) * (0.3 - 1.2 * 0.4)) < 1e-9


def test_zero_class_is_zero():
    fr = TubularFrame.from_generator(1.0, 0.9 * J2)
    assert rotation_number(fr, (0.0, 0.0)).rho == 0.0


def test_linearity_in_class():
    fr = TubularFrame.from_generator(1.3, lambda t: np.broadcast_to(
        np.array([[0.1, -1.0], [0.8, -0.1]]), np.shape(t) + (2, 2)) * (1 + 0.3 * np.cos(2 * math.pi * t / 1.3))[..., None, None])
    r12 = rotation_number(fr, (0.5 + 0.25, 0.7)).rho
    r1 = rotation_number(fr, (0.5, 0.7)).rho
    r2 = rotation_number(fr, (0.25, 0.0)).rho
    assert abs(r12 - (r1 + r2)) < 1e-9


def test_initial_condition_independence():
    fr = TubularFrame.from_generator(1.0, lambda t: np.broadcast_to(
        np.array([[0.3, -2.0], [1.0, -0.3]]), np.shape(t) + (2, 2)))
    a = rotation_number(fr, (0.0, 1.0), theta0=0.0, tol=1e-9)
    b = rotation_number(fr, (0.0, 1.0), theta0=2.0, tol=1e-9)
    assert a.converged and b.converged
    assert abs(a.rho - b.rho) < 1e-9
    # elliptic constant generator: mean angular speed sqrt(det A)
    assert abs(a.rho - math.sqrt(2.0 - 0.09) / (2 * math.pi)) < 1e-9


def test_horizon_precondition():
    fr = TubularFrame.from_generator(1.0, 0.1 * J2)
    with pytest.raises(ValueError):
        rotation_number(fr, (1.0, 1.0), horizon=5.0)


def test_boundary_measure_identity(ellipsoid_frames, rng):
    for fr in ellipsoid_frames:
        for p, q in rng.uniform(-2, 2, (3, 2)):
            mu = TorusMeasure(fr)
            y = CohomologyClass.local(fr, p, q)
            rho = rotation_number(fr, (p, q)).rho
            assert abs(measure_intersection(mu, y) - 2 * math.pi / fr.period * rho) < 1e-6


def test_torus_orbit_measure_matches_area_measure(ellipsoid_frames):
    fr = ellipsoid_frames[0]
    y = CohomologyClass.local(fr, 0.2, 1.0)
    a = measure_intersection(TorusMeasure(fr), y)
    b = measure_intersection(TorusMeasure(fr, kind="orbit", theta0=1.0), y)
    assert abs(a - b) < 1e-8


def test_area_measure_rejected_when_not_invariant():
    fr = TubularFrame.from_generator(1.0, np.diag([0.5, -0.5]))
    with pytest.raises(ValueError):
        TorusMeasure(fr)
