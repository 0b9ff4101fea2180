import math

import numpy as np
import pytest
from scipy import integrate

from reeblab.geometry import ModelError, helicity, helicity_oracle, make_model, verify_contact


def ball_volume_oracle(a=1.0, b=1.0):
    """Volume of {|z1|^2/a + |z2|^2/b <= 1} by iterated quadrature in (r1, r2)."""
    val, _ = integrate.dblquad(
        lambda r2, r1: (2 * math.pi * r1) * (2 * math.pi * r2),
        0.0, math.sqrt(a),
        lambda r1: 0.0, lambda r1: math.sqrt(max(b * (1 - r1 * r1 / a), 0.0)),
        epsabs=1e-13, epsrel=1e-13)
    return val


def test_ball_oracle_matches_closed_form():
    assert ball_volume_oracle() == pytest.approx(math.pi ** 2 / 2, rel=1e-10)


@pytest.mark.parametrize("desc", ["round_sphere", {"model": "ellipsoid", "a": 1, "b": math.sqrt(2)},
                                  {"model": "ellipsoid", "a": 1, "b": 1}])
def test_verify_contact_passes(desc):
    rep = verify_contact(make_model(desc), 1000, 1e-8, seed=3)
    assert rep["pass"]
    assert rep["reeb_normalization"] <= 1e-9
    assert rep["reeb_kernel"] <= 1e-9
    assert rep["reeb_tangency"] <= 1e-9
    assert rep["min_nondegeneracy"] > 0.1
    assert rep["min_volume"] > 0


def test_lift_box_contact_axioms():
    rep = verify_contact(make_model("lift_box"), 1000, 1e-8, seed=3)
    assert rep["pass"]


def test_verify_contact_rejects_zero_samples(sphere):
    with pytest.raises(ValueError):
        verify_contact(sphere, 0, 1e-8)


@pytest.mark.parametrize("desc", [{"model": "ellipsoid", "a": 1, "b": -2},
                                  {"model": "ellipsoid", "a": 0, "b": 1}])
def test_rejects_non_positive(desc):
    with pytest.raises(ModelError, match="non-positive parameter"):
        make_model(desc)


def test_rejects_unknown_model():
    with pytest.raises(ModelError):
        make_model({"model": "torus"})


def test_round_sphere_flow_is_linear(sphere, rng):
    # z_j -> e^{2it} z_j solves the Reeb equation of the round model
    from reeblab.dynamics import flow
    x = sphere.sample_points(5, rng)
    t = 0.7
    z = (x[:, 0::2] + 1j * x[:, 1::2]) * np.exp(2j * t)
    expect = np.stack([z[:, 0].real, z[:, 0].imag, z[:, 1].real, z[:, 1].imag], axis=1)
    got = np.array([flow(sphere, p, t) for p in x])
    assert np.max(np.abs(got - expect)) < 1e-9


def test_ellipsoid_equal_axes_is_round(sphere, rng):
    E = make_model({"model": "ellipsoid", "a": 1.0, "b": 1.0})
    p = sphere.sample_points(20, rng)
    assert np.allclose(E.reeb_eval(p), sphere.reeb_eval(p), atol=1e-15)
    assert np.allclose(E.constraint_eval(p), sphere.constraint_eval(p), atol=1e-15)


def test_descriptor_round_trip(ellipsoid):
    assert make_model(ellipsoid.descriptor()).params == ellipsoid.params
    assert make_model({"model": "ellipsoid", "a": 1.0, "b": 2.0, "seed": 42}).params == {"a": 1.0, "b": 2.0}


def test_helicity_round_matches_four_ball(sphere):
    est, se = helicity(sphere, 4000, seed=1)
    oracle = 2 * ball_volume_oracle()
    assert abs(est - oracle) <= max(3 * se, 1e-12)
    assert abs(est - math.pi ** 2) < 1e-9


def test_helicity_ellipsoid_matches_four_ball(ellipsoid):
    a, b = ellipsoid.weights
    est, se = helicity(ellipsoid, 40000, seed=2)
    oracle = 2 * ball_volume_oracle(a, b)
    assert oracle == pytest.approx(helicity_oracle(ellipsoid), rel=1e-9)
    assert abs(est - oracle) < 4 * se


def test_helicity_equal_axes_agrees(sphere):
    E = make_model({"model": "ellipsoid", "a": 1.0, "b": 1.0})
    e1, s1 = helicity(sphere, 2000, 5)
    e2, s2 = helicity(E, 2000, 6)
    assert abs(e1 - e2) <= 3 * math.hypot(s1, s2) + 1e-12


def test_helicity_symmetric_in_axes():
    e1, s1 = helicity(make_model({"model": "ellipsoid", "a": 1.0, "b": 2.0}), 40000, 7)
    e2, s2 = helicity(make_model({"model": "ellipsoid", "a": 2.0, "b": 1.0}), 40000, 8)
    assert abs(e1 - e2) <= 4 * math.hypot(s1, s2)


def test_helicity_standard_error_rate():
    # the round density is constant, so the rate is checked on an ellipsoid
    E = make_model({"model": "ellipsoid", "a": 1.0, "b": 3.0})
    ses = [helicity(E, n, seed=11)[1] for n in (4000, 16000, 64000)]
    for lo, hi in zip(ses[1:], ses[:-1]):
        assert 0.4 < lo / hi < 0.6


def test_helicity_rejects_boundary():
    with pytest.raises(ModelError, match="boundary"):
        helicity(make_model("lift_box"))


def test_reeb_periods(ellipsoid):
    assert np.allclose(ellipsoid.reeb_periods(), [math.pi, math.pi * math.sqrt(2)])
