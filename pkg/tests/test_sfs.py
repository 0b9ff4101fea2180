import itertools
import math

import numpy as np
import pytest

from reeblab.fixtures import hopf_fiber, hopf_fibers
from reeblab.measures import WeightedOrbitMeasure, make_segments
from reeblab.sfs import (INCONCLUSIVE, SATISFIED, VIOLATED, PeriodError, build_pr_map,
                         check_criterion, dump_lp, hitting_times, integerize,
                         max_min_combination, search_positive_class, section_diagnostics)


def vertex_enumeration(R):
    """Brute-force optimum of max t, R w >= t, |w|_1 <= 1 over all vertices."""
    R = np.asarray(R, dtype=float)
    m, k = R.shape
    A, b = [], []
    for signs in itertools.product((-1.0, 1.0), repeat=k):
        A.append(list(signs) + [0.0])
        b.append(1.0)
    for row in R:
        A.append(list(-row) + [1.0])
        b.append(0.0)
    A, b = np.array(A), np.array(b)
    best = None
    for idx in itertools.combinations(range(len(A)), k + 1):
        sub = A[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(idx)])
        if np.all(A @ x <= b + 1e-12) and (best is None or x[-1] > best[-1] + 1e-12):
            best = x
    return best


@pytest.fixture(scope="module")
def criterion_samples(sphere):
    mus = [WeightedOrbitMeasure.uniform([f]) for f in hopf_fibers(10, sphere)]
    rng = np.random.default_rng(9)
    segs = make_segments(sphere, sphere.sample_points(3, rng), 10 * math.pi, recurrence_window=1.0)
    return mus, segs


def test_synthetic_positive_combination():
    # y0 >= 0 with zeros exactly where y' > 0
    R = np.array([[1.0, -0.5], [1.0, -0.5], [0.0, 1.0], [0.0, 1.0]])
    oracle = vertex_enumeration(R)
    res = max_min_combination(R)
    assert res.feasible and res.certified
    assert res.t_star == pytest.approx(oracle[-1], abs=1e-9)
    assert np.allclose(res.coefficients, oracle[:2], atol=1e-9)
    assert np.allclose(res.coefficients, [0.6, 0.4], atol=1e-9)
    assert res.t_star == pytest.approx(0.4, abs=1e-9)


def test_random_instances_match_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(10):
        R = rng.normal(size=(5, 2))
        res = max_min_combination(R)
        assert res.t_star == pytest.approx(vertex_enumeration(R)[-1], abs=1e-8)
        assert res.certified


def test_symmetric_obstruction_infeasible():
    res = max_min_combination([[1.0, -2.0], [-1.0, 2.0]])
    assert not res.feasible
    assert res.t_star <= 1e-12
    assert res.to_json()["status"] == "INFEASIBLE"


def test_dump_lp(tmp_path):
    data = dump_lp([[1.0, 2.0]], tmp_path / "lp.json")
    assert data["rows"] == [[1.0, 2.0]]
    assert (tmp_path / "lp.json").exists()


def test_integerize():
    assert integerize([0.5, 1.5]) == (2, [1, 3], 1)
    assert integerize([2.0, 4.0]) == (1, [2, 4], 2)
    with pytest.raises(PeriodError):
        integerize([1 / math.pi], max_denominator=100)
    with pytest.raises(PeriodError):
        integerize([0.0])


def test_criterion_verdicts(sphere, hopf_link, hopf_dual, criterion_samples):
    mus, segs = criterion_samples
    rep = check_criterion(sphere, [hopf_link], hopf_dual, mus, segs)
    assert rep.verdict == SATISFIED
    assert rep.rotation_rows[0]["rho"] > 0
    assert check_criterion(sphere, [hopf_link], -hopf_dual, mus, segs).verdict == VIOLATED
    assert check_criterion(sphere, [hopf_link], 2.0 * hopf_dual, mus, segs).verdict == SATISFIED
    assert check_criterion(sphere, [hopf_link], 0.0 * hopf_dual, mus, segs).verdict == INCONCLUSIVE


def test_positive_class_search(sphere, hopf_link, hopf_dual, criterion_samples):
    mus, segs = criterion_samples
    res, y = search_positive_class(sphere, [hopf_link], [hopf_dual, -hopf_dual], mus + segs)
    assert res.feasible and res.meets_margin and res.certified
    assert res.t_star == pytest.approx(1 / (2 * math.pi), abs=1e-6)


def test_zero_class_rejected(sphere, hopf_dual):
    with pytest.raises(PeriodError):
        build_pr_map(sphere, 0.0 * hopf_dual, [0.0, 0.0, 1.0, 0.0])


def test_pr_path_independence(sphere, hopf_dual, rng):
    cand = build_pr_map(sphere, hopf_dual, [0.0, 0.0, 1.0, 0.0])
    for p in sphere.sample_points(5, rng):
        via = sphere.project(np.array([0.1, 0.9, -0.3, 0.2]))
        d = (cand.pr_eval(p) - cand.pr_eval(p, via=via)) % 1.0
        assert min(d, 1 - d) < 1e-6


def test_loop_degrees(sphere, hopf_dual):
    cand = build_pr_map(sphere, hopf_dual, [0.0, 0.0, 1.0, 0.0])
    fiber = hopf_fiber([0.0, 0.6, 0.8, 0.0], sphere)
    assert round(cand.loop_degree(fiber.samples)) == 1
    assert abs(cand.loop_degree(fiber.samples) - 1) < 1e-12
    th = np.linspace(0, 2 * math.pi, 200, endpoint=False)
    far = sphere.project(np.column_stack([0.1 * np.cos(th), 0.1 * np.sin(th),
                                          np.ones_like(th), np.zeros_like(th)]))
    assert round(cand.loop_degree(far)) == 0


def test_hitting_times_on_orbit(sphere, hopf_dual):
    cand = build_pr_map(sphere, hopf_dual, [0.0, 0.0, 1.0, 0.0])
    p = hopf_fiber([0.3, 0.4, 0.5, -0.7], sphere).base_point
    fwd, bwd = hitting_times(cand, [p], 0.25, t_cap=5.0)
    # eta(X) = 1/pi: every level is crossed once per period pi
    assert fwd[0] + bwd[0] <= math.pi + 0.02


def test_diagnostics_levels_consistent(sphere, hopf_dual, rng):
    cand = build_pr_map(sphere, hopf_dual, [0.0, 0.0, 1.0, 0.0])
    pts = sphere.sample_points(10, rng)
    pts = pts[cand.eta.distance_to_link(pts) > 0.05]
    diag = section_diagnostics(sphere, cand, [0.0, 1 / 3, 2 / 3], pts, t_cap=5.0, n_eta=2000)
    assert diag["min_eta_X"] > 0
    assert not diag["failures"]
    worst = [max(r["max_forward"], r["max_backward"]) for r in diag["levels"]]
    assert max(worst) <= 2 * min(worst)
