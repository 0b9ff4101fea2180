import itertools
import math

import numpy as np
import pytest
from scipy import sparse

from reeblab.dynamics import trajectory
from reeblab.entropy import (CatMapSuspension, ReebSystem, _adjacency, close_pairs, dT_distance,
                             entropy_estimate, exact_separated_count, greedy_separated,
                             separated_count)


def brute_force_mis(adj):
    n = adj.shape[0]
    A = adj.toarray()
    for size in range(n, 0, -1):
        for sub in itertools.combinations(range(n), size):
            if not A[np.ix_(sub, sub)].any():
                return size
    return 0


def test_dT_zero_time_and_equal_points(sphere, rng):
    x, y = sphere.sample_points(2, rng)
    assert dT_distance(sphere, x, y, 0.0, 0.1) == float(sphere.distance(x, y))
    assert dT_distance(sphere, x, x, 5.0, 0.1) == 0.0
    with pytest.raises(ValueError):
        dT_distance(sphere, x, y, 1.0, 0.0)


def test_dT_constant_along_fiber(sphere, rng):
    x = sphere.sample_points(1, rng)[0]
    y = trajectory(sphere, x, [0.0, 0.9])[-1]
    d0 = float(np.linalg.norm(x - y))
    for T in (1.0, 4.0, 10.0):
        assert dT_distance(sphere, x, y, T, 0.05) == pytest.approx(d0, abs=1e-8)


def test_huge_eps_gives_one(sphere, rng):
    cloud = sphere.sample_points(50, rng)
    assert separated_count(sphere, cloud, 2.0, 3.0, dt=0.1) == 1


def test_tiny_eps_gives_cloud_size(sphere, rng):
    cloud = sphere.sample_points(50, rng)
    assert separated_count(sphere, cloud, 0.0, 1e-6, dt=0.1) == 50


def test_exact_matches_subset_enumeration():
    rng = np.random.default_rng(2)
    for n in (6, 9, 12):
        dense = rng.random((n, n)) < 0.35
        dense = np.triu(dense, 1)
        adj = sparse.csr_matrix(dense | dense.T)
        assert exact_separated_count(adj) == brute_force_mis(adj)


def test_greedy_is_maximal_independent():
    rng = np.random.default_rng(3)
    dense = np.triu(rng.random((30, 30)) < 0.2, 1)
    adj = sparse.csr_matrix(dense | dense.T)
    chosen = greedy_separated(adj, rng.permutation(30))
    A = adj.toarray()
    assert not A[np.ix_(chosen, chosen)].any()
    others = np.setdiff1d(np.arange(30), chosen)
    assert all(A[i, chosen].any() for i in others)
    assert len(chosen) <= exact_separated_count(adj)


def test_greedy_never_exceeds_exact_on_cat_cloud():
    sys = CatMapSuspension()
    rng = np.random.default_rng(4)
    cloud = sys.sample_cloud(12, rng)
    for T, eps in ((1.0, 0.3), (2.0, 0.2), (3.0, 0.3)):
        g = separated_count(sys, cloud, T, eps, dt=0.25, seed=1)
        e = separated_count(sys, cloud, T, eps, dt=0.25, exact=True)
        assert g <= e


def test_cat_map_time_one_is_automorphism():
    sys = CatMapSuspension()
    pts = np.array([[0.1, 0.2, 0.0], [0.7, 0.05, 0.0]])
    traj = sys.trajectories(pts, np.array([0.0, 1.0]))
    expect = (pts[:, :2] @ np.array([[2, 1], [1, 1]]).T) % 1.0
    assert np.allclose(traj[-1][:, :2] % 1.0, expect, atol=1e-12)


def test_table_monotone_and_deterministic():
    sys = CatMapSuspension()
    cloud = sys.sample_cloud(16, np.random.default_rng(5))
    T_list, eps_list = [1.0, 2.0, 3.0, 4.0], [0.3, 0.2]
    a = entropy_estimate(sys, T_list, eps_list, cloud, seed=3, dt=0.25, saturation=1.0)
    b = entropy_estimate(sys, T_list, eps_list, cloud, seed=3, dt=0.25, saturation=1.0)
    assert a.table == b.table and a.h_estimate == b.h_estimate
    N = {(r["T"], r["eps"]): r["N"] for r in a.table}
    for T1, T2 in zip(T_list, T_list[1:]):
        for e in eps_list:
            assert N[(T1, e)] <= N[(T2, e)]
    for T in T_list:
        assert N[(T, 0.3)] <= N[(T, 0.2)]


def test_single_orbit_cloud_has_zero_entropy(sphere):
    x = np.array([0.6, 0.0, 0.8, 0.0])
    cloud = trajectory(sphere, x, np.linspace(0, math.pi, 41))[:-1]
    est = entropy_estimate(ReebSystem(sphere), [1.0, 2.0, 3.0, 4.0], [0.3], cloud, dt=0.1,
                           saturation=1.0)
    Ns = {r["N"] for r in est.table}
    assert len(Ns) == 1
    assert est.h_estimate == 0.0


def test_close_pairs_cover_all_close_points():
    sys = CatMapSuspension()
    cloud = sys.sample_cloud(8, np.random.default_rng(6))
    pairs, maxd = close_pairs(sys, cloud, [0.0, 1.0], 0.2, 0.25)
    d0 = sys.distance(cloud[:, None, :], cloud[None, :, :])
    iu = np.triu_indices(len(cloud), 1)
    expected = {(i, j) for i, j in zip(*iu) if d0[i, j] <= 0.2}
    found = {tuple(p) for p, m in zip(pairs.tolist(), maxd[0]) if m <= 0.2}
    assert expected == found
    adj = _adjacency(len(cloud), pairs, maxd[1] <= 0.2)
    assert adj.shape == (64, 64)


def test_fine_scale_count_saturates_the_cloud():
    # at eps = 0.1 a 64^2 cloud runs out of points before T = 8, so the
    # growth rate there cannot approach ln((3 + sqrt 5) / 2)
    sys = CatMapSuspension()
    cloud = sys.sample_cloud(64, np.random.default_rng(0))
    n6 = separated_count(sys, cloud, 6.0, 0.1, dt=0.25)
    n8 = separated_count(sys, cloud, 8.0, 0.1, dt=0.25)
    assert n8 > 0.9 * len(cloud)
    assert math.log(n8 / n6) / 2 < 0.5 * math.log((3 + math.sqrt(5)) / 2)
