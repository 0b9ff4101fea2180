"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Runtimes include fixture construction. The lines are also collected in the
terminal summary of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from reeblab.blowup import J2, TubularFrame, build_tubular_frame, rotation_number
from reeblab.cli import run
from reeblab.dynamics import find_periodic_orbits, flow, transport_linearized
from reeblab.entropy import LN_CAT, CatMapSuspension, ReebSystem, entropy_estimate, separated_count
from reeblab.fixtures import (hopf_fibers, load_hopf_disk, open_set_tests, reference_fiber,
                              smooth_test_functions)
from reeblab.geometry import make_model
from reeblab.liftaxiom import build_lift, lambda0, verify_lift
from reeblab.measures import (CohomologyClass, TorusMeasure, WeightedOrbitMeasure,
                              action_linking_report, boundary_mass, liouville_sample,
                              make_segments, max_errors, measure_intersection, weakstar_report)
from reeblab.seifert import orbit_surface_intersection
from reeblab.sfs import (SATISFIED, VIOLATED, build_pr_map, check_criterion,
                         search_positive_class, section_diagnostics)

# 2 vol(B^4) = pi^2 for the unit 4-ball, see the 4-ball quadrature in test_geometry
HELICITY_ORACLE = math.pi ** 2


def _report(log, number, name, checks, elapsed, limit):
    checks = dict(checks)
    checks[f"runtime {elapsed:.1f}s < {limit:.0f}s"] = elapsed < limit
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {name} | " + "; ".join(checks)
    if failed:
        line += " | failed: " + "; ".join(failed)
    print(line)
    log.append(line)
    assert ok, line


def _sphere_fixture():
    M = make_model("round_sphere")
    h = reference_fiber(M)
    return M, h, CohomologyClass.linking_dual(M, [h])


def test_01_ellipsoid_orbit_census(acceptance_log):
    t0 = time.perf_counter()
    a, b = 1.0, math.sqrt(2.0)
    M = make_model({"model": "ellipsoid", "a": a, "b": b})
    seeds = M.sample_points(200, np.random.default_rng(2024))
    orbits = find_periodic_orbits(M, seeds, 5.0, K_max=20)
    elapsed = time.perf_counter() - t0
    # linear flow z_j -> exp(2 i t / w_j) z_j: axis circles with periods pi a, pi b
    oracle = sorted([math.pi * a, math.pi * b])
    periods = sorted(o.period for o in orbits)
    checks = {
        f"count {len(orbits)} == 2": len(orbits) == 2,
        "periods within 1e-6": len(orbits) == 2 and max(abs(p - q) for p, q in zip(periods, oracle)) < 1e-6,
        "both elliptic": all(o.orbit_type == "elliptic" for o in orbits),
        "nondegenerate up to 20": all(o.nondegenerate_up_to == 20 for o in orbits),
    }
    _report(acceptance_log, 1, "ellipsoid orbit census", checks, elapsed, 60)


def test_02_rotation_closed_form(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    errs = []
    for p, q, c, T in zip(rng.uniform(-2, 2, 10), rng.uniform(-2, 2, 10),
                          rng.uniform(-3, 3, 10), rng.uniform(0.5, 6, 10)):
        fr = TubularFrame.from_generator(T, c * J2)
        rho = rotation_number(fr, (p, q)).rho
        errs.append(abs(rho - T / (2 * math.pi) * (p + q * c)))
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 2, "rotation-number closed form",
            {f"max error {max(errs):.1e} < 1e-9": max(errs) < 1e-9}, elapsed, 1)


def test_03_action_linking(acceptance_log):
    t0 = time.perf_counter()
    M, h, _ = _sphere_fixture()
    mesh = load_hopf_disk()
    seq = [WeightedOrbitMeasure.uniform(hopf_fibers(n, M)) for n in (10, 100, 1000)]
    rows = action_linking_report(seq, mesh, M, [h], labels=[10, 100, 1000], volume=HELICITY_ORACLE)
    elapsed = time.perf_counter() - t0
    sums = [r for r in rows if r["quantity"] == "action_sum"]
    surf = next(r for r in rows if r["quantity"] == "surface_integral")
    gaps = [r["gap"] for r in sums]
    checks = {
        "target T(h) = pi": abs(sums[0]["target"] - math.pi) < 1e-12,
        "gaps non-increasing": all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])),
        f"final gap {gaps[-1]:.1e} < 1e-3": gaps[-1] < 1e-3,
        f"surface gap {surf['gap']:.1e} < 1e-3": surf["gap"] < 1e-3,
    }
    _report(acceptance_log, 3, "action-linking identity", checks, elapsed, 120)


def test_04_boundary_measure_identity(acceptance_log):
    t0 = time.perf_counter()
    M = make_model({"model": "ellipsoid", "a": 1.0, "b": math.sqrt(2.0)})
    orbits = find_periodic_orbits(M, M.sample_points(30, np.random.default_rng(4)), 5.0)
    fr = build_tubular_frame(M, orbits[0])
    mu = TorusMeasure(fr)
    rng = np.random.default_rng(12)
    errs = []
    for p, q in rng.integers(-5, 6, (5, 2)):
        y = CohomologyClass.local(fr, float(p), float(q))
        rho = rotation_number(fr, (p, q)).rho
        errs.append(abs(measure_intersection(mu, y) - 2 * math.pi / fr.period * rho))
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 4, "boundary-measure identity",
            {f"max error {max(errs):.1e} < 1e-6": max(errs) < 1e-6}, elapsed, 30)


def test_05_sfs_criterion(acceptance_log):
    t0 = time.perf_counter()
    M, h, y = _sphere_fixture()
    rng = np.random.default_rng(5)
    mus = [WeightedOrbitMeasure.uniform([f]) for f in hopf_fibers(50, M)]
    segs = make_segments(M, liouville_sample(M, 20, rng), 10 * math.pi, recurrence_window=1.0)
    rep = check_criterion(M, [h], y, mus, segs)
    neg = check_criterion(M, [h], -y, mus, segs)
    lp, _ = search_positive_class(M, [h], [y, -y], mus + segs)
    elapsed = time.perf_counter() - t0
    slack_gap = lp.t_star - lp.min_slack
    checks = {
        f"verdict {rep.verdict}": rep.verdict == SATISFIED,
        f"min mu.y {rep.min_measure_value:.6f} >= 1/pi - 1e-3": rep.min_measure_value >= 1 / math.pi - 1e-3,
        "rho > 0": rep.rotation_rows[0]["rho"] > 0,
        f"negated verdict {neg.verdict}": neg.verdict == VIOLATED,
        f"t* {lp.t_star:.4f} > 0": lp.t_star > 0,
        f"slack re-check {slack_gap:.1e} <= 1e-8": slack_gap <= 1e-8,
    }
    _report(acceptance_log, 5, "section criterion and positive-class LP", checks, elapsed, 120)


def test_06_pr_map_diagnostics(acceptance_log):
    t0 = time.perf_counter()
    M, h, y = _sphere_fixture()
    cand = build_pr_map(M, y, [0.0, 0.0, 1.0, 0.0])
    rng = np.random.default_rng(6)
    pts = liouville_sample(M, 400, rng)
    pts = pts[cand.eta.distance_to_link(pts) > 0.05][:100]
    diag = section_diagnostics(M, cand, [0.0, 1 / 3, 2 / 3], pts, t_cap=5.0, seed=6)
    via = M.project(np.array([0.2, -0.7, 0.1, 0.6]))
    gaps = []
    for p in pts[:20]:
        d = (cand.pr_eval(p) - cand.pr_eval(p, via=via)) % 1.0
        gaps.append(min(d, 1 - d))
    elapsed = time.perf_counter() - t0
    tmax = diag["max_hitting_time"]
    checks = {
        "100 test points": len(pts) == 100,
        f"min eta(X) {diag['min_eta_X']:.4f} > 0": diag["min_eta_X"] > 0,
        "every level hit both ways": not diag["failures"],
        f"max hitting time {tmax:.3f} < 4": tmax is not None and tmax < 4,
        f"path gap {max(gaps):.1e} < 1e-6": max(gaps) < 1e-6,
    }
    _report(acceptance_log, 6, "pr-map diagnostics", checks, elapsed, 120)


def test_07_lift_axiom(acceptance_log):
    t0 = time.perf_counter()
    pert = build_lift([0.01, 0.0], 0.05)
    rep = verify_lift(pert)
    trivial = build_lift([0.0, 0.0], 0.05)
    pts = np.random.default_rng(7).uniform(-1, 1, (1000, 3))
    exact = np.array_equal(trivial.lambda_prime(pts), lambda0(pts))
    K = [verify_lift(build_lift([r, 0.0], 0.05))["K_measured"]["C2"] for r in (0.001, 0.005, 0.01)]
    elapsed = time.perf_counter() - t0
    checks = {
        f"endpoint error {rep['endpoint_error']:.1e} < 1e-6": rep["endpoint_error"] < 1e-6,
        "h = 1 outside support": rep["support_ok"],
        "z0 = 0 reproduces lambda": exact,
        f"K range {min(K):.2f}..{max(K):.2f} within factor 2": max(K) <= 2 * min(K),
    }
    _report(acceptance_log, 7, "lift axiom", checks, elapsed, 30)


def test_08_entropy(acceptance_log):
    t0 = time.perf_counter()
    T_list = [x / 2 for x in range(1, 15)]
    sphere = ReebSystem(make_model("round_sphere"))
    s_cloud = sphere.sample_cloud(400, np.random.default_rng(8))
    # the sphere has diameter 2, so its scales sit above those of the unit torus
    h_sphere = entropy_estimate(sphere, T_list, [1.0, 0.8, 0.6], s_cloud, seed=8, dt=0.25).h_estimate
    cat = CatMapSuspension()
    c_cloud = cat.sample_cloud(64, np.random.default_rng(8))
    h_cat = entropy_estimate(cat, T_list, [0.4, 0.3, 0.2], c_cloud, seed=8, dt=0.25).h_estimate
    small = cat.sample_cloud(14, np.random.default_rng(18))
    small_s = sphere.sample_cloud(200, np.random.default_rng(28))
    greedy_ok = True
    for sys_, cl, cells in ((cat, small, ((1.0, 0.4), (2.0, 0.3), (3.0, 0.2))),
                            (sphere, small_s, ((2.0, 0.6), (5.0, 0.4)))):
        for T, eps in cells:
            g = separated_count(sys_, cl, T, eps, dt=0.25, seed=1)
            e = separated_count(sys_, cl, T, eps, dt=0.25, exact=True)
            greedy_ok &= g <= e
    elapsed = time.perf_counter() - t0
    rel = abs(h_cat - LN_CAT) / LN_CAT
    checks = {
        f"sphere h {h_sphere:.3f} <= 0.05": h_sphere <= 0.05,
        f"cat h {h_cat:.4f} within 10% of {LN_CAT:.4f} ({100 * rel:.1f}%)": rel < 0.10,
        "greedy <= exact": greedy_ok,
    }
    _report(acceptance_log, 8, "entropy estimator", checks, elapsed, 300)


def test_09_weak_star(acceptance_log):
    t0 = time.perf_counter()
    M = make_model("round_sphere")
    ns = [10, 100, 1000]
    seq = [WeightedOrbitMeasure.uniform(hopf_fibers(n, M)) for n in ns]
    smooth = max_errors(weakstar_report(M, seq, smooth_test_functions(), labels=ns))
    tests = open_set_tests()
    opened = max_errors(weakstar_report(M, seq, tests, labels=ns))
    masses = [boundary_mass(M, t) for t in tests]
    elapsed = time.perf_counter() - t0
    e1 = [smooth[n] for n in ns]
    e2 = [opened[n] for n in ns]
    checks = {
        "smooth errors non-increasing": all(b <= a for a, b in zip(e1, e1[1:])),
        f"smooth error {e1[-1]:.1e} < 0.05": e1[-1] < 0.05,
        "open-set errors non-increasing": all(b <= a for a, b in zip(e2, e2[1:])),
        f"open-set error {e2[-1]:.1e} < 0.05": e2[-1] < 0.05,
        "boundary shells shrink": all(m[-1] < m[0] and m[-1] < 0.01 for m in masses),
    }
    _report(acceptance_log, 9, "weak* harness", checks, elapsed, 120)


def test_10_invariant_suites(acceptance_log, tmp_path):
    t0 = time.perf_counter()
    E = make_model({"model": "ellipsoid", "a": 1.0, "b": math.sqrt(2.0)})
    orbits = find_periodic_orbits(E, E.sample_points(30, np.random.default_rng(10)), 5.0)
    dets = [abs(np.linalg.det(o.transverse_monodromy) - 1) for o in orbits]
    rng = np.random.default_rng(10)
    tol = 1e-11
    rev = max(np.linalg.norm(flow(E, flow(E, x, 10.0, tol), -10.0, tol) - x)
              for x in E.sample_points(3, rng))
    x = E.sample_points(1, rng)[0]
    y, Ds = transport_linearized(E, x, 0.8)
    _, Dt = transport_linearized(E, y, 1.3)
    _, Dst = transport_linearized(E, x, 2.1)
    cocycle = float(np.max(np.abs(Dt @ Ds - Dst)))
    M = make_model("round_sphere")
    mesh = load_hopf_disk()
    fine = mesh.refined(M)
    fibers = hopf_fibers(6, M)
    refine_ok = all(orbit_surface_intersection(f, mesh, M) == orbit_surface_intersection(f, fine, M)
                    for f in fibers)
    cfg = {"command": "model", "model": {"model": "ellipsoid", "a": 1, "b": 2}, "seed": 3,
           "params": {"n_samples": 100, "helicity_samples": 2000}}
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    same = (tmp_path / "a" / "model.json").read_bytes() == (tmp_path / "b" / "model.json").read_bytes()
    elapsed = time.perf_counter() - t0
    checks = {
        f"monodromy det gap {max(dets):.1e} <= 1e-6": len(dets) == 2 and max(dets) <= 1e-6,
        f"reversibility {rev:.1e} <= 10 tol": rev <= 10 * tol,
        f"cocycle {cocycle:.1e} < 1e-8": cocycle < 1e-8,
        "refinement invariance": refine_ok,
        "report determinism": same,
    }
    _report(acceptance_log, 10, "invariant suites", checks, elapsed, 300)
