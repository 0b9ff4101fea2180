"""Schwartzman-Fried-Sullivan section criterion on finite samples.

The hypotheses ``mu . y > 0`` for invariant measures off the link and
``rho^y(gamma) > 0`` for the link components are checked on a finite sample
family, a positive class is searched for with a linear program, and a section
candidate ``pr : M \\ L -> R/Z`` is built from a class with integer periods.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from . import dynamics
from .blowup import rotation_number
from .geometry import ContactManifold
from .measures import CohomologyClass, liouville_sample, measure_intersection

SATISFIED = "SATISFIED"
VIOLATED = "VIOLATED"
INCONCLUSIVE = "INCONCLUSIVE"
DEFAULT_MARGIN = 1e-4


class LPError(RuntimeError):
    """The LP solver did not return an optimal point."""


class PeriodError(ValueError):
    """A class period is not close to a rational number of bounded height."""

    def __init__(self, period):
        super().__init__(f"period {period!r} is not rational within tolerance")
        self.period = period


# -- criterion ---------------------------------------------------------------


@dataclass
class SectionCriterionReport:
    link: list
    y: CohomologyClass
    rotation_rows: list
    measure_rows: list
    min_measure_value: float
    verdict: str
    margin: float
    note: str = ("finite-sample evidence for the section hypotheses; a SATISFIED verdict "
                 "is not a proof over all invariant measures")

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "margin": self.margin,
                "min_measure_value": self.min_measure_value,
                "class": self.y.recipe(), "rotation_rows": self.rotation_rows,
                "measure_rows": self.measure_rows, "note": self.note,
                "link": [o.to_json() for o in self.link]}


def _verdict(rot_rows, values, margin):
    rho = [r["rho"] for r in rot_rows]
    conv = [r["converged"] for r in rot_rows]
    if (any(c and r < -margin for r, c in zip(rho, conv))
            or any(v < -margin for v in values)):
        return VIOLATED
    if all(conv) and all(r > margin for r in rho) and all(v > margin for v in values):
        return SATISFIED
    return INCONCLUSIVE


def check_criterion(M: ContactManifold, L, y: CohomologyClass, orbit_samples=(),
                    segment_samples=(), margin: float = DEFAULT_MARGIN,
                    rotation_tol: float = 1e-6) -> SectionCriterionReport:
    """Evaluate both section hypotheses on finite samples and classify.

    The class is first scaled to unit l1 coefficients, so the verdict does not
    change when ``y`` is multiplied by a positive number.
    """
    yn = y.normalized()
    rot_rows = []
    for k, (orb, frame) in enumerate(zip(L, yn.frames)):
        res = rotation_number(frame, yn.per_component[k], tol=rotation_tol)
        row = res.to_json(orbit_id=k)
        row["windows"] = [float(w) for w in res.windows]
        rot_rows.append(row)
    rows = []
    for i, mu in enumerate(orbit_samples):
        rows.append({"kind": "orbit_measure", "index": i, "atoms": len(mu),
                     "value": measure_intersection(mu, yn)})
    for i, seg in enumerate(segment_samples):
        rows.append({"kind": "segment", "index": i, "value": measure_intersection(seg, yn),
                     **seg.to_json()})
    values = [r["value"] for r in rows]
    min_val = float(min(values)) if values else math.inf
    return SectionCriterionReport(list(L), y, rot_rows, rows, min_val,
                                  _verdict(rot_rows, values, margin), margin)


# -- positive class search -------------------------------------------------


@dataclass
class LPResult:
    coefficients: np.ndarray
    t_star: float
    feasible: bool
    min_slack: float
    rows: np.ndarray
    status: str = field(default="")
    margin: float = DEFAULT_MARGIN

    @property
    def meets_margin(self) -> bool:
        return self.t_star > self.margin

    @property
    def certified(self) -> bool:
        return self.min_slack >= self.t_star - 1e-8

    def to_json(self) -> dict:
        return {"coefficients": self.coefficients.tolist(), "t_star": self.t_star,
                "feasible": self.feasible, "min_slack": self.min_slack,
                "meets_margin": self.meets_margin,
                "status": "FEASIBLE" if self.feasible else "INFEASIBLE"}


def max_min_combination(R) -> LPResult:
    """Solve ``max t`` subject to ``R w >= t`` and ``||w||_1 <= 1``.

    ``R[i, j]`` is the value of constraint row ``i`` on basis class ``j``.
    The l1 ball is written with ``w = w+ - w-``.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m, k = R.shape
    if m == 0:
        raise ValueError("need at least one constraint row")
    c = np.zeros(2 * k + 1)
    c[-1] = -1.0
    A = np.zeros((m + 1, 2 * k + 1))
    A[:m, :k] = -R
    A[:m, k:2 * k] = R
    A[:m, -1] = 1.0
    A[m, :2 * k] = 1.0
    b = np.zeros(m + 1)
    b[m] = 1.0
    bounds = [(0, None)] * (2 * k) + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise LPError(f"linear program failed: {res.message}")
    w = res.x[:k] - res.x[k:2 * k]
    t = float(res.x[-1])
    slack = float(np.min(R @ w))
    return LPResult(w, t, t > 0, slack, R, res.message)


def constraint_rows(M: ContactManifold, basis, measure_samples=(), rotation_frames=None):
    """Matrix of ``mu_i . y_j`` rows followed by ``rho^{y_j}(gamma_k)`` rows.

    Rotation numbers are linear in the class coefficients once the slope
    ``lim theta / t`` of each frame is known, so each frame is integrated once.
    """
    rows = []
    for mu in measure_samples:
        rows.append([measure_intersection(mu, y) for y in basis])
    frames = rotation_frames if rotation_frames is not None else (basis[0].frames or [])
    for k, frame in enumerate(frames):
        slope = rotation_number(frame, (0.0, 1.0)).limit
        T = frame.period
        rows.append([T / (2 * math.pi) * (y.per_component[k][0] + y.per_component[k][1] * slope)
                     for y in basis])
    return np.array(rows)


def search_positive_class(M: ContactManifold, L, basis, measure_samples=(),
                          rotation_targets=None, margin: float = DEFAULT_MARGIN):
    """Best l1-normalized combination of ``basis`` on the sampled constraints.

    Returns ``(LPResult, class)`` where ``class`` is the combined
    :class:`CohomologyClass`; ``result.feasible`` is False (INFEASIBLE)
    exactly when ``t* <= 0``.
    """
    if not basis:
        raise ValueError("empty basis")
    R = constraint_rows(M, basis, measure_samples, rotation_targets)
    res = max_min_combination(R)
    res.margin = margin
    y = res.coefficients[0] * basis[0]
    for w, b in zip(res.coefficients[1:], basis[1:]):
        y = y + w * b
    return res, y


def dump_lp(R, path=None) -> dict:
    """Plain ``rows/objective`` description of the LP for external checking."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    data = {"objective": "maximize t", "variables": ["w_%d" % j for j in range(R.shape[1])] + ["t"],
            "rows": R.tolist(), "row_sense": "sum_j rows[i][j] * w_j >= t",
            "norm_cap": {"type": "l1", "bound": 1.0}}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)
    return data


# -- integer classes and the projection pr --------------------------------------


def integerize(values, tol: float = 1e-6, max_denominator: int = 10**6):
    """Scale rational-looking values to coprime-free integers.

    Returns ``(m, ints, N)``: the least common denominator ``m``, the integers
    ``m * values`` and their gcd ``N``.
    """
    fracs = []
    for v in values:
        fr = Fraction(float(v)).limit_denominator(max_denominator)
        if abs(float(fr) - v) > tol:
            raise PeriodError(v)
        fracs.append(fr)
    m = 1
    for fr in fracs:
        m = m * fr.denominator // math.gcd(m, fr.denominator)
    ints = [int(fr * m) for fr in fracs]
    N = 0
    for i in ints:
        N = math.gcd(N, abs(i))
    if N == 0:
        raise PeriodError(0.0)
    return m, ints, N


def _great_circle(M, a, b, n):
    s = np.linspace(0.0, 1.0, n)[:, None]
    return M.project((1 - s) * a + s * b)


@dataclass
class SectionCandidate:
    """Projection ``pr(p) = (1/N) int_{p0}^{p} eta mod 1`` of an integer-period class."""

    eta: CohomologyClass
    N: int
    basepoint: np.ndarray
    M: ContactManifold = field(repr=False)
    scale: int = 1
    path_density: int = 400

    def _path(self, p, via=None):
        pts = [self.basepoint] + ([np.asarray(via, float)] if via is not None else []) + [p]
        out = [self.basepoint[None, :]]
        for a, b in zip(pts[:-1], pts[1:]):
            n = max(16, int(self.path_density * np.linalg.norm(b - a)))
            out.append(_great_circle(self.M, a, b, n)[1:])
        return np.vstack(out)

    def pr_lift(self, p, via=None) -> float:
        """Integral of ``eta / N`` along the deterministic path (not reduced mod 1)."""
        p = np.asarray(p, dtype=float)
        if np.array_equal(p, self.basepoint) and via is None:
            return 0.0
        return self.eta.path_integral(self._path(p, via)) / self.N

    def pr_eval(self, p, via=None) -> float:
        return float(self.pr_lift(p, via) % 1.0)

    def eta_X(self, points):
        return self.eta.iota_X(self.M, points)

    def unwrapped_along(self, start, samples) -> np.ndarray:
        """Unwrapped ``pr`` along a polyline starting at ``start``."""
        f = self.eta.angle_functions(samples)
        inc = np.angle(f[1:] / f[:-1]) @ self.eta.weights / (2 * math.pi * self.N)
        return self.pr_lift(start) + np.concatenate([[0.0], np.cumsum(inc)])

    def loop_degree(self, loop) -> float:
        return self.eta.loop_integral(loop) / self.N


def build_pr_map(M: ContactManifold, y: CohomologyClass, basepoint, tol: float = 1e-6) -> SectionCandidate:
    """Section candidate of a class whose periods are rational.

    The periods of the angular representative are its component weights;
    they are scaled by their least common denominator ``m`` to integers, and
    ``N`` is the gcd of the scaled periods.
    """
    if not y.has_form:
        raise ValueError("class carries no global representative form")
    if np.all(y.weights == 0):
        raise PeriodError(0.0)
    m, ints, N = integerize(y.weights, tol)
    eta = float(m) * y
    eta.weights = np.array(ints, dtype=float)
    base = M.project(np.asarray(basepoint, dtype=float))
    return SectionCandidate(eta, N, base, M, m)


def _crossing_time(times, u):
    """First time ``t > 0`` at which ``u`` reaches an integer (a start on one does not count)."""
    for i in range(1, len(u)):
        a, b = u[i - 1], u[i]
        if b == a:
            continue
        if b > a:
            k = math.floor(a) + 1
            if k <= b:
                return times[i - 1] + (k - a) / (b - a) * (times[i] - times[i - 1])
        else:
            k = math.ceil(a) - 1
            if k >= b:
                return times[i - 1] + (k - a) / (b - a) * (times[i] - times[i - 1])
    return None


def hitting_times(cand: SectionCandidate, points, level: float, t_cap: float, dt: float = 0.01,
                  tol: float = 1e-10):
    """Forward and backward times at which ``pr`` crosses ``level`` (``None`` past ``t_cap``)."""
    M = cand.M
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = int(math.ceil(t_cap / dt))
    out = []
    for sign in (1.0, -1.0):
        times = sign * np.linspace(0.0, n * dt, n + 1)
        traj = dynamics.trajectory(M, points, times, tol)
        hits = []
        for j, p in enumerate(points):
            u = cand.unwrapped_along(p, traj[:, j]) - level
            t = _crossing_time(np.abs(times), u)
            hits.append(t)
        out.append(hits)
    return out[0], out[1]


def section_diagnostics(M: ContactManifold, cand: SectionCandidate, levels, test_points,
                        t_cap: float = 10.0, tube: float = 0.05, n_eta: int = 20000,
                        seed: int = 0, dt: float = 0.01) -> dict:
    """Pointwise positivity of ``eta(X)`` and hitting times of the level sets."""
    rng = np.random.default_rng(seed)
    pts = liouville_sample(M, n_eta, rng)
    pts = pts[cand.eta.distance_to_link(pts) > tube]
    eta = cand.eta_X(pts)
    levels = [float(x) for x in np.atleast_1d(levels)]
    per_level = []
    failures = []
    for x in levels:
        fwd, bwd = hitting_times(cand, test_points, x, t_cap, dt)
        for i, (a, b) in enumerate(zip(fwd, bwd)):
            if a is None or b is None:
                failures.append({"level": x, "point": i, "direction": "forward" if a is None else "backward"})
        ok_f = [a for a in fwd if a is not None]
        ok_b = [b for b in bwd if b is not None]
        per_level.append({"level": x, "max_forward": max(ok_f) if ok_f else None,
                          "max_backward": max(ok_b) if ok_b else None,
                          "forward": fwd, "backward": bwd})
    all_t = [v for r in per_level for v in (r["max_forward"], r["max_backward"]) if v is not None]
    return {"min_eta_X": float(np.min(eta)), "n_eta_samples": int(len(eta)),
            "max_forward": max((r["max_forward"] or 0.0) for r in per_level),
            "max_backward": max((r["max_backward"] or 0.0) for r in per_level),
            "max_hitting_time": max(all_t) if all_t else None,
            "levels": per_level, "failures": failures, "t_cap": t_cap}
