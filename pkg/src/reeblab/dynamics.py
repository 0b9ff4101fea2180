"""Reeb flow integration, linearized transport and periodic orbits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._rk import IntegrationError, integrate
from .geometry import ContactManifold

__all__ = [
    "IntegrationError",
    "PeriodicOrbit",
    "flow",
    "trajectory",
    "transport_linearized",
    "find_periodic_orbits",
    "classify_orbit",
    "build_orbits",
    "orbit_distance",
]

DEFAULT_TOL = 1e-11
DEDUP_TOL = 1e-4
K_MAX = 20
N_SAMPLES = 256


def _rhs(M):
    def f(t, y):
        return M.reeb_eval(y)
    return f


def _rhs_variational(M, d, scale=None):
    def f(t, y):
        x = y[:, :d]
        phi = y[:, d:].reshape(-1, d, d)
        dx = M.reeb_eval(x)
        dphi = M.reeb_jacobian(x) @ phi
        out = np.concatenate([dx, dphi.reshape(len(y), d * d)], axis=1)
        if scale is not None:
            out *= scale[:, None]
        return out
    return f


def _project_head(M, d):
    def proj(y):
        y = y.copy()
        y[:, :d] = M.project(y[:, :d])
        return y
    return proj


def trajectory(M: ContactManifold, x, times, tol: float = DEFAULT_TOL):
    """Flow a point (or a batch of points) and record it at ``times``.

    ``times`` must be monotone and start at 0. Returns shape
    ``(len(times), d)`` or ``(len(times), n, d)``.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise ValueError("times must start at 0")
    return integrate(_rhs(M), x, times, rtol=tol, atol=tol, project=M.project)


def flow(M: ContactManifold, x, t: float, tol: float = DEFAULT_TOL):
    """Time-``t`` map of the Reeb flow; ``flow(M, x, 0)`` returns ``x`` unchanged.

    ``tol`` targets the endpoint error, so steps are controlled at ``tol / 10``.
    """
    x = np.asarray(x, dtype=float)
    if t == 0:
        return x.copy()
    return trajectory(M, x, [0.0, t], tol / 10)[-1]


def transport_linearized(M: ContactManifold, x, t: float, tol: float = DEFAULT_TOL):
    """Return ``(phi^t(x), D phi^t(x))`` by integrating the variational equations."""
    x = np.asarray(x, dtype=float)
    d = M.ambient_dim
    if t == 0:
        return x.copy(), np.eye(d)
    pts, mats = _transport_grid(M, x[None, :], np.array([0.0, t]), tol)
    return pts[-1, 0], mats[-1, 0]


def _transport_grid(M, x, times, tol, periods=None):
    """Batched transport; with ``periods`` the grid is in units of each period."""
    d = M.ambient_dim
    n = len(x)
    y0 = np.concatenate([x, np.tile(np.eye(d).ravel(), (n, 1))], axis=1)
    scale = None if periods is None else np.asarray(periods, dtype=float)
    ys = integrate(_rhs_variational(M, d, scale), y0, times, rtol=tol, atol=tol,
                   project=_project_head(M, d))
    return ys[..., :d], ys[..., d:].reshape(ys.shape[:2] + (d, d))


def _flow_scaled(M, x, periods, fractions, tol):
    """Flow each ``x[i]`` for ``fractions * periods[i]``; returns ``(len(fractions), n, d)``."""
    scale = np.asarray(periods, dtype=float)

    def f(t, y):
        return M.reeb_eval(y) * scale[:, None]

    return integrate(f, x, fractions, rtol=tol, atol=tol, project=M.project)


# -- periodic orbits ------------------------------------------------------


@dataclass
class PeriodicOrbit:
    """A periodic Reeb orbit with its transverse linearization."""

    base_point: np.ndarray
    period: float
    transverse_monodromy: np.ndarray
    multipliers: np.ndarray
    orbit_type: str
    nondegenerate_up_to: int
    samples: np.ndarray
    model: ContactManifold | None = field(default=None, repr=False, compare=False)

    @property
    def sample_times(self) -> np.ndarray:
        return self.period * np.arange(len(self.samples)) / len(self.samples)

    def closure_error(self, tol: float = DEFAULT_TOL) -> float:
        end = flow(self.model, self.base_point, self.period, tol)
        return float(np.linalg.norm(end - self.base_point))

    def resampled(self, n: int, tol: float = DEFAULT_TOL) -> "PeriodicOrbit":
        """Same orbit with ``n`` samples per period."""
        fr = np.arange(n + 1) / n
        traj = _flow_scaled(self.model, self.base_point[None, :], [self.period], fr, tol)
        return PeriodicOrbit(self.base_point, self.period, self.transverse_monodromy,
                             self.multipliers, self.orbit_type, self.nondegenerate_up_to,
                             traj[:-1, 0], self.model)

    def shifted(self, k: int) -> "PeriodicOrbit":
        """Same orbit with the base point moved to sample ``k``."""
        s = np.roll(self.samples, -k, axis=0)
        return PeriodicOrbit(s[0].copy(), self.period, self.transverse_monodromy,
                             self.multipliers, self.orbit_type, self.nondegenerate_up_to,
                             s, self.model)

    def to_json(self) -> dict:
        return {
            "period": float(self.period),
            "type": self.orbit_type,
            "multipliers": [[float(m.real), float(m.imag)] for m in self.multipliers],
            "base_point": [float(v) for v in self.base_point],
            "nondegenerate_up_to": int(self.nondegenerate_up_to),
            "det_monodromy": float(np.linalg.det(self.transverse_monodromy)),
        }


def symplectic_plane(M, p):
    """Basis ``(u, v)`` of the contact plane at ``p`` with ``dlambda(u, v) = 1``."""
    plane = M.contact_plane(p)
    u, v = plane[:, 0], plane[:, 1]
    return u, v / M.dlambda_eval(p, u, v)


def transverse_matrix(M, p, phi):
    """Matrix of ``phi`` restricted to the contact plane at ``p`` (``phi`` returns to ``p``)."""
    u, v = symplectic_plane(M, p)
    pu, pv = phi @ u, phi @ v
    dl = M.dlambda_eval
    return np.array([
        [dl(p, pu, v), dl(p, pv, v)],
        [dl(p, u, pu), dl(p, u, pv)],
    ])


def _orbit_type(mult, tol):
    m1, m2 = mult
    if abs(m1.imag) > tol or abs(m2.imag) > tol:
        if abs(abs(m1) - 1) <= max(tol, 1e-6) and abs(abs(m2) - 1) <= max(tol, 1e-6):
            return "elliptic"
        return "parabolic"
    lo, hi = sorted([m1.real, m2.real])
    if 0 < lo < 1 - tol and hi > 1 + tol:
        return "positive_hyperbolic"
    if lo < -1 - tol and -1 + tol < hi < 0:
        return "negative_hyperbolic"
    return "parabolic"


def _degenerate_level(mult, tol, K_max):
    for k in range(1, K_max + 1):
        roots = np.exp(2j * math.pi * np.arange(k) / k)
        if min(np.min(np.abs(m - roots)) for m in mult) <= tol:
            return k
    return None


def classify_multipliers(mult, tol: float = 1e-6, K_max: int = K_MAX):
    """``(orbit_type, nondegenerate_up_to)`` from a pair of multipliers."""
    mult = np.asarray(mult, dtype=complex)
    level = _degenerate_level(mult, tol, K_max)
    return _orbit_type(mult, tol), K_max if level is None else level - 1


def classify_orbit(M, orbit: PeriodicOrbit, tol: float = 1e-6, K_max: int = K_MAX):
    """Type and finite nondegeneracy level of an orbit from its transverse monodromy.

    The orbit counts as degenerate at level ``k`` when a multiplier lies
    within ``tol`` of a ``k``-th root of unity; ``nondegenerate_up_to`` is the
    largest ``k`` such that no level ``<= k`` is hit (``K_max`` if none is).
    """
    mult = np.linalg.eigvals(orbit.transverse_monodromy)
    return classify_multipliers(mult, tol, K_max)


def build_orbits(M, points, periods, tol=DEFAULT_TOL, n_samples=N_SAMPLES,
                 class_tol=1e-6, K_max=K_MAX):
    """Assemble :class:`PeriodicOrbit` records for known periodic points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    periods = np.atleast_1d(np.asarray(periods, dtype=float))
    if len(points) == 0:
        return []
    fr = np.arange(n_samples + 1) / n_samples
    pts, mats = _transport_grid(M, points, fr, tol, periods=periods)
    orbits = []
    for i, p in enumerate(points):
        mono = transverse_matrix(M, p, mats[-1, i])
        mult = np.linalg.eigvals(mono)
        mult = mult[np.argsort(np.abs(mult), kind="stable")]
        otype, level = classify_multipliers(mult, class_tol, K_max)
        orbits.append(PeriodicOrbit(p.copy(), float(periods[i]), mono, mult, otype, level,
                                    pts[:-1, i].copy(), M))
    return orbits


def _upsample(samples, factor):
    """Trigonometric interpolation of a closed, uniformly sampled curve."""
    n = len(samples)
    coef = np.fft.rfft(samples, axis=0)
    return np.fft.irfft(coef, n * factor, axis=0) * factor


def _polyline_distance(points, curve):
    """Distance from each point to the closed polyline through ``curve``."""
    tree = cKDTree(curve)
    _, j = tree.query(points)
    n = len(curve)
    best = np.full(len(points), np.inf)
    for shift in (-1, 0):
        a = curve[(j + shift) % n]
        b = curve[(j + shift + 1) % n]
        ab = b - a
        s = np.clip(np.sum((points - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + s[:, None] * ab), axis=1))
    return best


def orbit_distance(a: PeriodicOrbit, b: PeriodicOrbit, factor: int = 16) -> float:
    """Symmetric Hausdorff distance between two sampled orbits.

    Each curve is refined by trigonometric interpolation and treated as a
    closed polyline, so two samplings of one orbit agree to far below the raw
    sample spacing.
    """
    fa = _upsample(a.samples, factor)
    fb = _upsample(b.samples, factor)
    return float(max(np.max(_polyline_distance(a.samples, fb)),
                     np.max(_polyline_distance(b.samples, fa))))


def _coarse_gap(orbit, others_samples):
    """Smallest distance from the samples of ``orbit`` to each stacked sample set."""
    d = np.linalg.norm(others_samples[:, :, None, :] - orbit.samples[None, None, ::8, :], axis=-1)
    return d.min(axis=(1, 2))


def dedup_orbits(orbits, tol=DEDUP_TOL):
    """Drop orbits within Hausdorff distance ``tol`` of an earlier one."""
    kept = []
    stack = None
    for orb in orbits:
        dup = False
        if kept:
            spacing = 8 * float(np.max(np.linalg.norm(np.diff(orb.samples, axis=0), axis=1)))
            gaps = _coarse_gap(orb, stack)
            for j in np.nonzero(gaps <= spacing + tol)[0]:
                if (abs(kept[j].period - orb.period) <= 1e-3 * orb.period
                        and orbit_distance(kept[j], orb) < tol):
                    dup = True
                    break
        if not dup:
            kept.append(orb)
            s = orb.samples[None]
            stack = s if stack is None else np.concatenate([stack, s])
    return kept


def _newton_shoot(M, x0, T0, tol, T_min, T_max, newton_tol, max_iter=30):
    """Damped Gauss-Newton on ``phi^T(x) = x`` with a phase condition at ``x0``."""
    d = M.ambient_dim
    x = x0.copy()
    T = T0.copy()
    anchor = x0.copy()
    Xa = M.reeb_eval(anchor)
    active = np.ones(len(x), dtype=bool)
    done = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active & ~done)[0]
        if len(idx) == 0:
            break
        try:
            pts, mats = _transport_grid(M, x[idx], np.array([0.0, 1.0]), tol, periods=T[idx])
        except IntegrationError:
            active[idx] = False
            break
        end, phi = pts[-1], mats[-1]
        r = end - x[idx]
        for k, i in enumerate(idx):
            if np.linalg.norm(r[k]) < newton_tol:
                done[i] = True
                continue
            rows = [np.column_stack([phi[k] - np.eye(d), M.reeb_eval(end[k])]),
                    np.append(Xa[i], 0.0)[None, :]]
            rhs = [-r[k], [-np.dot(x[i] - anchor[i], Xa[i])]]
            if M.is_closed:
                rows.append(np.append(M.constraint_grad(x[i]), 0.0)[None, :])
                rhs.append([-M.constraint_eval(x[i])])
            A = np.vstack(rows)
            sol, *_ = np.linalg.lstsq(A, np.concatenate(rhs), rcond=1e-12)
            dx, dT = sol[:d], sol[d]
            step = np.linalg.norm(dx)
            if step > 0.2:
                dx *= 0.2 / step
            dT = float(np.clip(dT, -0.2 * T[i], 0.2 * T[i]))
            x[i] = M.project(x[i] + dx)
            T[i] += dT
            if not (T_min <= T[i] <= 1.5 * T_max):
                active[i] = False
    return x, T, done & active


def _reduce_to_primitive(M, x, T, tol, close_tol, k_max=10):
    """Replace ``T`` by ``T / k`` when the point already returns at ``T / k``."""
    T = T.copy()
    if len(x) == 0:
        return T
    best = np.ones(len(x), dtype=int)
    for k in range(2, k_max + 1):
        end = _flow_scaled(M, x, T / k, np.array([0.0, 1.0]), tol)[-1]
        ok = np.linalg.norm(end - x, axis=1) < close_tol
        best[ok] = k
    return T / best


def _candidates(M, seeds, T_max, tol, n_grid, max_candidates, return_frac):
    times = np.linspace(0.0, T_max, n_grid + 1)
    traj = trajectory(M, seeds, times, max(tol, 1e-9))
    dist = np.linalg.norm(traj - seeds[None], axis=-1)
    diam = float(np.max(dist)) or 1.0
    xs, Ts = [], []
    for i in range(len(seeds)):
        d = dist[:, i]
        inner = np.nonzero((d[1:-1] < d[:-2]) & (d[1:-1] <= d[2:]))[0] + 1
        if d[-1] < d[-2]:
            inner = np.append(inner, len(d) - 1)
        inner = inner[d[inner] < return_frac * diam]
        for j in inner[np.argsort(d[inner])][:max_candidates]:
            xs.append(seeds[i])
            Ts.append(times[j])
    return np.array(xs).reshape(-1, M.ambient_dim), np.array(Ts)


def find_periodic_orbits(M: ContactManifold, seeds, T_max: float, tol: float = DEFAULT_TOL,
                         dedup_tol: float = DEDUP_TOL, n_samples: int = N_SAMPLES,
                         K_max: int = K_MAX, n_grid: int = 400, max_candidates: int = 3,
                         return_frac: float = 0.5, threads: int = 1):
    """Locate primitive periodic orbits with period ``<= T_max`` by shooting.

    Every seed is flowed up to ``T_max``; local minima of the return distance
    become candidate ``(x, T)`` pairs that are refined by Gauss-Newton on the
    return map. Converged orbits are reduced to their primitive period,
    deduplicated by Hausdorff distance and sorted by period.
    """
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if M.is_closed:
        seeds = M.project(seeds)
    newton_tol = 1e-9
    T_min = T_max / n_grid

    def work(chunk):
        xs, Ts = _candidates(M, chunk, T_max, tol, n_grid, max_candidates, return_frac)
        if len(xs) == 0:
            return np.empty((0, M.ambient_dim)), np.empty(0)
        x, T, ok = _newton_shoot(M, xs, Ts, tol, T_min, T_max, newton_tol)
        return x[ok], T[ok]

    chunks = [c for c in np.array_split(seeds, max(1, threads)) if len(c)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    x = np.concatenate([p[0] for p in parts])
    T = np.concatenate([p[1] for p in parts])
    if len(x) == 0:
        return []
    T = _reduce_to_primitive(M, x, T, tol, close_tol=dedup_tol)
    keep = (T <= T_max + 1e-9) & (T > T_min)
    x, T = x[keep], T[keep]
    if len(x) == 0:
        return []
    order = np.argsort(T, kind="stable")
    orbits = build_orbits(M, x[order], T[order], tol, n_samples, K_max=K_max)
    orbits = dedup_orbits(orbits, dedup_tol)
    orbits.sort(key=lambda o: o.period)
    return orbits
