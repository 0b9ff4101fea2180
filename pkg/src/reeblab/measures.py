"""Invariant measures, cohomology classes on link complements and their pairings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .blowup import TubularFrame, build_tubular_frame
from .dynamics import DEFAULT_TOL, PeriodicOrbit, orbit_distance
from .geometry import ContactManifold, ModelError
from .seifert import LinkIntersectionError


def to_complex(points):
    p = np.asarray(points, dtype=float)
    return np.stack([p[..., 0] + 1j * p[..., 1], p[..., 2] + 1j * p[..., 3]], axis=-1)


def complex_line(orbit: PeriodicOrbit, tol: float = 1e-6) -> np.ndarray:
    """Unit vector ``v`` in C^2 with the orbit contained in the complex line ``C v``."""
    z = to_complex(orbit.samples)
    v = z[0] / np.linalg.norm(z[0])
    off = np.abs(v[0] * z[:, 1] - v[1] * z[:, 0])
    if np.max(off) > tol:
        raise ValueError("link component is not contained in a complex line")
    return v


# -- measures --------------------------------------------------------------


@dataclass
class WeightedOrbitMeasure:
    """Convex combination of period-normalized orbit measures."""

    atoms: list
    check_distinct: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.atoms = [(orb, float(w)) for orb, w in self.atoms]
        w = self.weights
        if len(w) == 0:
            raise ValueError("measure needs at least one atom")
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError("weights must lie in (0, 1]")
        if abs(np.sum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {np.sum(w)!r}, not 1")
        if self.check_distinct:
            orbs = self.orbits
            kept = dynamics.dedup_orbits(orbs)
            if len(kept) != len(orbs):
                raise ValueError("measure atoms are not pairwise distinct orbits")

    @property
    def orbits(self):
        return [o for o, _ in self.atoms]

    @property
    def weights(self):
        return np.array([w for _, w in self.atoms])

    @classmethod
    def uniform(cls, orbits, **kw):
        n = len(orbits)
        return cls([(o, 1.0 / n) for o in orbits], **kw)

    def __len__(self):
        return len(self.atoms)


def mix(mu, nu, s):
    """The measure ``(1 - s) mu + s nu`` (atoms concatenated)."""
    if not 0 < s < 1:
        raise ValueError("mixing parameter must lie in (0, 1)")
    atoms = [(o, (1 - s) * w) for o, w in mu.atoms] + [(o, s * w) for o, w in nu.atoms]
    weights = np.array([w for _, w in atoms])
    weights /= weights.sum()
    return WeightedOrbitMeasure([(o, w) for (o, _), w in zip(atoms, weights)])


@dataclass
class BirkhoffSegment:
    """A finite trajectory closed up by a short chord back to its start."""

    start: np.ndarray
    duration: float
    samples: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def chord_length(self) -> float:
        return float(np.linalg.norm(self.samples[-1] - self.samples[0]))

    def to_json(self):
        return {"start": [float(v) for v in self.start], "duration": self.duration,
                "chord_length": self.chord_length, "seed": self.seed}


def make_segment(M: ContactManifold, start, duration: float, samples_per_unit: int = 64,
                 recurrence_window: float = 0.0, tol: float = 1e-10, seed=None) -> BirkhoffSegment:
    """Integrate a trajectory segment.

    With ``recurrence_window > 0`` the duration is moved to the closest return
    to ``start`` in ``[duration, duration + recurrence_window]``.
    """
    start = np.asarray(start, dtype=float)
    if recurrence_window > 0:
        n = max(8, int(recurrence_window * samples_per_unit * 4))
        times = np.concatenate([[0.0], duration + np.linspace(0, recurrence_window, n + 1)])
        traj = dynamics.trajectory(M, start, times, tol)[1:]
        duration = float(times[1:][np.argmin(np.linalg.norm(traj - start, axis=1))])
    n = max(2, int(math.ceil(duration * samples_per_unit)))
    times = np.linspace(0.0, duration, n + 1)
    samples = dynamics.trajectory(M, start, times, tol)
    return BirkhoffSegment(start, float(duration), samples, seed)


def make_segments(M: ContactManifold, starts, duration: float, samples_per_unit: int = 64,
                  recurrence_window: float = 0.0, tol: float = 1e-10, seed=None):
    """Batched :func:`make_segment` for many starting points."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    durations = np.full(len(starts), float(duration))
    if recurrence_window > 0:
        n = max(8, int(recurrence_window * samples_per_unit * 4))
        times = np.concatenate([[0.0], duration + np.linspace(0, recurrence_window, n + 1)])
        traj = dynamics.trajectory(M, starts, times, tol)[1:]
        best = np.argmin(np.linalg.norm(traj - starts[None], axis=2), axis=0)
        durations = times[1:][best]
    n = max(2, int(math.ceil(durations.max() * samples_per_unit)))
    fr = np.linspace(0.0, 1.0, n + 1)
    traj = dynamics._flow_scaled(M, starts, durations, fr, tol)
    return [BirkhoffSegment(starts[i], float(durations[i]), traj[:, i].copy(), seed)
            for i in range(len(starts))]


@dataclass
class TorusMeasure:
    """Invariant probability measure on the blow-up torus of one link component.

    ``kind="lebesgue"`` is the normalized area measure, invariant when
    ``b`` does not depend on ``theta``; ``kind="orbit"`` is the time average
    along one solution of the torus flow over ``horizon``.
    """

    frame: TubularFrame
    component: int = 0
    kind: str = "lebesgue"
    theta0: float = 0.0
    horizon: float | None = None

    def __post_init__(self):
        if self.kind not in ("lebesgue", "orbit"):
            raise ValueError(f"unknown torus measure kind {self.kind!r}")
        if self.kind == "lebesgue" and not self.frame.is_conformal():
            raise ValueError("area measure is not invariant for this torus flow")

    def mean_b(self, n_t: int = 256, n_theta: int = 64) -> float:
        T = self.frame.period
        if self.kind == "lebesgue":
            x, w = np.polynomial.legendre.leggauss(n_t)
            t = 0.5 * T * (x + 1)
            th = np.linspace(0, 2 * math.pi, n_theta, endpoint=False)
            vals = self.frame.b_eval(t[:, None], th[None, :]).mean(axis=1)
            return float(0.5 * np.sum(w * vals))
        from ._rk import integrate
        H = self.horizon or 64 * T

        def f(t, y):
            return np.column_stack([self.frame.b_eval(t, y[:, 0]), self.frame.b_eval(t, y[:, 0])])

        end = integrate(f, np.array([[self.theta0, 0.0]]), np.array([0.0, H]),
                        rtol=1e-11, atol=1e-11)[-1, 0]
        return float(end[1] / H)


# -- cohomology classes ----------------------------------------------------


@dataclass
class CohomologyClass:
    """A class on the complement of a link of periodic orbits.

    ``per_component`` holds the ``(p_k, q_k)`` coefficients of the class on a
    tube around each component, relative to that component's frame, so that
    the class restricts to ``[p dt + q dtheta]``. When ``weights`` and
    ``lines`` are set the class also carries a global closed representative
    ``beta = sum_k weights[k] d arg(f_k) / 2 pi`` with
    ``f_k(z) = det(v_k, z)`` vanishing exactly on the ``k``-th component.
    """

    link: list
    per_component: np.ndarray
    weights: np.ndarray | None = None
    lines: np.ndarray | None = None
    frames: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.per_component = np.atleast_2d(np.asarray(self.per_component, dtype=float))
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)

    # -- construction --

    @classmethod
    def local(cls, frame: TubularFrame, p: float, q: float) -> "CohomologyClass":
        """A class on the tube around a single orbit, given by ``(p, q)``."""
        link = [frame.orbit] if frame.orbit is not None else []
        return cls(link=link, per_component=[[p, q]], frames=[frame])

    @classmethod
    def linking_dual(cls, M: ContactManifold, link, weights=None, frames=None,
                     pushoff: float = 1e-3) -> "CohomologyClass":
        """``sum_k weights[k]`` times the class dual to the ``k``-th component.

        The tube coefficients are measured, not assumed: ``q_k`` from the
        integral of ``beta`` over a small meridian and ``p_k`` from the
        integral over the frame push-off of the component.
        """
        if not M.is_closed:
            raise ModelError("linking duals need a closed sphere model")
        link = list(link)
        weights = np.ones(len(link)) if weights is None else np.asarray(weights, dtype=float)
        lines = np.array([complex_line(o) for o in link])
        frames = list(frames) if frames is not None else [build_tubular_frame(M, o) for o in link]
        y = cls(link=link, per_component=np.zeros((len(link), 2)), weights=weights,
                lines=lines, frames=frames)
        pq = []
        for orb, fr in zip(link, frames):
            step = (len(fr.times) - 1) // len(orb.samples)
            F = fr.vectors[::step][:-1]
            push = M.project(orb.samples + pushoff * F[:, :, 0])
            th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
            e = fr.vectors[0]
            mer = M.project(orb.base_point + pushoff * (np.outer(np.cos(th), e[:, 0])
                                                        + np.outer(np.sin(th), e[:, 1])))
            pq.append([y.loop_integral(push) / orb.period, y.loop_integral(mer) / (2 * math.pi)])
        y.per_component = np.array(pq)
        return y

    # -- form evaluation --

    @property
    def has_form(self) -> bool:
        return self.weights is not None and self.lines is not None

    def _require_form(self):
        if not self.has_form:
            raise ValueError("class carries no global representative form")

    def angle_functions(self, points):
        """``f_k(z) = det(v_k, z)`` for every component, shape ``(..., m)``."""
        self._require_form()
        z = to_complex(points)
        v = self.lines
        return v[:, 0] * z[..., 1, None] - v[:, 1] * z[..., 0, None]

    def windings(self, points, closed: bool = True):
        f = self.angle_functions(points)
        if closed:
            f = np.concatenate([f, f[:1]], axis=0)
        return np.sum(np.angle(f[1:] / f[:-1]), axis=0) / (2 * math.pi)

    def loop_integral(self, points) -> float:
        """Integral of the representative over a closed polyline."""
        return float(np.dot(self.weights, self.windings(points, closed=True)))

    def path_integral(self, points) -> float:
        """Integral of the representative along an open polyline."""
        return float(np.dot(self.weights, self.windings(points, closed=False)))

    def evaluate(self, points, vectors):
        """``beta_p(v)`` at ambient points and vectors."""
        f = self.angle_functions(points)
        z = to_complex(vectors)
        v = self.lines
        df = v[:, 0] * z[..., 1, None] - v[:, 1] * z[..., 0, None]
        return np.sum(self.weights * np.imag(df / f), axis=-1) / (2 * math.pi)

    def iota_X(self, M: ContactManifold, points):
        """``beta(X)`` at the given points."""
        return self.evaluate(points, M.reeb_eval(points))

    def distance_to_link(self, points):
        """Euclidean distance from points on the unit sphere scale to the complex lines."""
        f = self.angle_functions(points)
        return np.min(np.abs(f), axis=-1)

    # -- arithmetic --

    def _combine(self, other, s, t):
        if len(self.link) != len(other.link):
            raise ValueError("classes live on different links")
        w = None
        if self.has_form and other.has_form:
            w = s * self.weights + t * other.weights
        return CohomologyClass(self.link, s * self.per_component + t * other.per_component,
                               w, self.lines if w is not None else None, self.frames)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __rmul__(self, s):
        return self._combine(self, float(s), 0.0)

    def __neg__(self):
        return (-1.0) * self

    @property
    def l1_norm(self) -> float:
        if self.weights is not None:
            return float(np.sum(np.abs(self.weights)))
        return float(np.sum(np.abs(self.per_component)))

    def normalized(self) -> "CohomologyClass":
        n = self.l1_norm
        if n == 0:
            return self
        return (1.0 / n) * self

    def recipe(self) -> dict:
        out = {"per_component": self.per_component.tolist()}
        if self.has_form:
            out["form"] = {"kind": "angular", "components": [
                {"line": [v[0].real, v[0].imag, v[1].real, v[1].imag], "weight": float(w)}
                for v, w in zip(self.lines, self.weights)]}
        return out


def check_form_bounded(M: ContactManifold, y: CohomologyClass,
                       radii=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6), n_angles: int = 16) -> float:
    """Largest ``|beta(X)|`` on rings of shrinking radius around each component."""
    worst = 0.0
    th = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    for fr, orb in zip(y.frames, y.link):
        step = (len(fr.times) - 1) // len(orb.samples)
        F = fr.vectors[::step][:-1][::8]
        base = orb.samples[::8]
        for r in radii:
            off = r * (np.cos(th)[None, :, None] * F[:, None, :, 0]
                       + np.sin(th)[None, :, None] * F[:, None, :, 1])
            pts = M.project((base[:, None, :] + off).reshape(-1, M.ambient_dim))
            worst = max(worst, float(np.max(np.abs(y.iota_X(M, pts)))))
    return worst


# -- integrals ----------------------------------------------------------------


def measure_integral(mu: WeightedOrbitMeasure, f) -> float:
    """``sum_j p_j (1/T_j) int_0^{T_j} f(gamma_j(t)) dt`` by periodic trapezoid rule."""
    total = 0.0
    for orb, w in mu.atoms:
        total += w * float(np.mean(f(orb.samples)))
    return total


def birkhoff_integral(M: ContactManifold, seg: BirkhoffSegment, f) -> float:
    """Time average of ``f`` along a trajectory segment (trapezoid rule)."""
    vals = np.asarray(f(seg.samples), dtype=float)
    return float(0.5 * (vals[0] + vals[-1]) + vals[1:-1].sum()) / (len(vals) - 1)


def _check_off_link(orb_samples, y, tol):
    if not y.has_form:
        return
    d = y.distance_to_link(orb_samples)
    if np.min(d) < tol:
        raise LinkIntersectionError("orbit meets the link")


def orbit_pairing(orbit: PeriodicOrbit, y: CohomologyClass, tol: float = 1e-6) -> float:
    """``<y, gamma>``: the integral of the representative over the orbit."""
    y._require_form()
    for comp in y.link:
        if abs(comp.period - orbit.period) < 1e-6 * orbit.period and orbit_distance(comp, orbit) < 1e-4:
            raise LinkIntersectionError("orbit is a component of the link")
    _check_off_link(orbit.samples, y, tol)
    return y.loop_integral(orbit.samples)


def measure_intersection(mu, y: CohomologyClass, component: int | None = None) -> float:
    """Intersection number ``mu . y``.

    Weighted orbit measures reduce to ``sum_j p_j <y, gamma_j> / T_j``;
    Birkhoff segments use the loop closed by the chord; torus measures on a
    blown-up component use the tube coefficients, ``p + q * mean(b)``.
    """
    if isinstance(mu, WeightedOrbitMeasure):
        return float(sum(w * orbit_pairing(o, y) / o.period for o, w in mu.atoms))
    if isinstance(mu, BirkhoffSegment):
        y._require_form()
        _check_off_link(mu.samples, y, 1e-6)
        return y.loop_integral(mu.samples[:-1] if mu.chord_length == 0 else mu.samples) / mu.duration
    if isinstance(mu, TorusMeasure):
        k = mu.component if component is None else component
        p, q = y.per_component[k]
        return float(p + q * mu.mean_b())
    raise TypeError(f"unsupported measure type {type(mu).__name__}")


def iota_average(M: ContactManifold, mu: WeightedOrbitMeasure, y: CohomologyClass) -> float:
    """``int beta(X) dmu`` by quadrature of ``beta(X)`` along each orbit."""
    return float(sum(w * np.mean(y.iota_X(M, o.samples)) for o, w in mu.atoms))


# -- Liouville measure -------------------------------------------------------------


def liouville_sample(M: ContactManifold, n: int, rng) -> np.ndarray:
    """Points distributed by ``lambda ^ dlambda / vol(lambda)``.

    For the ellipsoids this is the linear image of the uniform measure on the
    unit 3-sphere.
    """
    if not M.is_closed:
        raise ModelError("Liouville probability needs a closed model")
    u = rng.standard_normal((n, 4))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    a, b = M.weights
    return u * np.sqrt(np.array([a, a, b, b]))


def liouville_integral(M: ContactManifold, f, n: int = 1_000_000, seed: int = 0,
                       chunk: int = 200_000) -> tuple[float, float]:
    """Seeded Monte-Carlo value of ``int f dLiouville`` with its standard error."""
    rng = np.random.default_rng(seed)
    s = s2 = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        v = np.asarray(f(liouville_sample(M, m, rng)), dtype=float)
        s += v.sum()
        s2 += (v * v).sum()
        done += m
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def liouville_quadrature(M: ContactManifold, f, n_u: int = 64, n_xi: int = 128) -> float:
    """Deterministic product-rule value of ``int f dLiouville``.

    On the unit 3-sphere write ``z1 = sqrt(1-u) e^{i xi1}``,
    ``z2 = sqrt(u) e^{i xi2}``; the uniform measure is then
    ``du dxi1 dxi2 / 4 pi^2`` on ``[0,1] x T^2``. Gauss-Legendre in ``u`` and
    the trapezoid rule in both angles are spectrally accurate for smooth
    integrands. Ellipsoids are handled through the linear image.
    """
    if not M.is_closed:
        raise ModelError("Liouville probability needs a closed model")
    x, w = np.polynomial.legendre.leggauss(n_u)
    u, w = 0.5 * (x + 1), 0.5 * w
    xi = 2 * math.pi * np.arange(n_xi) / n_xi
    c1, s1 = np.cos(xi)[:, None], np.sin(xi)[:, None]
    a, b = M.weights
    total = 0.0
    for uk, wk in zip(u, w):
        r1, r2 = math.sqrt(a * (1 - uk)), math.sqrt(b * uk)
        pts = np.empty((n_xi, n_xi, 4))
        pts[..., 0] = r1 * c1
        pts[..., 1] = r1 * s1
        pts[..., 2] = r2 * c1.T
        pts[..., 3] = r2 * s1.T
        total += wk * float(np.mean(f(pts.reshape(-1, 4))))
    return total


def smooth_step(s):
    """``C^infinity`` ramp: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass
class OpenSetTest:
    """Integrand ``f`` cut off to the open set ``V = {g > 0}``.

    With ``width > 0`` the cutoff is the smooth ramp ``S(g / width)``, still
    supported in ``V``; ``width = 0`` gives the sharp indicator.
    """

    g: object
    f: object
    name: str = "open_set"
    width: float = 0.1

    def cutoff(self, x):
        g = self.g(x)
        if self.width == 0:
            return (g > 0).astype(float)
        return smooth_step(g / self.width)

    def __call__(self, x):
        return self.cutoff(x) * self.f(x)


def boundary_mass(M: ContactManifold, test: OpenSetTest, deltas=(1e-1, 1e-2, 1e-3),
                  n: int = 400_000, seed: int = 0) -> list[float]:
    """Liouville mass of the shells ``{|g| < delta}`` around ``boundary V``."""
    rng = np.random.default_rng(seed)
    g = np.abs(test.g(liouville_sample(M, n, rng)))
    return [float(np.mean(g < d)) for d in deltas]


def weakstar_report(M: ContactManifold, mu_seq, test_functions, labels=None,
                    target_integrator=None) -> list[dict]:
    """Errors ``|<mu_n, f> - <Liouville, f>|`` for every measure and test function.

    ``target_integrator(f)`` returns ``(value, uncertainty)``; the default is
    the product quadrature with its change under grid doubling as uncertainty.
    """
    if target_integrator is None:
        def target_integrator(f):
            coarse = liouville_quadrature(M, f, 32, 64)
            fine = liouville_quadrature(M, f)
            return fine, abs(fine - coarse)
    targets = [target_integrator(f) for f in test_functions]
    labels = labels or [len(mu) for mu in mu_seq]
    rows = []
    for n, mu in zip(labels, mu_seq):
        for i, f in enumerate(test_functions):
            val = measure_integral(mu, f)
            rows.append({"n": n, "function": i, "value": val, "target": targets[i][0],
                         "target_se": targets[i][1], "error": abs(val - targets[i][0])})
    return rows


def max_errors(rows) -> dict:
    out = {}
    for r in rows:
        out[r["n"]] = max(out.get(r["n"], 0.0), r["error"])
    return out


# -- action-linking identity -------------------------------------------------


def action_linking_report(mu_seq, mesh, M: ContactManifold, link, labels=None,
                          volume: float | None = None, helicity_samples: int = 20000,
                          seed: int = 0) -> list[dict]:
    """Both sides of the action-linking identity on a Seifert surface.

    For every measure the row ``action_sum`` holds
    ``vol(lambda) * sum_j p_j int(gamma_j, S) / T_j``; the row
    ``surface_integral`` holds ``int_S dlambda``. Both are compared with
    ``sum_k x_k T(h_k)``.
    """
    from .geometry import helicity
    from .seifert import make_chart, orbit_surface_intersection

    mesh.validate(link)
    target = float(sum(x * link[k].period for k, x in mesh.boundary))
    if volume is None:
        volume = helicity(M, helicity_samples, seed)[0]
    chart = make_chart(M, mesh.vertices)
    labels = labels or [len(mu) for mu in mu_seq]
    rows = []
    for n, mu in zip(labels, mu_seq):
        total = 0.0
        for orb, w in mu.atoms:
            k = orbit_surface_intersection(orb, mesh, M, link=link, chart=chart)
            total += w * k / orb.period
        value = volume * total
        rows.append({"n": n, "quantity": "action_sum", "value": value, "target": target,
                     "gap": abs(value - target)})
    s = mesh.dlambda_integral()
    rows.append({"n": "", "quantity": "surface_integral", "value": s, "target": target,
                 "gap": abs(s - target)})
    rows.append({"n": "", "quantity": "volume", "value": volume, "target": volume, "gap": 0.0})
    return rows
