"""Tubular frames around periodic orbits and rotation numbers.

Along an orbit of period ``T`` the linearized flow, written in a periodic
transverse frame ``F(t) = (e1(t), e2(t))``, is a linear ODE ``c' = A2(t) c``.
Its projectivization is the circle flow ``theta' = b(t, theta)`` with
``b(t, theta) = <i e^{i theta}, A2(t) e^{i theta}>`` on the boundary torus of
the blown-up orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._rk import integrate
from .dynamics import DEFAULT_TOL, PeriodicOrbit, _transport_grid
from .geometry import ContactManifold

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


class FrameError(RuntimeError):
    """The transported frame degenerated."""


class NotConverged(RuntimeError):
    def __init__(self, result):
        super().__init__(f"rotation number not converged (window gap {result.window_gap:.3e})")
        self.result = result


def _rot(alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


@dataclass
class TubularFrame:
    """Periodic transverse frame along an orbit with its angular field.

    ``A2`` is either sampled on ``times`` (frames built from a model orbit)
    or given by a callable (synthetic linearizations).
    """

    period: float
    times: np.ndarray | None = None
    A2_samples: np.ndarray | None = None
    vectors: np.ndarray | None = None
    points: np.ndarray | None = None
    holonomy: float = 0.0
    orbit: PeriodicOrbit | None = field(default=None, repr=False)
    A2_func: object = field(default=None, repr=False)

    def __post_init__(self):
        self._spline = None
        if self.A2_samples is not None:
            self._spline = CubicSpline(self.times, self.A2_samples, axis=0)

    @classmethod
    def from_generator(cls, period, A2):
        """Synthetic frame from ``A2(t)`` (callable or constant 2x2 matrix)."""
        if callable(A2):
            return cls(period=float(period), A2_func=A2)
        mat = np.asarray(A2, dtype=float)
        return cls(period=float(period), A2_func=lambda t: np.broadcast_to(mat, np.shape(t) + (2, 2)))

    def A2_eval(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.period)
        if self._spline is not None:
            return self._spline(t)
        return np.asarray(self.A2_func(t), dtype=float)

    def b_eval(self, t, theta):
        t, theta = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(theta, dtype=float))
        A = self.A2_eval(t)
        c, s = np.cos(theta), np.sin(theta)
        ax = A[..., 0, 0] * c + A[..., 0, 1] * s
        ay = A[..., 1, 0] * c + A[..., 1, 1] * s
        return -s * ax + c * ay

    def frame_at(self, k):
        """Frame vectors ``(d, 2)`` at grid index ``k``."""
        return self.vectors[k]

    def is_conformal(self, tol=1e-8, n_t=64) -> bool:
        """Whether ``b`` is independent of ``theta`` (uniform torus measure is invariant)."""
        t = np.linspace(0, self.period, n_t, endpoint=False)
        A = self.A2_eval(t)
        return bool(np.max(np.abs(A[:, 0, 0] - A[:, 1, 1])) <= tol
                    and np.max(np.abs(A[:, 0, 1] + A[:, 1, 0])) <= tol)

    def to_json(self):
        return {"period": self.period, "holonomy": self.holonomy}


def build_tubular_frame(M: ContactManifold, orbit: PeriodicOrbit, refine: int = 2,
                        tol: float = DEFAULT_TOL) -> TubularFrame:
    """Construct the deterministic closed frame along ``orbit``.

    The orthonormal basis of the contact plane at the base point is
    transported by the linearized flow and re-orthonormalized (QR with
    positive diagonal) at every grid time. The holonomy angle between the
    frames at ``0`` and ``T`` is then removed linearly in ``t`` so the frame
    closes up.
    """
    T = orbit.period
    n = len(orbit.samples) * refine
    fr = np.arange(n + 1) / n
    pts, mats = _transport_grid(M, orbit.base_point[None, :], fr, tol, periods=[T])
    pts, mats = pts[:, 0], mats[:, 0]
    plane = M.contact_plane(orbit.base_point)
    W = mats @ plane
    Q, R = np.linalg.qr(W)
    sign = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    if np.any(sign == 0) or np.min(np.abs(np.diagonal(R, axis1=-2, axis2=-1))) < 1e-12:
        raise FrameError("transported frame degenerated")
    E = Q * sign[:, None, :]
    rel = E[0].T @ E[-1]
    if abs(abs(np.linalg.det(rel)) - 1) > 1e-6:
        raise FrameError("frame does not return to the initial contact plane")
    delta = math.atan2(rel[1, 0], rel[0, 0])
    times = fr * T
    alpha = -delta * times / T
    rot = _rot(alpha)
    K = np.swapaxes(E, -1, -2) @ M.reeb_jacobian(pts) @ E
    A2 = np.swapaxes(rot, -1, -2) @ K @ rot - ((K[:, 1, 0] - delta / T)[:, None, None] * J2)
    F = E @ rot
    return TubularFrame(period=T, times=times, A2_samples=A2, vectors=F, points=pts,
                        holonomy=delta, orbit=orbit)


def frame_checks(M: ContactManifold, frame: TubularFrame, n_theta: int = 16) -> dict:
    """Periodicity and orientation diagnostics of a model frame."""
    F = frame.vectors
    closure = float(np.max(np.abs(F[-1] - F[0])))
    dets = []
    for p, f in zip(frame.points, F):
        dets.append(np.linalg.det(np.column_stack([M.normal(p), M.reeb_eval(p), f])))
    t = frame.times[:-1]
    th = np.linspace(0, 2 * math.pi, n_theta, endpoint=False)
    tt, hh = np.meshgrid(t, th, indexing="ij")
    b_t = float(np.max(np.abs(frame.b_eval(tt + frame.period, hh) - frame.b_eval(tt, hh))))
    b_th = float(np.max(np.abs(frame.b_eval(tt, hh + 2 * math.pi) - frame.b_eval(tt, hh))))
    return {"closure": closure, "min_orientation": float(np.min(dets)),
            "b_period_t": b_t, "b_period_theta": b_th}


# -- rotation numbers -----------------------------------------------------


@dataclass
class RotationResult:
    rho: float
    converged: bool
    window_gap: float
    limit: float
    windows: tuple
    horizon: float
    p: float
    q: float

    def to_json(self, orbit_id=None):
        return {"orbit_id": orbit_id, "p": self.p, "q": self.q, "rho": self.rho,
                "converged": self.converged, "window_gap": self.window_gap}


def period_map(frame: TubularFrame, n_theta: int = 128, tol: float = 1e-12):
    """Lifted one-period map of ``theta' = b(t, theta)`` sampled on a uniform grid.

    Returns the Fourier coefficients of the periodic displacement
    ``D(theta) = theta(T) - theta(0)``.
    """
    th0 = np.linspace(0, 2 * math.pi, n_theta, endpoint=False)

    def f(t, y):
        return frame.b_eval(t, y[:, 0])[:, None]

    end = integrate(f, th0[:, None], np.array([0.0, frame.period]), rtol=tol, atol=tol)[-1, :, 0]
    return np.fft.rfft(end - th0) / n_theta


def _eval_fourier(coef, theta):
    m = np.arange(len(coef))
    w = np.full(len(coef), 2.0)
    w[0] = 1.0
    n = 2 * (len(coef) - 1)
    if len(coef) > 1:
        w[-1] = 1.0 if n % 2 == 0 else 2.0
    return float(np.sum(w * (coef * np.exp(1j * m * theta)).real))


def _weighted_slope(th):
    """Weighted Birkhoff average of the per-period displacements ``th[k+1] - th[k]``.

    The smooth weight ``exp(-1 / (s (1 - s)))`` gives rapid convergence for
    quasi-periodic circle dynamics, where the plain average converges like ``1/n``.
    """
    d = np.diff(th)
    s = (np.arange(len(d)) + 0.5) / len(d)
    w = np.exp(-1.0 / (s * (1 - s)))
    return float(np.sum(w * d) / np.sum(w))


def rotation_number(frame: TubularFrame, class_coeffs, horizon: float | None = None,
                    tol: float = 1e-6, theta0: float = 0.0, cap_periods: int = 512,
                    n_theta: int = 128) -> RotationResult:
    """Rotation number ``(T / 2 pi) (p + q lim theta(t) / t)`` of an orbit.

    The lifted solution is advanced one period at a time with the exact
    period map. The slope is a weighted average of the per-period
    displacements over the first ``n/2`` and over all ``n`` periods; the
    horizon doubles (up to ``cap_periods`` periods) until the two resulting
    rotation numbers agree within ``tol``.
    """
    p, q = (float(c) for c in class_coeffs)
    T = frame.period
    if horizon is None:
        horizon = 16 * T
    if horizon < 10 * T - 1e-12:
        raise ValueError("horizon must be at least 10 periods")
    n = 2 ** max(2, math.ceil(math.log2(horizon / T - 1e-9)))
    coef = period_map(frame, n_theta)
    thetas = [theta0]
    while True:
        while len(thetas) <= n:
            th = thetas[-1]
            thetas.append(th + _eval_fourier(coef, th))
        th = np.array(thetas[: n + 1])
        s1 = _weighted_slope(th[: n // 2 + 1]) / T
        s2 = _weighted_slope(th) / T
        gap = T / (2 * math.pi) * abs(q) * abs(s1 - s2)
        if gap <= tol or 2 * n > cap_periods:
            break
        n *= 2
    rho = T / (2 * math.pi) * (p + q * s2)
    return RotationResult(rho=rho, converged=bool(gap <= tol), window_gap=gap, limit=s2,
                          windows=(s1, s2), horizon=n * T, p=p, q=q)
