"""Local contact-Hamiltonian perturbation that lifts a Reeb chord sideways.

On the box ``D x [0, 1]`` with ``lambda0 = dt + (x dy - y dx) / 2`` (Reeb
field ``d/dt``) the form ``lambda' = h lambda0`` is built so that its Reeb
flow carries ``(0, 0)`` to ``(z0, 1)`` along ``gamma(t) = (beta(t) z0, t)``,
while ``h - 1`` is supported in a cylinder of radius ``|z0| / eps`` and is
``O(eps)`` small in ``C^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._rk import integrate

EPS_STAR = 0.1
RAMP_START, RAMP_END = 0.1, 0.9


class LiftError(RuntimeError):
    """The Reeb trajectory left the box."""


def _step_derivs(s):
    """Smooth step ``S`` with ``S'`` and ``S''`` (``S = 0`` for ``s <= 0``, ``1`` for ``s >= 1``)."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    si = np.where(inside, s, 0.5)
    u = 1.0 / si - 1.0 / (1.0 - si)
    S = np.where(inside, expit(-u), (s >= 1).astype(float))
    w = 1.0 / si ** 2 + 1.0 / (1.0 - si) ** 2
    dw = -2.0 / si ** 3 + 2.0 / (1.0 - si) ** 3
    q = S * (1 - S)
    d1 = np.where(inside, q * w, 0.0)
    d2 = np.where(inside, d1 * (1 - 2 * S) * w + q * dw, 0.0)
    return S, d1, d2


def _step_d3(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    si = np.where(inside, s, 0.5)
    S, d1, d2 = _step_derivs(si)
    w = 1.0 / si ** 2 + 1.0 / (1.0 - si) ** 2
    dw = -2.0 / si ** 3 + 2.0 / (1.0 - si) ** 3
    ddw = 6.0 / si ** 4 + 6.0 / (1.0 - si) ** 4
    q = S * (1 - S)
    dq = d1 * (1 - 2 * S)
    ddq = d2 * (1 - 2 * S) - 2 * d1 ** 2
    return np.where(inside, ddq * w + 2 * dq * dw + q * ddw, 0.0)


def beta(t, order: int = 0):
    """Ramp ``beta`` (or its derivative of the given order), flat on ``[0, 0.1]`` and ``[0.9, 1]``."""
    L = RAMP_END - RAMP_START
    s = (np.asarray(t, dtype=float) - RAMP_START) / L
    if order == 3:
        return _step_d3(s) / L ** 3
    return _step_derivs(s)[order] / L ** order


@dataclass
class LiftPerturbation:
    """The function ``h = 1 + phi(z) (hat h(z, t) - 1)`` and its ingredients.

    ``hat h(z, t) = 1 + <V(t), z - beta(t) z0>`` with ``V(t) = beta'(t) i z0``,
    which gives ``hat h - 1 = beta'(t) (z0 x z)``; ``phi`` is a radial bump
    equal to 1 on the disk of radius ``2|z0|`` and vanishing outside radius
    ``0.9 |z0| / eps``.
    """

    z0: np.ndarray
    eps: float
    trivial: bool = field(init=False)

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float).reshape(2)
        self.trivial = bool(np.all(self.z0 == 0))

    @property
    def r0(self) -> float:
        return float(np.hypot(*self.z0))

    @property
    def plateau_radius(self) -> float:
        return 2 * self.r0

    @property
    def support_radius(self) -> float:
        """Radius of the open disk containing the support."""
        return self.r0 / self.eps

    @property
    def bump_outer(self) -> float:
        return 0.9 * self.r0 / self.eps

    def beta_profile(self, t):
        return beta(t)

    def gamma(self, t):
        t = np.asarray(t, dtype=float)
        b = beta(t)
        return np.stack([b * self.z0[0], b * self.z0[1], t], axis=-1)

    def V_eval(self, t):
        bp = beta(t, 1)
        return np.stack([-bp * self.z0[1], bp * self.z0[0]], axis=-1)

    def hat_h(self, p):
        p = np.asarray(p, dtype=float)
        x, y, t = p[..., 0], p[..., 1], p[..., 2]
        return 1.0 + beta(t, 1) * (self.z0[0] * y - self.z0[1] * x)

    def bump(self, z, order: int = 0):
        """``phi`` as a function of the radius (or its radial derivative)."""
        r = np.asarray(z, dtype=float)
        if r.ndim and r.shape[-1] == 2:
            r = np.hypot(r[..., 0], r[..., 1])
        width = self.bump_outer - self.plateau_radius
        s = (r - self.plateau_radius) / width
        vals = _step_derivs(s)
        if order == 0:
            return 1.0 - vals[0]
        return -vals[order] / width ** order

    def h_eval(self, p):
        p = np.asarray(p, dtype=float)
        if self.trivial:
            return np.ones(p.shape[:-1])
        return 1.0 + self.bump(p[..., :2]) * (self.hat_h(p) - 1.0)

    def h_grad(self, p):
        """Exact gradient of ``h`` in ``(x, y, t)``."""
        p = np.asarray(p, dtype=float)
        if self.trivial:
            return np.zeros(p.shape)
        x, y, t = p[..., 0], p[..., 1], p[..., 2]
        a, b = self.z0
        cross = a * y - b * x
        g = beta(t, 1) * cross
        r = np.hypot(x, y)
        rs = np.where(r > 0, r, 1.0)
        dphi = np.where(r > 0, self.bump(r, 1), 0.0)
        phi = self.bump(r)
        gx = dphi * x / rs * g + phi * beta(t, 1) * (-b)
        gy = dphi * y / rs * g + phi * beta(t, 1) * a
        gt = phi * beta(t, 2) * cross
        return np.stack([gx, gy, gt], axis=-1)

    def lambda_prime(self, p):
        """Coefficients of ``lambda' = h lambda0`` in ``(dx, dy, dt)``."""
        return self.h_eval(p)[..., None] * lambda0(p)

    def reeb_eval(self, p):
        return reeb_of_scaled(p, self.h_eval(p), self.h_grad(p))


def lambda0(p):
    p = np.asarray(p, dtype=float)
    return np.stack([-0.5 * p[..., 1], 0.5 * p[..., 0], np.ones(p.shape[:-1])], axis=-1)


def reeb_of_scaled(p, h, grad_h):
    """Reeb field of ``h lambda0``: ``(grad h x lambda0 + h d/dt) / h^2``.

    In three dimensions the Reeb field of a form with coefficient vector
    ``a`` is ``curl(a) / (a . curl a)``; for ``a = h lambda0`` the numerator
    is ``grad h x lambda0 + h e_t`` and the denominator is ``h^2``.
    """
    lam = lambda0(p)
    num = np.cross(grad_h, lam)
    num[..., 2] += h
    return num / (h * h)[..., None]


def build_lift(z0, eps: float, eps_star: float = EPS_STAR) -> LiftPerturbation:
    """Perturbation moving the Reeb chord from ``(0, 0)`` to ``(z0, 1)``.

    Requires ``|z0| < eps < eps_star``; ``z0 = 0`` gives ``h = 1``.
    """
    z0 = np.asarray(z0, dtype=float).reshape(2)
    if not 0 < eps < eps_star:
        raise ValueError(f"eps must lie in (0, {eps_star})")
    r0 = float(np.hypot(*z0))
    if r0 >= eps:
        raise ValueError("need |z0| < eps")
    return LiftPerturbation(z0, float(eps))


def contact_hamiltonian_field(h, grad_h):
    """``X = h R + Y`` with ``i_Y lambda0 = 0`` and ``i_Y dlambda0 = dh - (R.h) lambda0``.

    ``h`` and ``grad_h`` are callables on points ``(..., 3)``. Writing
    ``dlambda0 = dx ^ dy`` the planar part of ``Y`` solves a 2x2 system, and
    its ``t`` component follows from ``lambda0(Y) = 0``.
    """
    def X(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        hx, hy, ht = np.moveaxis(grad_h(p), -1, 0)
        Yx = hy - 0.5 * x * ht
        Yy = -(hx + 0.5 * y * ht)
        Yt = -0.5 * (x * Yy - y * Yx)
        return np.stack([Yx, Yy, Yt + h(p)], axis=-1)
    return X


def hamiltonian_field(pert: LiftPerturbation):
    return contact_hamiltonian_field(pert.h_eval, pert.h_grad)


def reeb_endpoint(pert: LiftPerturbation, tol: float = 1e-12):
    """Follow the Reeb field of ``lambda'`` from ``(0, 0, 0)`` until ``t = 1``.

    The ``t`` component of the field is positive in the box, so ``t`` serves
    as the integration variable.
    """
    R = pert.support_radius if not pert.trivial else 1.0

    def f(t, z):
        p = np.concatenate([z, np.full((len(z), 1), t)], axis=1)
        v = pert.reeb_eval(p)
        return v[:, :2] / v[:, 2:3]

    ts = np.linspace(0.0, 1.0, 11)
    traj = integrate(f, np.zeros((1, 2)), ts, rtol=tol, atol=tol)[:, 0]
    if np.any(np.hypot(traj[:, 0], traj[:, 1]) >= max(R, 1e-300)) and not pert.trivial:
        raise LiftError("Reeb trajectory left the support cylinder")
    return np.array([traj[-1, 0], traj[-1, 1], 1.0])


def _fd_derivatives(F, pts, hs):
    """All partial derivatives of order <= 2 by 5-point central differences.

    Returns a list of arrays ``(n, m)`` for the values, the three first and the
    six second derivatives of the vector function ``F``.
    """
    w1 = np.array([1, -8, 0, 8, -1]) / 12.0
    w2 = np.array([-1, 16, -30, 16, -1]) / 12.0
    offs = np.arange(-2, 3)
    out = [F(pts)]
    for i in range(3):
        e = np.zeros(3)
        e[i] = hs[i]
        vals = [F(pts + k * e) for k in offs]
        out.append(sum(w * v for w, v in zip(w1, vals)) / hs[i])
        out.append(sum(w * v for w, v in zip(w2, vals)) / hs[i] ** 2)
    for i in range(3):
        for j in range(i + 1, 3):
            ei, ej = np.zeros(3), np.zeros(3)
            ei[i], ej[j] = hs[i], hs[j]
            acc = 0.0
            for a, wa in zip(offs, w1):
                for b, wb in zip(offs, w1):
                    if wa == 0 or wb == 0:
                        continue
                    acc = acc + wa * wb * F(pts + a * ei + b * ej)
            out.append(acc / (hs[i] * hs[j]))
    return out


def lift_norms(pert: LiftPerturbation, n_grid: int = 41, margin: float = 1.05) -> dict:
    """Grid ``C^0``, ``C^1``, ``C^2`` norms of ``lambda' - lambda0`` on the support box."""
    if pert.trivial:
        return {"C0": 0.0, "C1": 0.0, "C2": 0.0}
    R = margin * pert.support_radius
    ax = np.linspace(-R, R, n_grid)
    at = np.linspace(0.0, 1.0, n_grid)
    X, Y, T = np.meshgrid(ax, ax, at, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), T.ravel()], axis=1)
    hs = (ax[1] - ax[0], ax[1] - ax[0], at[1] - at[0])

    def F(p):
        return (pert.h_eval(p) - 1.0)[:, None] * lambda0(p)

    d = _fd_derivatives(F, pts, hs)
    c0 = float(np.max(np.abs(d[0])))
    first = [d[1], d[3], d[5]]
    second = [d[2], d[4], d[6]] + d[7:]
    c1 = max(c0, max(float(np.max(np.abs(a))) for a in first))
    c2 = max(c1, max(float(np.max(np.abs(a))) for a in second))
    return {"C0": c0, "C1": c1, "C2": c2}


def support_check(pert: LiftPerturbation, n: int = 41) -> bool:
    """``h - 1`` vanishes exactly outside the support cylinder and near ``t = 0, 1``."""
    if pert.trivial:
        return True
    R = pert.support_radius
    ax = np.linspace(-3 * R, 3 * R, n)
    at = np.linspace(-0.5, 1.5, n)
    X, Y, T = np.meshgrid(ax, ax, at, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), T.ravel()], axis=1)
    outside = (np.hypot(pts[:, 0], pts[:, 1]) >= R) | (pts[:, 2] <= RAMP_START) | (pts[:, 2] >= RAMP_END)
    return bool(np.all(pert.h_eval(pts[outside]) == 1.0))


def verify_lift(pert: LiftPerturbation, tol: float = 1e-12, n_grid: int = 41) -> dict:
    """Endpoint error, support containment and measured ``C^k`` constants."""
    end = reeb_endpoint(pert, tol)
    target = np.array([pert.z0[0], pert.z0[1], 1.0])
    norms = lift_norms(pert, n_grid)
    return {"z0": pert.z0.tolist(), "eps": pert.eps,
            "endpoint": end.tolist(), "endpoint_error": float(np.linalg.norm(end - target)),
            "support_ok": support_check(pert),
            "norms": norms, "K_measured": {k: v / pert.eps for k, v in norms.items()}}
