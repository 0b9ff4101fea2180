"""Explicit contact 3-manifolds with closed-form Reeb fields.

Sphere-type models live in R^4 with real coordinates ``(x1, y1, x2, y2)``
(``z_j = x_j + i y_j``) and carry the standard Liouville form
``lambda = 1/2 sum_j (x_j dy_j - y_j dx_j)``. The ellipsoid with parameters
``(a, b)`` is the level set ``|z1|^2/a + |z2|^2/b = 1``; its Reeb flow is
``z_j -> exp(2 i t / a_j) z_j``, so the coordinate circles have periods
``pi a`` and ``pi b`` and ``ellipsoid(1, 1)`` is the unit round sphere.

The ``lift_box`` model is the flow box ``D_1(0) x [0, 1]`` in R^3 with
``lambda_0 = dt + 1/2 (x dy - y dx)`` and Reeb field ``d/dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPHERE_MODELS = ("round_sphere", "ellipsoid")
MODEL_IDS = SPHERE_MODELS + ("lift_box",)

# complex structure i on R^4 in (x1, y1, x2, y2) ordering
J4 = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])
# standard symplectic form dlambda = dx1^dy1 + dx2^dy2, as omega(u, v) = u^T W v
OMEGA4 = -J4


class ModelError(ValueError):
    """Invalid model descriptor."""


@dataclass(frozen=True)
class ContactManifold:
    """A model contact 3-manifold with pointwise evaluators.

    All evaluators accept a single point of shape ``(d,)`` or a batch of shape
    ``(n, d)``.
    """

    model_id: str
    params: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return 3 if self.model_id == "lift_box" else 4

    @property
    def is_closed(self) -> bool:
        return self.model_id in SPHERE_MODELS

    @property
    def weights(self) -> np.ndarray:
        """Squared semi-axes ``(a, b)`` of a sphere model."""
        return np.array([self.params.get("a", 1.0), self.params.get("b", 1.0)])

    def descriptor(self) -> dict:
        return {"model": self.model_id, **self.params}

    # -- forms -----------------------------------------------------------

    def lambda_covector(self, p):
        """Row vector ``l(p)`` with ``lambda_p(v) = l(p) . v``."""
        p = np.asarray(p, dtype=float)
        if self.model_id == "lift_box":
            x, y = p[..., 0], p[..., 1]
            return np.stack([-0.5 * y, 0.5 * x, np.ones_like(x)], axis=-1)
        return 0.5 * p @ OMEGA4

    def lambda_eval(self, p, v):
        return np.sum(self.lambda_covector(p) * np.asarray(v, dtype=float), axis=-1)

    def dlambda_eval(self, p, u, v):
        """``dlambda_p(u, v)``; the exterior derivative has constant coefficients."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.model_id == "lift_box":
            return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
        return np.einsum("...i,ij,...j->...", u, OMEGA4, v)

    def volume_form(self, p, u, v, w):
        """``(lambda ^ dlambda)_p(u, v, w)``."""
        lam = self.lambda_eval
        dl = self.dlambda_eval
        return (lam(p, u) * dl(p, v, w) + lam(p, v) * dl(p, w, u)
                + lam(p, w) * dl(p, u, v))

    # -- Reeb field ------------------------------------------------------

    def reeb_matrix(self) -> np.ndarray:
        """Constant matrix ``A`` with ``X(p) = A p`` (sphere models)."""
        a, b = self.weights
        return 2.0 * np.diag([1 / a, 1 / a, 1 / b, 1 / b]) @ J4

    def reeb_eval(self, p):
        p = np.asarray(p, dtype=float)
        if self.model_id == "lift_box":
            out = np.zeros_like(p)
            out[..., 2] = 1.0
            return out
        return p @ self.reeb_matrix().T

    def reeb_jacobian(self, p):
        """Derivative of the Reeb field, shape ``(..., d, d)``."""
        p = np.asarray(p, dtype=float)
        d = self.ambient_dim
        if self.model_id == "lift_box":
            jac = np.zeros((d, d))
        else:
            jac = self.reeb_matrix()
        return np.broadcast_to(jac, p.shape[:-1] + (d, d))

    def reeb_periods(self) -> np.ndarray:
        """Closed-form periods of the two coordinate circles."""
        return math.pi * self.weights

    # -- constraint ------------------------------------------------------

    def constraint_eval(self, p):
        """Level function whose zero set is the manifold (sphere models only)."""
        if not self.is_closed:
            raise ModelError("lift_box has no constraint function")
        p = np.asarray(p, dtype=float)
        a, b = self.weights
        return (p[..., 0] ** 2 + p[..., 1] ** 2) / a + (p[..., 2] ** 2 + p[..., 3] ** 2) / b - 1.0

    def constraint_grad(self, p):
        p = np.asarray(p, dtype=float)
        a, b = self.weights
        return 2.0 * p / np.array([a, a, b, b])

    def project(self, p, iters=3):
        """Pull points back onto the level set along the gradient direction."""
        p = np.array(p, dtype=float)
        if not self.is_closed:
            return p
        for _ in range(iters):
            g = self.constraint_grad(p)
            c = self.constraint_eval(p)
            p = p - (c / np.sum(g * g, axis=-1))[..., None] * g
        return p

    def normal(self, p):
        """Outward unit normal (sphere models)."""
        g = self.constraint_grad(p)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def tangent_project(self, p, v):
        """Orthogonal projection of ambient vectors onto ``T_p M``."""
        v = np.asarray(v, dtype=float)
        if not self.is_closed:
            return v
        n = self.normal(p)
        return v - np.sum(v * n, axis=-1, keepdims=True) * n

    def contact_plane(self, p):
        """Orthonormal basis ``(e1, e2)`` of ``ker lambda_p`` with ``dlambda(e1, e2) > 0``.

        Returns an array of shape ``(..., d, 2)``.
        """
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        out = np.empty(pts.shape + (2,))
        d = self.ambient_dim
        for i, q in enumerate(pts):
            rows = [self.lambda_covector(q)]
            if self.is_closed:
                rows.insert(0, self.constraint_grad(q))
            m = np.array(rows)
            # complete the row space to R^d with a fixed deterministic order
            full = np.vstack([m, np.eye(d)]).T
            qmat, _ = np.linalg.qr(full)
            basis = qmat[:, len(rows):len(rows) + 2].copy()
            if self.dlambda_eval(q, basis[:, 0], basis[:, 1]) < 0:
                basis[:, 1] *= -1
            out[i] = basis
        return out[0] if single else out

    def positive_frame(self, p):
        """An orthonormal positively oriented frame of ``T_p M``, shape ``(d, 3)``."""
        p = np.asarray(p, dtype=float)
        if not self.is_closed:
            return np.eye(3)
        n = self.normal(p)
        qmat, _ = np.linalg.qr(np.vstack([n, np.eye(4)]).T)
        frame = qmat[:, 1:4].copy()
        if np.linalg.det(np.column_stack([n, frame])) < 0:
            frame[:, 2] *= -1
        return frame

    # -- sampling --------------------------------------------------------

    def sample_points(self, n, rng):
        """Seeded sample of points on the manifold."""
        if self.model_id == "lift_box":
            r = np.sqrt(rng.uniform(0, 1, n))
            ang = rng.uniform(0, 2 * math.pi, n)
            return np.column_stack([r * np.cos(ang), r * np.sin(ang), rng.uniform(0, 1, n)])
        u = rng.standard_normal((n, 4))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.radial(u)

    def radial(self, u):
        """Radial projection of nonzero vectors onto the level set."""
        u = np.asarray(u, dtype=float)
        a, b = self.weights
        h = (u[..., 0] ** 2 + u[..., 1] ** 2) / a + (u[..., 2] ** 2 + u[..., 3] ** 2) / b
        return u / np.sqrt(h)[..., None]

    def distance(self, p, q):
        """Ambient chordal distance."""
        return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)


def make_model(spec) -> ContactManifold:
    """Build a model from a descriptor such as ``{"model": "ellipsoid", "a": 1, "b": 2}``.

    A bare string is accepted for parameter-free models.
    """
    if isinstance(spec, ContactManifold):
        return spec
    if isinstance(spec, str):
        spec = {"model": spec}
    spec = dict(spec)
    model_id = spec.pop("model", None)
    spec.pop("seed", None)
    if model_id not in MODEL_IDS:
        raise ModelError(f"unknown model_id {model_id!r}")
    if model_id == "ellipsoid":
        extra = set(spec) - {"a", "b"}
        if extra:
            raise ModelError(f"unknown ellipsoid parameters {sorted(extra)}")
        try:
            a = float(spec["a"])
            b = float(spec["b"])
        except KeyError as exc:
            raise ModelError(f"missing ellipsoid parameter {exc.args[0]}") from None
        if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
            raise ModelError("non-positive parameter")
        return ContactManifold("ellipsoid", {"a": a, "b": b})
    if spec:
        raise ModelError(f"{model_id} takes no parameters, got {sorted(spec)}")
    return ContactManifold(model_id, {})


def verify_contact(M: ContactManifold, n_samples: int, tol: float, seed: int = 0) -> dict:
    """Check the Reeb equations and the contact condition on seeded samples.

    Reports the worst residual of each axiom: ``lambda(X) = 1``,
    ``dlambda(X, v) = 0`` on 10 random tangent vectors per point, tangency of
    ``X``, the smallest ``|dlambda|`` on an orthonormal basis of the contact
    plane and the smallest value of ``lambda ^ dlambda`` on a positive frame.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = M.sample_points(n_samples, rng)
    X = M.reeb_eval(pts)
    res_norm = np.max(np.abs(M.lambda_eval(pts, X) - 1.0))
    v = rng.standard_normal((n_samples, 10, M.ambient_dim))
    v = M.tangent_project(pts[:, None, :], v)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    res_kernel = np.max(np.abs(M.dlambda_eval(pts[:, None, :], X[:, None, :], v)))
    res_tangent = 0.0
    if M.is_closed:
        res_tangent = float(np.max(np.abs(np.sum(M.constraint_grad(pts) * X, axis=-1))))
    planes = M.contact_plane(pts)
    nondeg = np.abs(M.dlambda_eval(pts, planes[..., 0], planes[..., 1]))
    frames = np.array([M.positive_frame(p) for p in pts])
    vol = M.volume_form(pts, frames[..., 0], frames[..., 1], frames[..., 2])
    report = {
        "model": M.descriptor(),
        "n_samples": n_samples,
        "tol": tol,
        "reeb_normalization": float(res_norm),
        "reeb_kernel": float(res_kernel),
        "reeb_tangency": float(res_tangent),
        "min_nondegeneracy": float(np.min(nondeg)),
        "min_volume": float(np.min(vol)),
    }
    report["pass"] = bool(
        res_norm <= tol and res_kernel <= tol and res_tangent <= tol
        and report["min_nondegeneracy"] > tol and report["min_volume"] > 0
    )
    return report


def _sphere_tangent_frames(u):
    """Positively oriented orthonormal frames of ``T_u S^3`` for unit ``u``."""
    out = np.empty(u.shape + (3,))
    for i, q in enumerate(u):
        qmat, _ = np.linalg.qr(np.vstack([q, np.eye(4)]).T)
        fr = qmat[:, 1:4]
        if np.linalg.det(np.column_stack([q, fr])) < 0:
            fr = fr.copy()
            fr[:, 2] *= -1
        out[i] = fr
    return out


def helicity(M: ContactManifold, n_samples: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate of ``vol(lambda) = int_M lambda ^ dlambda``.

    The manifold is parametrized by radial projection of the unit 3-sphere;
    samples come in antithetic pairs ``(u, -u)``. Returns ``(estimate,
    standard_error)``.
    """
    if not M.is_closed:
        raise ModelError("helicity undefined for manifold with boundary")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    half = n_samples // 2
    u = rng.standard_normal((half, 4))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    a, b = M.weights
    inv = np.array([1 / a, 1 / a, 1 / b, 1 / b])

    def density(us):
        frames = _sphere_tangent_frames(us)
        h = np.sum(us * us * inv, axis=1)
        s = h ** -0.5
        x = us * s[:, None]
        # D psi(u) v = s v - s^3 (u . inv v) u for psi(u) = u / sqrt(H(u))
        pushed = []
        for k in range(3):
            v = frames[:, :, k]
            dv = s[:, None] * v - (s ** 3 * np.sum(us * inv * v, axis=1))[:, None] * us
            pushed.append(dv)
        return M.volume_form(x, *pushed)

    vals = 0.5 * (density(u) + density(-u))
    area = 2 * math.pi ** 2
    est = area * float(np.mean(vals))
    se = area * float(np.std(vals, ddof=1) / math.sqrt(half)) if half > 1 else float("inf")
    return est, se


def helicity_oracle(M: ContactManifold) -> float:
    """Stokes value ``2 vol(region)`` for a sphere model: ``pi^2 a b``."""
    a, b = M.weights
    return math.pi ** 2 * a * b
