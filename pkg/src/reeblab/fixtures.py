"""Canonical test objects: Hopf fibers and their spanning disks."""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .dynamics import DEFAULT_TOL, build_orbits
from .geometry import ContactManifold, make_model
from .seifert import SeifertMesh

HOPF_PERIOD = math.pi


def hopf_map(points):
    """``(2 z1 conj(z2), |z1|^2 - |z2|^2)`` as a point of S^2 in R^3."""
    p = np.asarray(points, dtype=float)
    z1 = p[..., 0] + 1j * p[..., 1]
    z2 = p[..., 2] + 1j * p[..., 3]
    w = 2 * z1 * np.conj(z2)
    return np.stack([w.real, w.imag, np.abs(z1) ** 2 - np.abs(z2) ** 2], axis=-1)


def hopf_lift(base):
    """A point of S^3 over each point of S^2."""
    base = np.atleast_2d(np.asarray(base, dtype=float))
    x, y, w = base.T
    r2 = np.sqrt(np.clip((1 - w) / 2, 0, None))
    r1 = np.sqrt(np.clip((1 + w) / 2, 0, None))
    out = np.zeros((len(base), 4))
    small = r2 < 1e-12
    out[small, 0] = 1.0
    big = ~small
    z1 = (x[big] + 1j * y[big]) / (2 * r2[big])
    z1 = z1 / np.abs(z1) * r1[big]
    out[big, 0], out[big, 1], out[big, 2] = z1.real, z1.imag, r2[big]
    return out


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` quasi-uniform points on S^2 avoiding both poles."""
    i = np.arange(n) + 0.5
    w = 1 - 2 * i / n
    phi = math.pi * (3 - math.sqrt(5)) * i
    r = np.sqrt(1 - w * w)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), w])


def hopf_fibers(n: int, M: ContactManifold | None = None, n_samples: int = 128,
                tol: float = DEFAULT_TOL):
    """Periodic orbits over a Fibonacci lattice of ``n`` points on S^2."""
    M = M or make_model("round_sphere")
    pts = hopf_lift(fibonacci_sphere(n))
    # generic phase so that no sample sits on a coordinate half-plane
    phase = np.exp(1j * (0.5 + np.arange(n) * math.pi * (3 - math.sqrt(5))))
    z = (pts[:, 0] + 1j * pts[:, 1]) * phase, (pts[:, 2] + 1j * pts[:, 3]) * phase
    pts = np.column_stack([z[0].real, z[0].imag, z[1].real, z[1].imag])
    return build_orbits(M, pts, np.full(n, HOPF_PERIOD), tol=tol, n_samples=n_samples)


def hopf_fiber(point, M: ContactManifold | None = None, n_samples: int = 128,
               tol: float = DEFAULT_TOL):
    M = M or make_model("round_sphere")
    p = np.asarray(point, dtype=float)
    return build_orbits(M, p / np.linalg.norm(p), [HOPF_PERIOD], tol=tol, n_samples=n_samples)[0]


def reference_fiber(M: ContactManifold | None = None, n_samples: int = 256):
    """The fiber ``{z2 = 0}`` through ``(1, 0, 0, 0)``."""
    return hopf_fiber([1.0, 0.0, 0.0, 0.0], M, n_samples)


def hopf_disk(n_sectors: int = 256, n_rings: int = 8, turns: int = 1) -> SeifertMesh:
    """Hemisphere ``{y2 = 0, x2 >= 0}`` of S^3 spanning the fiber ``{z2 = 0}``.

    Vertices ``(cos(phi) e^{i s}, sin(phi))`` on a polar grid with ``phi``
    running from the boundary (``phi = 0``) to the centre (``phi = pi/2``).
    Triangles are ordered so that the boundary runs in the direction of the
    Reeb flow. ``turns = 2`` builds two disjoint copies with the second
    rotated in the ``z2`` plane, a surface covering the fiber twice.
    """
    verts, tris = [], []
    for copy in range(turns):
        rot = np.exp(1j * math.pi * copy / turns) if turns > 1 else 1.0
        off = len(verts)
        s = 2 * math.pi * np.arange(n_sectors) / n_sectors
        for j in range(n_rings):
            phi = 0.5 * math.pi * j / n_rings
            z2 = math.sin(phi) * rot
            for sk in s:
                verts.append([math.cos(phi) * math.cos(sk), math.cos(phi) * math.sin(sk),
                              z2.real, z2.imag])
        centre = len(verts) - off
        verts.append([0.0, 0.0, rot.real, rot.imag])

        def idx(j, i):
            return off + j * n_sectors + (i % n_sectors)

        for j in range(n_rings - 1):
            for i in range(n_sectors):
                tris.append((idx(j, i), idx(j, i + 1), idx(j + 1, i + 1)))
                tris.append((idx(j, i), idx(j + 1, i + 1), idx(j + 1, i)))
        for i in range(n_sectors):
            tris.append((idx(n_rings - 1, i), idx(n_rings - 1, i + 1), off + centre))
    return SeifertMesh(np.array(verts), np.array(tris), [(0, turns)])


def load_hopf_disk() -> SeifertMesh:
    """The shipped spanning-disk fixture."""
    ref = resources.files("reeblab") / "data" / "hopf_disk.json"
    return SeifertMesh.from_json(ref.read_text())


def smooth_test_functions():
    """Ten smooth bounded functions on R^4 used for weak* comparisons."""
    return [
        lambda p: p[..., 0] ** 2,
        lambda p: p[..., 0] * p[..., 2] + p[..., 1] * p[..., 3],
        lambda p: np.cos(2 * p[..., 0]),
        lambda p: np.exp(p[..., 2]),
        lambda p: p[..., 0] + p[..., 3],
        lambda p: (p[..., 0] ** 2 - p[..., 3] ** 2) * p[..., 2],
        lambda p: np.sin(3 * p[..., 1]) * np.cos(p[..., 2]),
        lambda p: 1.0 / (2.0 + p[..., 0] + p[..., 1]),
        lambda p: (p[..., 0] ** 2 + p[..., 1] ** 2) * (p[..., 2] ** 2 + p[..., 3] ** 2),
        lambda p: np.tanh(3 * (p[..., 0] - 0.2)),
    ]


def open_set_tests():
    """Integrands restricted to open sets whose boundaries are Liouville-null."""
    from .measures import OpenSetTest
    return [
        OpenSetTest(lambda p: p[..., 0] - 0.1, lambda p: 1.0 + p[..., 2] ** 2, "half_space"),
        OpenSetTest(lambda p: 0.5 - np.linalg.norm(p - np.array([0.6, 0.0, 0.8, 0.0]), axis=-1),
                    lambda p: np.cos(p[..., 1]), "cap"),
    ]
