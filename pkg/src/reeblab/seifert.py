"""Oriented triangulated Seifert surfaces and signed orbit crossings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import PeriodicOrbit
from .geometry import ContactManifold, OMEGA4

TANGENCY_COS = 1e-3
RESAMPLE_FACTOR = 4
_S_SHIFT = 1e-9


class UnresolvedCrossing(RuntimeError):
    """A segment meets a triangle almost tangentially, even after resampling."""


class MeshError(ValueError):
    pass


class LinkIntersectionError(ValueError):
    """An orbit meets (or comes too close to) the link, where forms and counts are undefined."""


@dataclass
class SeifertMesh:
    """Oriented triangle mesh whose boundary wraps link components.

    ``boundary`` lists ``(component, multiplicity)`` pairs: the boundary edge
    cycles cover component ``k`` exactly ``x_k`` times.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.boundary = [(int(k), int(x)) for k, x in self.boundary]
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be index triples")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle index out of range")

    # -- io --

    @classmethod
    def load(cls, path) -> "SeifertMesh":
        return cls.from_json(Path(path))

    @classmethod
    def from_json(cls, data) -> "SeifertMesh":
        """Mesh from a parsed dict, a JSON string or a :class:`~pathlib.Path`."""
        if isinstance(data, Path):
            data = data.read_text()
        if isinstance(data, str):
            data = json.loads(data)
        extra = set(data) - {"vertices", "triangles", "boundary"}
        if extra:
            raise MeshError(f"unknown mesh keys {sorted(extra)}")
        return cls(data["vertices"], data["triangles"],
                   [(b["component"], b["multiplicity"]) for b in data.get("boundary", [])])

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist(), "triangles": self.triangles.tolist(),
                "boundary": [{"component": k, "multiplicity": x} for k, x in self.boundary]}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    # -- combinatorics --

    def directed_edges(self):
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def boundary_edges(self) -> np.ndarray:
        """Directed edges whose reverse is not an edge (the oriented boundary)."""
        edges = self.directed_edges()
        seen = {tuple(e) for e in edges.tolist()}
        return np.array([e for e in edges.tolist() if (e[1], e[0]) not in seen], dtype=np.int64)

    def orientation_consistent(self) -> bool:
        """Every directed edge occurs once; shared edges are traversed oppositely."""
        edges = [tuple(e) for e in self.directed_edges().tolist()]
        return len(set(edges)) == len(edges)

    def reversed(self) -> "SeifertMesh":
        return SeifertMesh(self.vertices.copy(), self.triangles[:, ::-1].copy(),
                           [(k, -x) for k, x in self.boundary])

    def refined(self, M: ContactManifold | None = None) -> "SeifertMesh":
        """Midpoint subdivision, each triangle into four (orientation kept).

        With ``M`` the new vertices are projected to the manifold.
        """
        verts = [v for v in self.vertices]
        mid = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                mid[key] = len(verts)
                verts.append(0.5 * (self.vertices[i] + self.vertices[j]))
            return mid[key]

        tris = []
        for a, b, c in self.triangles.tolist():
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        V = np.array(verts)
        if M is not None:
            new = np.arange(len(self.vertices), len(V))
            V[new] = M.project(V[new])
        return SeifertMesh(V, np.array(tris), list(self.boundary))

    def boundary_degrees(self, link) -> dict:
        """Signed number of times the boundary wraps each link component.

        Every boundary vertex is assigned to the nearest component and located
        on it by its nearest sample; the phase increments along the directed
        boundary edges add up to the degree.
        """
        edges = self.boundary_edges()
        if len(edges) == 0:
            return {}
        V = self.vertices
        comp = np.empty(len(V), dtype=np.int64)
        phase = np.empty(len(V))
        used = np.unique(edges)
        best = np.full(len(used), np.inf)
        for k, orb in enumerate(link):
            d = np.linalg.norm(V[used][:, None, :] - orb.samples[None, :, :], axis=-1)
            j = np.argmin(d, axis=1)
            dk = d[np.arange(len(used)), j]
            upd = dk < best
            best[upd] = dk[upd]
            comp[used[upd]] = k
            phase[used[upd]] = 2 * math.pi * j[upd] / len(orb.samples)
        out = {}
        for a, b in edges.tolist():
            if comp[a] != comp[b]:
                raise MeshError("boundary edge joins two link components")
            step = (phase[b] - phase[a] + math.pi) % (2 * math.pi) - math.pi
            out[int(comp[a])] = out.get(int(comp[a]), 0.0) + step
        return {k: int(round(v / (2 * math.pi))) for k, v in out.items()}

    def validate(self, link) -> dict:
        if not self.orientation_consistent():
            raise MeshError("triangle orientations are inconsistent")
        deg = self.boundary_degrees(link)
        for k, x in self.boundary:
            if deg.get(k, 0) != x:
                raise MeshError(f"boundary wraps component {k} {deg.get(k, 0)} times, "
                                f"declared {x}")
        return deg

    def dlambda_integral(self) -> float:
        """``int_S dlambda`` over the flat triangles (the form is constant in R^4)."""
        if self.vertices.shape[1] != 4:
            raise MeshError("surface integral implemented for meshes in R^4")
        V = self.vertices[self.triangles]
        e1, e2 = V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]
        return float(0.5 * np.einsum("ni,ij,nj->", e1, OMEGA4, e2))


# -- chart to R^3 ------------------------------------------------------------


_POLE_CANDIDATES = np.vstack([np.eye(4), -np.eye(4),
                              np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1],
                                        [-1, 1, 1, -1], [-1, -1, -1, -1]]) / 2.0])


def _stereo(u, pole):
    """Stereographic projection of unit vectors from ``pole`` onto ``pole``'s complement."""
    Q = np.linalg.qr(np.column_stack([pole, np.eye(4)]))[0][:, 1:4]
    Q *= np.sign(np.linalg.det(np.column_stack([pole, Q])))
    s = u @ pole
    return (u @ Q) / (1.0 - s)[:, None]


@dataclass
class Chart:
    """Orientation-tracked map from a model into R^3."""

    pole: np.ndarray | None
    sign: float

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.pole is None:
            return p
        u = p / np.linalg.norm(p, axis=-1, keepdims=True)
        return _stereo(u, self.pole)


def make_chart(M: ContactManifold, cloud) -> Chart:
    """Chart to R^3; on spheres the projection pole is kept away from ``cloud``."""
    if not M.is_closed:
        return Chart(None, 1.0)
    pts = np.asarray(cloud, dtype=float)
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    gaps = [np.min(np.linalg.norm(pts - c / np.linalg.norm(c), axis=1)) for c in _POLE_CANDIDATES]
    pole = _POLE_CANDIDATES[int(np.argmax(gaps))]
    pole = pole / np.linalg.norm(pole)
    # orientation: positive frame of the model at a reference point, pushed forward
    q = M.project(pts[0])
    frame = M.positive_frame(q)
    h = 1e-6
    J = np.column_stack([(_stereo(((q + h * f) / np.linalg.norm(q + h * f))[None], pole)
                          - _stereo(((q - h * f) / np.linalg.norm(q - h * f))[None], pole))[0]
                         / (2 * h) for f in frame.T])
    return Chart(pole, float(np.sign(np.linalg.det(J))))


# -- crossings ---------------------------------------------------------------


def _segment_triangle_crossings(P0, D, V0, E1, E2):
    """Signed crossings of segments ``P0 + s D`` with triangles.

    The parameter window is half open and shifted by ``_S_SHIFT`` so that a
    crossing exactly at a shared sample point is counted by one segment only.

    Returns ``(signs, cosines)`` for every detected crossing (Moller-Trumbore).
    """
    pvec = np.cross(D[:, None, :], E2[None, :, :])
    det = np.einsum("fi,sfi->sf", E1, pvec)
    ok = np.abs(det) > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = P0[:, None, :] - V0[None, :, :]
    u = np.einsum("sfi,sfi->sf", tvec, pvec) * inv
    hit = ok & (u >= 0) & (u <= 1)
    qvec = np.cross(tvec, E1[None, :, :])
    v = np.einsum("si,sfi->sf", D, qvec) * inv
    hit &= (v >= 0) & (u + v <= 1)
    s = np.einsum("fi,sfi->sf", E2, qvec) * inv
    hit &= (s >= -_S_SHIFT) & (s < 1 - _S_SHIFT)
    si, fi = np.nonzero(hit)
    N = np.cross(E1[fi], E2[fi])
    dd = D[si]
    orient = np.einsum("ni,ni->n", dd, N)
    cos = orient / (np.linalg.norm(dd, axis=1) * np.linalg.norm(N, axis=1))
    return np.sign(orient), cos


def _count(points3, tris3, chunk=64):
    P = np.asarray(points3)
    P0 = P
    D = np.roll(P, -1, axis=0) - P
    V0 = tris3[:, 0]
    E1 = tris3[:, 1] - V0
    E2 = tris3[:, 2] - V0
    lo_t = np.minimum(np.minimum(tris3[:, 0], tris3[:, 1]), tris3[:, 2])
    hi_t = np.maximum(np.maximum(tris3[:, 0], tris3[:, 1]), tris3[:, 2])
    total = 0
    worst = 1.0
    for i in range(0, len(P0), chunk):
        a, d = P0[i:i + chunk], D[i:i + chunk]
        lo_s = np.minimum(a, a + d).min(axis=0)
        hi_s = np.maximum(a, a + d).max(axis=0)
        keep = np.all((hi_t >= lo_s) & (lo_t <= hi_s), axis=1)
        if not np.any(keep):
            continue
        signs, cos = _segment_triangle_crossings(a, d, V0[keep], E1[keep], E2[keep])
        total += int(np.sum(signs))
        if len(cos):
            worst = min(worst, float(np.min(np.abs(cos))))
    return total, worst


def orbit_surface_intersection(orbit: PeriodicOrbit, mesh: SeifertMesh, M: ContactManifold | None = None,
                               link=None, boundary_gap: float = 1e-3, chart: Chart | None = None) -> int:
    """Algebraic intersection number of a periodic orbit with an oriented mesh.

    The orbit polyline and the mesh are mapped to R^3 by an orientation-
    tracked chart; each transversal segment-triangle crossing contributes the
    sign of the orientation triple (segment, triangle edges). Near-tangential
    crossings trigger one resampling at four times the density.
    """
    M = M or orbit.model
    if link is not None:
        for comp in link:
            gap = np.min(np.linalg.norm(orbit.samples[:, None, :] - comp.samples[None, :, :], axis=-1))
            if gap < boundary_gap:
                raise LinkIntersectionError("orbit comes too close to the mesh boundary")
    chart = chart or make_chart(M, mesh.vertices)
    tris3 = chart(mesh.vertices)[mesh.triangles]
    samples = orbit.samples
    for attempt in range(2):
        n, worst = _count(chart(samples), tris3)
        if worst >= TANGENCY_COS:
            return int(round(chart.sign * n))
        if attempt == 0:
            if orbit.model is None:
                break
            samples = orbit.resampled(RESAMPLE_FACTOR * len(orbit.samples)).samples
    raise UnresolvedCrossing(f"near-tangential crossing (|cos| = {worst:.2e}); sample the orbit more finely")
