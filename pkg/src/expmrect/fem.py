"""Triangular meshes and P1 finite element assembly for the test problems.

Two domains are built: the unit square with a structured criss-cross
triangulation, and a five-pointed star polygon triangulated by ear clipping,
refined by uniform midpoint subdivision and relaxed by Laplacian smoothing.
On either mesh the advection-diffusion operator

    u_t = d * laplace(u) - c . grad(u)

is discretized with piecewise-linear elements and homogeneous Dirichlet
conditions eliminated, yielding the semi-discrete system M u' = K u with M
the interior mass matrix and K = -d * A + N (A the stiffness matrix, N the
advection matrix). The symmetric part of K is then negative definite: for
constant c the advection term is skew-symmetric between interior basis
functions up to roundoff, because the symmetric combination integrates
c . grad(phi_i phi_j) over the domain, which is a pure boundary term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateMesh

__all__ = [
    "TriMesh",
    "AssembledSystem",
    "mesh_square",
    "mesh_star",
    "avg_edge_length",
    "assemble_p1",
    "assemble_p1_full",
    "initial_vector",
    "write_mesh",
    "read_mesh",
]


@dataclass(frozen=True)
class TriMesh:
    """A conforming triangulation of a planar domain.

    ``vertices`` is (nv, 2) float, ``triangles`` (nt, 3) int with
    counterclockwise orientation (positive signed area), ``boundary`` a
    boolean mask marking vertices on the domain boundary, and ``h_bar`` the
    mean length over the unique edges of the mesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h_bar: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


def _unique_edges(triangles: np.ndarray) -> np.ndarray:
    e = np.vstack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    e.sort(axis=1)
    return np.unique(e, axis=0)


def _boundary_vertices(triangles: np.ndarray, nv: int) -> np.ndarray:
    # boundary edges belong to exactly one triangle
    e = np.vstack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    e.sort(axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    flags = np.zeros(nv, dtype=bool)
    for a, b in edges[counts == 1]:
        flags[a] = flags[b] = True
    return flags


def avg_edge_length(mesh: TriMesh) -> float:
    """Mean Euclidean length over the unique edges of the mesh."""
    edges = _unique_edges(mesh.triangles)
    d = mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]]
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


def _make_mesh(vertices: np.ndarray, triangles: np.ndarray) -> TriMesh:
    areas = _signed_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        raise DegenerateMesh("triangulation contains nonpositive signed areas")
    edges = _unique_edges(triangles)
    d = vertices[edges[:, 0]] - vertices[edges[:, 1]]
    h_bar = float(np.mean(np.hypot(d[:, 0], d[:, 1])))
    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        boundary=_boundary_vertices(triangles, vertices.shape[0]),
        h_bar=h_bar,
    )


# --------------------------------------------------------------------------
# unit square
# --------------------------------------------------------------------------

def mesh_square(divisions: int) -> TriMesh:
    """Structured triangulation of the unit square.

    Each of the divisions x divisions grid cells is cut along its diagonal
    into two triangles, so all triangle areas equal 1/(2*divisions**2) and
    the vertex count is (divisions+1)**2.
    """
    if divisions < 1:
        raise ValueError("divisions must be at least 1")
    d = divisions
    xs = np.linspace(0.0, 1.0, d + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (d + 1) + i

    tris = []
    for j in range(d):
        for i in range(d):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return _make_mesh(vertices, np.array(tris, dtype=int))


# --------------------------------------------------------------------------
# star polygon
# --------------------------------------------------------------------------

def _star_outline(points: int, r_outer: float, r_inner: float) -> np.ndarray:
    k = np.arange(2 * points)
    ang = np.pi / 2 + np.pi * k / points
    rad = np.where(k % 2 == 0, r_outer, r_inner)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def _ear_clip(polygon: np.ndarray) -> np.ndarray:
    """Triangulate a simple counterclockwise polygon by ear clipping.

    Among the valid ears at each step the one with the largest minimal angle
    is clipped. Clipping in index order instead tends to carve long slivers
    out of spiky polygons, and uniform midpoint refinement would then copy
    those slivers down to every level.
    """

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def in_triangle(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return (d1 >= 0) and (d2 >= 0) and (d3 >= 0)

    def min_angle(a, b, c):
        la, lb, lc = (
            math.hypot(*(c - b)),
            math.hypot(*(a - c)),
            math.hypot(*(b - a)),
        )
        angles = []
        for opp, e1, e2 in ((la, lb, lc), (lb, lc, la), (lc, la, lb)):
            arg = (e1 * e1 + e2 * e2 - opp * opp) / (2.0 * e1 * e2)
            angles.append(math.acos(min(1.0, max(-1.0, arg))))
        return min(angles)

    idx = list(range(polygon.shape[0]))
    tris = []
    while len(idx) > 3:
        n = len(idx)
        best_k, best_quality = None, -1.0
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = polygon[i0], polygon[i1], polygon[i2]
            if cross(a, b, c) <= 0.0:
                continue  # reflex corner, not an ear
            if any(
                in_triangle(polygon[j], a, b, c)
                for j in idx
                if j not in (i0, i1, i2)
            ):
                continue
            quality = min_angle(a, b, c)
            if quality > best_quality:
                best_k, best_quality = k, quality
        if best_k is None:
            raise DegenerateMesh("no ear found; polygon may be self-intersecting")
        n = len(idx)
        tris.append((idx[(best_k - 1) % n], idx[best_k], idx[(best_k + 1) % n]))
        idx.pop(best_k)
    if cross(*polygon[idx]) <= 0.0:
        raise DegenerateMesh("final ear has nonpositive area")
    tris.append(tuple(idx))
    return np.array(tris, dtype=int)


def _refine_once(vertices: np.ndarray, triangles: np.ndarray):
    verts = list(map(tuple, vertices))
    midpoint: dict[tuple[int, int], int] = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            pa, pb = vertices[a], vertices[b]
            verts.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    new_tris = []
    for a, b, c in triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return np.array(verts, dtype=float), np.array(new_tris, dtype=int)


def _smooth(vertices: np.ndarray, triangles: np.ndarray, boundary: np.ndarray, sweeps: int):
    """Laplacian smoothing of interior vertices with per-sweep rollback.

    Each sweep moves every interior vertex to the mean of its neighbors; a
    sweep that would invert any triangle is undone and smoothing stops.
    """
    edges = _unique_edges(triangles)
    nv = vertices.shape[0]
    neighbors: list[list[int]] = [[] for _ in range(nv)]
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    pts = vertices.copy()
    for _ in range(sweeps):
        prev = pts.copy()
        for v in range(nv):
            if boundary[v] or not neighbors[v]:
                continue
            pts[v] = np.mean(prev[neighbors[v]], axis=0)
        if np.any(_signed_areas(pts, triangles) <= 0.0):
            pts = prev
            break
    return pts


def mesh_star(
    points: int = 5,
    r_outer: float = 2.0,
    r_inner: float = 0.8,
    refine: int = 0,
    smoothing_sweeps: int = 8,
) -> TriMesh:
    """Triangulated star polygon centered at the origin.

    The outline alternates ``points`` outer and inner radii; ear clipping
    produces a coarse triangulation which is refined ``refine`` times by
    midpoint subdivision (each round quadruples the triangle count, new
    boundary vertices stay on the polygon edges exactly) and then smoothed.
    """
    if points < 3:
        raise ValueError("a star needs at least 3 points")
    if not (0.0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    outline = _star_outline(points, r_outer, r_inner)
    tris = _ear_clip(outline)
    verts = outline.copy()
    for _ in range(refine):
        verts, tris = _refine_once(verts, tris)
    flags = _boundary_vertices(tris, verts.shape[0])
    verts = _smooth(verts, tris, flags, smoothing_sweeps)
    return _make_mesh(verts, tris)


# --------------------------------------------------------------------------
# P1 assembly
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AssembledSystem:
    """Interior-only mass/stiffness pair and initial data for M u' = K u."""

    M: sp.csr_array
    K: sp.csr_array
    b0: np.ndarray
    mesh: TriMesh
    d: float
    c: tuple[float, float]

    @property
    def n(self) -> int:
        return self.M.shape[0]


def _element_matrices(p0, p1, p2, c):
    area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
    area = 0.5 * area2
    if area <= 0.0:
        raise DegenerateMesh("element with nonpositive area")
    # constant gradients of the three hat functions
    g = np.array(
        [
            [p1[1] - p2[1], p2[0] - p1[0]],
            [p2[1] - p0[1], p0[0] - p2[0]],
            [p0[1] - p1[1], p1[0] - p0[0]],
        ]
    ) / area2
    mass = (area / 12.0) * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    stiff = area * (g @ g.T)
    cg = g @ np.asarray(c, dtype=float)  # c . grad(phi_j), constant per element
    adv = (area / 3.0) * np.tile(cg, (3, 1))  # int phi_i (c . grad phi_j)
    return mass, stiff, adv


def assemble_p1_full(mesh: TriMesh, d: float, c=(1.0, 1.0)):
    """Assemble mass and right-hand matrices over all vertices (no boundary
    elimination). Returns (M_full, K_full) with K = -d * stiffness + advection."""
    nv = mesh.n_vertices
    rows, cols = [], []
    mvals, kvals = [], []
    for tri in mesh.triangles:
        p0, p1, p2 = mesh.vertices[tri]
        mass, stiff, adv = _element_matrices(p0, p1, p2, c)
        kelem = -d * stiff + adv
        for a in range(3):
            for b in range(3):
                rows.append(tri[a])
                cols.append(tri[b])
                mvals.append(mass[a, b])
                kvals.append(kelem[a, b])
    M = sp.coo_array((mvals, (rows, cols)), shape=(nv, nv)).tocsr()
    K = sp.coo_array((kvals, (rows, cols)), shape=(nv, nv)).tocsr()
    return M, K


def assemble_p1(mesh: TriMesh, d: float, c=(1.0, 1.0), domain: str = "square") -> AssembledSystem:
    """P1 discretization of u_t = d*laplace(u) - c.grad(u), Dirichlet-eliminated.

    The returned system couples only interior vertices; boundary rows and
    columns are removed (homogeneous Dirichlet data). ``b0`` interpolates
    the bump initial condition for ``domain`` at the interior vertices.
    """
    if d <= 0.0:
        raise ValueError("diffusion coefficient must be positive")
    M_full, K_full = assemble_p1_full(mesh, d, c)
    interior = np.flatnonzero(~mesh.boundary)
    if interior.size == 0:
        raise DegenerateMesh("mesh has no interior vertices")
    M = sp.csr_array(M_full[interior][:, interior])
    K = sp.csr_array(K_full[interior][:, interior])
    u0 = initial_vector(mesh, domain)
    return AssembledSystem(M=M, K=K, b0=u0[interior], mesh=mesh, d=float(d), c=tuple(c))


def initial_vector(mesh: TriMesh, domain: str = "square") -> np.ndarray:
    """Nodal interpolation of the bump initial condition on all vertices.

    square: exp(-sinh(70 (x-1/2)^4) - sinh(70 (y-1/2)^4))
    star:   exp(-sinh(70 (x/2)^4) - sinh(70 (y/2)^4))
    """
    x = mesh.vertices[:, 0]
    y = mesh.vertices[:, 1]
    if domain == "square":
        u, v = x - 0.5, y - 0.5
    elif domain == "star":
        u, v = x / 2.0, y / 2.0
    else:
        raise ValueError(f"unknown domain {domain!r}")
    with np.errstate(over="ignore"):
        val = np.exp(-np.sinh(70.0 * u**4) - np.sinh(70.0 * v**4))
    return np.where(np.isfinite(val), val, 0.0)


# --------------------------------------------------------------------------
# mesh text format
# --------------------------------------------------------------------------

MESH_HEADER = "# trimesh v1: nv nt, then nv lines 'x y boundary', then nt lines 'i j k'"


def write_mesh(path, mesh: TriMesh) -> None:
    with open(path, "w") as fh:
        fh.write(MESH_HEADER + "\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for (x, y), b in zip(mesh.vertices, mesh.boundary):
            fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path) -> TriMesh:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    nv, nt = map(int, lines[0].split())
    verts = np.empty((nv, 2))
    flags = np.zeros(nv, dtype=bool)
    for i in range(nv):
        x, y, b = lines[1 + i].split()
        verts[i] = (float(x), float(y))
        flags[i] = bool(int(b))
    tris = np.array([list(map(int, lines[1 + nv + j].split())) for j in range(nt)], dtype=int)
    mesh = _make_mesh(verts, tris)
    if not np.array_equal(mesh.boundary, flags):
        raise DegenerateMesh("stored boundary flags disagree with mesh topology")
    return mesh
