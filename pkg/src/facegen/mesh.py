"""Quad-mesh storage, connectivity and the differential quantities used by
the model learner (normals, uniform Laplacian, edge-length energy).

Vertices are float64 meters throughout; indices are int64.  Meshes are
immutable after construction and every operation here is a pure function,
so concurrent evaluation is safe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import (
    DegenerateQuad,
    IsolatedVertex,
    NonManifoldEdge,
    TopologyMismatch,
    ZeroAreaFace,
)


@dataclass(frozen=True)
class QuadMesh:
    """Fixed-topology quad mesh.

    vertices : (V, 3) float64, meters
    quads    : (F, 4) int64, indices into vertices
    uvs      : optional (F, 4, 2) float64, per-face-corner texture coords
    """

    vertices: np.ndarray
    quads: np.ndarray
    uvs: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        q = np.ascontiguousarray(np.asarray(self.quads, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise DegenerateQuad(f"vertices must be (V, 3), got {v.shape}")
        if q.ndim != 2 or q.shape[1] != 4:
            raise DegenerateQuad(f"quads must be (F, 4), got {q.shape}")
        if q.size and (q.min() < 0 or q.max() >= len(v)):
            raise DegenerateQuad("quad index out of range")
        # each quad must reference 4 distinct vertices
        if q.size:
            s = np.sort(q, axis=1)
            if np.any(s[:, :-1] == s[:, 1:]):
                bad = int(np.nonzero(np.any(np.sort(q, axis=1)[:, :-1]
                                            == np.sort(q, axis=1)[:, 1:], axis=1))[0][0])
                raise DegenerateQuad(f"quad {bad} repeats a vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "quads", q)
        if self.uvs is not None:
            uv = np.ascontiguousarray(np.asarray(self.uvs, dtype=np.float64))
            if uv.shape != (len(q), 4, 2):
                raise DegenerateQuad(f"uvs must be (F, 4, 2), got {uv.shape}")
            object.__setattr__(self, "uvs", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    def with_vertices(self, vertices: np.ndarray) -> "QuadMesh":
        """Same topology, new vertex positions."""
        return QuadMesh(vertices, self.quads, self.uvs)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class MeshConnectivity:
    """Incidence tables derived deterministically from a quad list.

    edges         : (E, 2) int64, lower index first, lexicographically sorted
    edge_faces    : (E, 2) int64, incident faces, -1 where absent
    face_edges    : (F, 4) int64, edge id of quad side (v_i, v_{i+1})
    vertex_faces  : CSR arrays (vf_indptr, vf_indices)
    neighbors     : CSR arrays (nbr_indptr, nbr_indices) over edge graph
    valence       : (V,) int64, edges incident to each vertex
    boundary_edge : (E,) bool, exactly one incident face
    boundary_vertex : (V,) bool, touches a boundary edge
    """

    n_vertices: int
    n_faces: int
    edges: np.ndarray
    edge_faces: np.ndarray
    face_edges: np.ndarray
    vf_indptr: np.ndarray
    vf_indices: np.ndarray
    nbr_indptr: np.ndarray
    nbr_indices: np.ndarray
    valence: np.ndarray
    boundary_edge: np.ndarray
    boundary_vertex: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def vertex_face_list(self, v: int) -> np.ndarray:
        return self.vf_indices[self.vf_indptr[v]:self.vf_indptr[v + 1]]

    def vertex_neighbors(self, v: int) -> np.ndarray:
        return self.nbr_indices[self.nbr_indptr[v]:self.nbr_indptr[v + 1]]


def build_connectivity(mesh: QuadMesh) -> MeshConnectivity:
    """Derive all incidence tables for a quad mesh.

    Raises NonManifoldEdge if any undirected edge has more than two
    incident faces.  DegenerateQuad is raised by QuadMesh itself.
    """
    V, F = mesh.n_vertices, mesh.n_quads
    q = mesh.quads

    # directed quad sides (v_i, v_{i+1}), canonicalized to lower-first
    sides = np.stack([q, np.roll(q, -1, axis=1)], axis=2).reshape(-1, 2)  # (4F, 2)
    canon = np.sort(sides, axis=1)
    edges, side_to_edge, counts = np.unique(
        canon, axis=0, return_inverse=True, return_counts=True
    )
    if np.any(counts > 2):
        bad = edges[np.argmax(counts > 2)]
        raise NonManifoldEdge(f"edge {tuple(bad)} has {int(counts.max())} incident faces")

    E = len(edges)
    face_edges = side_to_edge.reshape(F, 4)

    # edge -> faces (up to 2, -1 padded), filled in face order
    edge_faces = np.full((E, 2), -1, dtype=np.int64)
    face_of_side = np.repeat(np.arange(F, dtype=np.int64), 4)
    order = np.argsort(side_to_edge, kind="stable")
    sorted_edges = side_to_edge[order]
    sorted_faces = face_of_side[order]
    first = np.searchsorted(sorted_edges, np.arange(E))
    cnt = counts
    edge_faces[:, 0] = sorted_faces[first]
    has2 = cnt == 2
    edge_faces[has2, 1] = sorted_faces[first[has2] + 1]

    boundary_edge = cnt == 1

    # vertex -> faces CSR
    vf_order = np.argsort(q.ravel(), kind="stable")
    vf_indices = np.repeat(np.arange(F, dtype=np.int64), 4)[vf_order]
    vf_counts = np.bincount(q.ravel(), minlength=V)
    vf_indptr = np.concatenate([[0], np.cumsum(vf_counts)]).astype(np.int64)

    # vertex neighbors over edges CSR
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    nb_order = np.argsort(both[:, 0], kind="stable")
    nbr_indices = both[nb_order, 1]
    valence = np.bincount(edges.ravel(), minlength=V).astype(np.int64)
    nbr_indptr = np.concatenate([[0], np.cumsum(valence)]).astype(np.int64)

    boundary_vertex = np.zeros(V, dtype=bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    return MeshConnectivity(
        n_vertices=V,
        n_faces=F,
        edges=edges.astype(np.int64),
        edge_faces=edge_faces,
        face_edges=face_edges,
        vf_indptr=vf_indptr,
        vf_indices=vf_indices,
        nbr_indptr=nbr_indptr,
        nbr_indices=nbr_indices.astype(np.int64),
        valence=valence,
        boundary_edge=boundary_edge,
        boundary_vertex=boundary_vertex,
    )


def face_normals(vertices: np.ndarray, quads: np.ndarray,
                 warn_zero_area: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Unit face normals from the cross product of the quad diagonals.

    Returns (normals (F,3), valid (F,) bool); faces with cross-product
    magnitude < 1e-15 are reported and flagged invalid.
    """
    p = vertices[quads[:, 2]] - vertices[quads[:, 0]]
    r = vertices[quads[:, 3]] - vertices[quads[:, 1]]
    cross = np.cross(p, r)
    mag = np.linalg.norm(cross, axis=1)
    valid = mag >= 1e-15
    if warn_zero_area and not np.all(valid):
        warnings.warn(
            f"{int((~valid).sum())} zero-area face(s) skipped in normal computation",
            ZeroAreaFace,
        )
    normals = np.zeros_like(cross)
    normals[valid] = cross[valid] / mag[valid, None]
    return normals, valid


def vertex_normals(mesh: QuadMesh) -> np.ndarray:
    """Per-vertex unit normals: normalized sum of incident unit face normals."""
    fn, valid = face_normals(mesh.vertices, mesh.quads)
    acc = np.zeros((mesh.n_vertices, 3))
    fsel = mesh.quads[valid]
    np.add.at(acc, fsel.ravel(), np.repeat(fn[valid], 4, axis=0))
    mag = np.linalg.norm(acc, axis=1)
    nz = mag > 0
    out = np.zeros_like(acc)
    out[nz] = acc[nz] / mag[nz, None]
    return out


def uniform_laplacian_matrix(conn: MeshConnectivity) -> sparse.csr_matrix:
    """Sparse uniform graph Laplacian: (L f)_v = mean of neighbors - f_v."""
    if np.any(conn.valence == 0):
        bad = int(np.nonzero(conn.valence == 0)[0][0])
        raise IsolatedVertex(f"vertex {bad} has no incident edges")
    V = conn.n_vertices
    inv_deg = 1.0 / conn.valence
    rows = np.repeat(np.arange(V), np.diff(conn.nbr_indptr))
    data = inv_deg[rows]
    off = sparse.csr_matrix((data, (rows, conn.nbr_indices)), shape=(V, V))
    return off - sparse.identity(V, format="csr")


def uniform_laplacian_apply(conn: MeshConnectivity, field: np.ndarray) -> np.ndarray:
    """Apply the uniform Laplacian to a per-vertex field."""
    field = np.asarray(field, dtype=np.float64)
    if len(field) != conn.n_vertices:
        raise TopologyMismatch(
            f"field length {len(field)} != vertex count {conn.n_vertices}")
    return uniform_laplacian_matrix(conn) @ field


def edge_length_energy(vertices: np.ndarray, reference: np.ndarray,
                       edges: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum over edges of (|e| - |e_ref|)^2 with its exact gradient.

    `edges` is a connectivity edge list shared by both vertex sets.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if vertices.shape != reference.shape:
        raise TopologyMismatch(
            f"vertex arrays differ in shape: {vertices.shape} vs {reference.shape}")
    d = vertices[edges[:, 0]] - vertices[edges[:, 1]]
    dref = reference[edges[:, 0]] - reference[edges[:, 1]]
    ln = np.linalg.norm(d, axis=1)
    lr = np.linalg.norm(dref, axis=1)
    diff = ln - lr
    energy = float(np.dot(diff, diff))
    # d|e|/dv_a = (v_a - v_b)/|e|
    safe = np.where(ln > 0, ln, 1.0)
    coeff = (2.0 * diff / safe)[:, None] * d
    grad = np.zeros_like(vertices)
    np.add.at(grad, edges[:, 0], coeff)
    np.add.at(grad, edges[:, 1], -coeff)
    return energy, grad


def edge_length_energy_mesh(mesh: QuadMesh, reference: QuadMesh) -> tuple[float, np.ndarray]:
    """edge_length_energy on two meshes that must share topology."""
    if mesh.quads.shape != reference.quads.shape or np.any(mesh.quads != reference.quads):
        raise TopologyMismatch("meshes do not share quad topology")
    conn = build_connectivity(mesh)
    return edge_length_energy(mesh.vertices, reference.vertices, conn.edges)
