"""Catmull-Clark subdivision for quad meshes.

One level inserts a face point per face and an edge point per edge and
repositions every original vertex, producing V + E + F vertices and 4F
quads.  Boundary edges and vertices follow the cubic B-spline curve
rules; boundary vertices with other than two boundary edges are pinned.

New vertex layout: [original vertices (repositioned) | face points |
edge points], so original vertex indices stay stable across levels.
"""

from __future__ import annotations

import numpy as np

from .mesh import MeshConnectivity, QuadMesh, build_connectivity


def subdivide_catmull_clark(mesh: QuadMesh, levels: int) -> QuadMesh:
    """Apply `levels` rounds of Catmull-Clark subdivision (levels >= 0)."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    out = mesh
    for _ in range(levels):
        out = _subdivide_once(out)
    return out


def _subdivide_once(mesh: QuadMesh) -> QuadMesh:
    conn = build_connectivity(mesh)
    V, E, F = conn.n_vertices, conn.n_edges, conn.n_faces
    verts = mesh.vertices
    quads = mesh.quads

    face_pts = verts[quads].mean(axis=1)  # centroids

    # edge points: interior = (v0 + v1 + f0 + f1)/4, boundary = midpoint
    emid = 0.5 * (verts[conn.edges[:, 0]] + verts[conn.edges[:, 1]])
    edge_pts = np.empty((E, 3))
    interior = ~conn.boundary_edge
    f0 = conn.edge_faces[interior, 0]
    f1 = conn.edge_faces[interior, 1]
    edge_pts[interior] = 0.25 * (
        verts[conn.edges[interior, 0]] + verts[conn.edges[interior, 1]]
        + face_pts[f0] + face_pts[f1]
    )
    edge_pts[conn.boundary_edge] = emid[conn.boundary_edge]

    vertex_pts = _vertex_points(conn, verts, face_pts, emid)

    new_verts = np.concatenate([vertex_pts, face_pts, edge_pts], axis=0)

    # per face corner i: (v_i, e(v_i, v_{i+1}), f, e(v_{i-1}, v_i))
    fp = V + np.arange(F, dtype=np.int64)
    e_next = V + F + conn.face_edges              # edge of side (v_i, v_{i+1})
    e_prev = np.roll(e_next, 1, axis=1)           # edge of side (v_{i-1}, v_i)
    new_quads = np.stack(
        [quads, e_next, np.broadcast_to(fp[:, None], quads.shape), e_prev],
        axis=2,
    ).reshape(-1, 4)

    new_uvs = None
    if mesh.uvs is not None:
        new_uvs = _subdivide_uvs(mesh.uvs)

    return QuadMesh(new_verts, new_quads, new_uvs)


def _vertex_points(conn: MeshConnectivity, verts: np.ndarray,
                   face_pts: np.ndarray, emid: np.ndarray) -> np.ndarray:
    V = conn.n_vertices
    out = verts.copy()

    boundary = conn.boundary_vertex
    interior = ~boundary

    if np.any(interior):
        # Q/n + 2R/n + S(n-3)/n with n the valence, Q the mean incident
        # face point, R the mean incident edge midpoint
        q_acc = np.zeros((V, 3))
        row_vertex = np.repeat(np.arange(V), np.diff(conn.vf_indptr))
        np.add.at(q_acc, row_vertex, face_pts[conn.vf_indices])
        r_acc = np.zeros((V, 3))
        np.add.at(r_acc, conn.edges[:, 0], emid)
        np.add.at(r_acc, conn.edges[:, 1], emid)

        n_faces_per_v = np.diff(conn.vf_indptr)
        n = conn.valence.astype(np.float64)
        idx = interior & (n > 0)
        # interior manifold vertices have n incident faces == n incident edges
        q = q_acc[idx] / n_faces_per_v[idx, None]
        r = r_acc[idx] / n[idx, None]
        s = verts[idx]
        out[idx] = (q + 2.0 * r + (n[idx, None] - 3.0) * s) / n[idx, None]

    if np.any(boundary):
        # crease rule (6S + b0 + b1)/8 using the two boundary neighbors
        bedges = conn.edges[conn.boundary_edge]
        bv = np.nonzero(boundary)[0]
        acc = np.zeros((V, 3))
        cnt = np.zeros(V, dtype=np.int64)
        for a, b in ((0, 1), (1, 0)):
            np.add.at(acc, bedges[:, a], verts[bedges[:, b]])
            np.add.at(cnt, bedges[:, a], 1)
        two = cnt[bv] == 2
        sel = bv[two]
        out[sel] = (6.0 * verts[sel] + acc[sel]) / 8.0
        # vertices on more than two boundary edges stay pinned
    return out


def _subdivide_uvs(uvs: np.ndarray) -> np.ndarray:
    """Face-varying linear refinement of per-corner UVs."""
    F = uvs.shape[0]
    corner = uvs
    nxt = np.roll(uvs, -1, axis=1)
    prv = np.roll(uvs, 1, axis=1)
    mid_next = 0.5 * (corner + nxt)
    mid_prev = 0.5 * (corner + prv)
    center = uvs.mean(axis=1, keepdims=True)
    center = np.broadcast_to(center, (F, 4, 2))
    out = np.stack([corner, mid_next, center, mid_prev], axis=2)  # (F, 4, 4, 2)
    return out.reshape(-1, 4, 2)
