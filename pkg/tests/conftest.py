"""Shared helpers: procedural meshes, tiny models and grooms for tests."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from facegen.learning import LossWeights, ScanSet, ThetaBlocks, total_loss
from facegen.mesh import QuadMesh
from facegen.model import BlendshapeModel, Skeleton
from facegen.procedural import (
    cube_mesh,
    quad_grid,
    softmax_skinning_weights,
    torus_mesh,
)
from facegen.eyes import quad_uv_sphere


def random_closed_mesh(rng: np.random.Generator) -> QuadMesh:
    """A random closed manifold quad mesh (cube, torus or quad sphere),
    with jittered vertices."""
    kind = rng.integers(3)
    if kind == 0:
        mesh = cube_mesh(size=float(rng.uniform(0.5, 2.0)))
        jitter = 0.05
    elif kind == 1:
        mesh = torus_mesh(int(rng.integers(4, 10)), int(rng.integers(4, 8)),
                          R=float(rng.uniform(0.8, 1.5)), r=float(rng.uniform(0.2, 0.4)))
        jitter = 0.02
    else:
        mesh = quad_uv_sphere(float(rng.uniform(0.5, 1.5)),
                              int(rng.integers(4, 9)), 2 * int(rng.integers(2, 6)))
        jitter = 0.02
    v = mesh.vertices + jitter * rng.standard_normal(mesh.vertices.shape)
    return QuadMesh(v, mesh.quads)


def brute_force_vertex_normals(mesh: QuadMesh) -> np.ndarray:
    """Per-vertex normals by direct loops, independent of mesh.vertex_normals."""
    fn = []
    for q in mesh.quads:
        d1 = mesh.vertices[q[2]] - mesh.vertices[q[0]]
        d2 = mesh.vertices[q[3]] - mesh.vertices[q[1]]
        c = np.cross(d1, d2)
        n = np.linalg.norm(c)
        fn.append(c / n if n >= 1e-15 else np.zeros(3))
    out = np.zeros((mesh.n_vertices, 3))
    for fi, q in enumerate(mesh.quads):
        for v in q:
            out[v] += fn[fi]
    for v in range(mesh.n_vertices):
        n = np.linalg.norm(out[v])
        if n > 0:
            out[v] /= n
    return out


def tiny_problem(rng: np.random.Generator, V_grid=(3, 4), n_scans=2, m=2,
                 n_expr=4, with_pose=True):
    """Small random learning instance used by the gradient suites.

    Returns (base model, scan set, theta blocks, phi)."""
    nx, ny = V_grid
    V = (nx + 1) * (ny + 1)
    grid = quad_grid(nx, ny, spacing=0.05)
    template = QuadMesh(grid.vertices + 0.004 * rng.standard_normal((V, 3)),
                        grid.quads)
    t0 = rng.uniform(-0.05, 0.2, (4, 3))
    a = 0.02 * rng.standard_normal((4, 3, m))
    limits = np.stack([np.full((4, 3), -1.0), np.full((4, 3), 1.0)], axis=-1)
    skel = Skeleton(t0, a, limits)
    weights = softmax_skinning_weights(template.vertices, t0, 0.1)
    base = BlendshapeModel(
        template,
        0.01 * rng.standard_normal((m, V, 3)),
        0.01 * rng.standard_normal((n_expr, V, 3)),
        skel, weights)
    scans = ScanSet(template.vertices + 0.01 * rng.standard_normal((n_scans, V, 3)),
                    grid.quads,
                    tuple(f"scan_{i}" for i in range(n_scans)))
    pose_scale = 0.2 if with_pose else 0.0
    theta = ThetaBlocks(
        alpha=0.5 * rng.standard_normal((n_scans, m)),
        beta=rng.uniform(0.05, 0.95, (n_scans, n_expr)),
        joint_angles=pose_scale * rng.standard_normal((n_scans, 4, 3)),
        global_rot=pose_scale * rng.standard_normal((n_scans, 3)),
        global_trans=0.1 * pose_scale * rng.standard_normal((n_scans, 3)),
    )
    phi = 0.01 * rng.standard_normal((m, V, 3))
    return base, scans, theta, phi


def fd_gradient_check(base, scans, theta, phi, weights=None, h=1e-6):
    """Max relative error between analytic gradients and central finite
    differences, over every parameter block."""
    weights = weights or LossWeights()
    from facegen.learning import _MeshOps
    ops = _MeshOps(scans.quads, scans.n_vertices)
    kw = dict(ops=ops)
    res = total_loss(theta, phi, scans, weights, base, **kw)

    def loss(th, ph):
        return total_loss(th, ph, scans, weights, base, **kw).total

    worst = 0.0
    for name in ("phi", "alpha", "beta", "joint_angles", "global_rot",
                 "global_trans"):
        arr = phi if name == "phi" else getattr(theta, name)
        fd = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            ap = arr.copy(); ap[ix] += h
            am = arr.copy(); am[ix] -= h
            if name == "phi":
                fp, fm = loss(theta, ap), loss(theta, am)
            else:
                fp = loss(dataclasses.replace(theta, **{name: ap}), phi)
                fm = loss(dataclasses.replace(theta, **{name: am}), phi)
            fd[ix] = (fp - fm) / (2.0 * h)
        denom = max(np.abs(fd).max(), 1e-10)
        worst = max(worst, float(np.abs(res.grads[name] - fd).max() / denom))
    return worst


def clustered_groom(rng: np.random.Generator, n_strands=200, R=16,
                    n_clusters=8, scale=0.1):
    """Procedural groom with texel-clustered roots and a smooth curved
    strand field; designed so encode/decode roundtrips are meaningful."""
    from facegen.hair import Groom

    texels = rng.choice(R * R, size=n_clusters, replace=False)
    iu, iv = texels // R, texels % R
    per = n_strands // n_clusters
    counts = np.full(n_clusters, per)
    counts[: n_strands - per * n_clusters] += 1

    lean = rng.uniform(-0.3, 0.3, size=2)
    strands = []
    uvs = []
    for c in range(n_clusters):
        length = rng.uniform(0.4, 0.8) * scale
        for _ in range(counts[c]):
            u = (iu[c] + rng.integers(1, 1024) / 1024.0) / R
            v = (iv[c] + rng.integers(1, 1024) / 1024.0) / R
            uvs.append((u, v))
            root = np.array([u * scale, v * scale, 0.0])
            npts = 12
            h = length / npts
            p = root.copy()
            pts = [p.copy()]
            for s in range(npts):
                t = s / npts
                d = np.array([lean[0] * t, lean[1] * t, 1.0])
                d /= np.linalg.norm(d)
                p = p + h * d
                pts.append(p.copy())
            strands.append(np.asarray(pts))
    return Groom(tuple(strands), np.asarray(uvs))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
