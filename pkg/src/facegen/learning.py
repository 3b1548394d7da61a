"""Identity-basis learning: the lifted joint minimization over per-scan
parameters and the identity blendshapes.

The loss couples a vertex + normal data term with 4th-order barriers on
expression/pose coefficients, least-squares penalties on identity
coefficients and basis norms, a mesh-Laplacian smoothness penalty on the
basis fields, and an edge-length degeneracy penalty on the generated
meshes.  Every gradient is analytic; the finite-difference suite in the
tests is the authority on their correctness.

Scans are sorted canonically by id before any reduction, so the loss and
all shared-block gradients are bitwise invariant under permuting the
scan order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .adam import AdamState, adam_step
from .errors import DimensionMismatch, Diverged, InvalidParam, TopologyMismatch
from .mesh import QuadMesh, build_connectivity, uniform_laplacian_matrix, vertex_normals
from .model import (
    BlendshapeModel,
    ModelParams,
    Pose,
    evaluate_unposed,
    euler_xyz,
    euler_xyz_grad,
    lbs_apply,
    pose_derivatives,
)

GLOBAL_ROT_LIMITS = (-np.pi, np.pi)


@dataclass(frozen=True)
class ScanSet:
    """Registered scans sharing the template topology, with id labels."""

    vertices: np.ndarray          # (N, V, 3)
    quads: np.ndarray             # (F, 4) shared topology
    ids: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        q = np.asarray(self.quads, dtype=np.int64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise DimensionMismatch(f"scan vertices must be (N, V, 3), got {v.shape}")
        if len(self.ids) != v.shape[0]:
            raise DimensionMismatch("one id per scan required")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidParam("scan ids must be unique")
        if v.shape[0] < 1:
            raise InvalidParam("need at least one scan")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "quads", q)
        object.__setattr__(self, "ids", tuple(self.ids))

    @classmethod
    def from_meshes(cls, meshes: list[QuadMesh], ids: list[str] | None = None) -> "ScanSet":
        if not meshes:
            raise InvalidParam("need at least one scan")
        quads = meshes[0].quads
        for m in meshes[1:]:
            if m.quads.shape != quads.shape or np.any(m.quads != quads):
                raise TopologyMismatch("scans do not share topology")
        if ids is None:
            ids = [f"scan_{i:04d}" for i in range(len(meshes))]
        return cls(np.stack([m.vertices for m in meshes]), quads, tuple(ids))

    @property
    def n_scans(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative term weights; data term dominant, barriers stiff, priors gentle."""

    w_vertex: float = 1.0
    w_normal: float = 0.1
    w_barrier_expr: float = 10.0
    w_barrier_pose: float = 10.0
    w_id_coeff: float = 1e-4
    w_id_basis: float = 1e-4
    w_laplacian: float = 1e-2
    w_edge: float = 1e-3

    def __post_init__(self):
        for name in ("w_vertex", "w_normal", "w_barrier_expr", "w_barrier_pose",
                     "w_id_coeff", "w_id_basis", "w_laplacian", "w_edge"):
            if getattr(self, name) < 0:
                raise InvalidParam(f"{name} must be nonnegative")


def barrier4(x, lo: float, hi: float):
    """4th-order polynomial barrier: 0 on [lo, hi], quartic growth outside.

    Returns (value, derivative); C^3 at the boundaries.  Accepts scalars
    or arrays elementwise.
    """
    if lo >= hi:
        raise InvalidParam("barrier needs lo < hi")
    x = np.asarray(x, dtype=np.float64)
    above = np.maximum(x - hi, 0.0)
    below = np.maximum(lo - x, 0.0)
    val = above ** 4 + below ** 4
    der = 4.0 * above ** 3 - 4.0 * below ** 3
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


# ---------------------------------------------------------------------------
# topology caches: sparse operators reused across loss evaluations
# ---------------------------------------------------------------------------

class _MeshOps:
    """Sparse scatter/gather operators derived from the shared topology."""

    def __init__(self, quads: np.ndarray, n_vertices: int):
        self.quads = np.asarray(quads, dtype=np.int64)
        self.n_vertices = n_vertices
        F = len(self.quads)
        ones = np.ones(F)
        cols = np.arange(F)
        self.corner = [
            sparse.csr_matrix((ones, (self.quads[:, c], cols)), shape=(n_vertices, F))
            for c in range(4)
        ]
        self.accum = (self.corner[0] + self.corner[1]
                      + self.corner[2] + self.corner[3]).tocsr()
        conn = build_connectivity(QuadMesh(np.zeros((n_vertices, 3)), self.quads))
        self.edges = conn.edges
        E = len(self.edges)
        data = np.concatenate([np.ones(E), -np.ones(E)])
        rows = np.concatenate([np.arange(E), np.arange(E)])
        vcols = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        self.incidence = sparse.csr_matrix((data, (rows, vcols)), shape=(E, n_vertices))
        self.laplacian = uniform_laplacian_matrix(conn)
        self.lap_gram = (self.laplacian.T @ self.laplacian).tocsr()


def _batched_spmm(A: sparse.csr_matrix, x: np.ndarray) -> np.ndarray:
    """A @ x over the middle axis of x (N, K, 3) -> (N, A.shape[0], 3)."""
    N, K, C = x.shape
    flat = x.transpose(1, 0, 2).reshape(K, N * C)
    out = A @ flat
    return out.reshape(A.shape[0], N, C).transpose(1, 0, 2)


def _normal_term(y: np.ndarray, target_normals: np.ndarray,
                 ops: _MeshOps) -> tuple[np.ndarray, np.ndarray]:
    """Mean (1 - cos angle) between generated and target vertex normals.

    Returns (per-scan values (N,), gradient d/dy of the per-scan sums
    divided by V, shape (N, V, 3)).  Degenerate faces and zero-normal
    vertices contribute value 1 with zero gradient, matching
    mesh.vertex_normals.
    """
    q = ops.quads
    V = ops.n_vertices
    p = y[:, q[:, 2]] - y[:, q[:, 0]]
    r = y[:, q[:, 3]] - y[:, q[:, 1]]
    u = np.cross(p, r)
    umag = np.linalg.norm(u, axis=2)
    uvalid = umag >= 1e-15
    uinv = np.where(uvalid, 1.0 / np.where(uvalid, umag, 1.0), 0.0)
    nhat = u * uinv[..., None]

    mvec = _batched_spmm(ops.accum, nhat)
    mmag = np.linalg.norm(mvec, axis=2)
    mvalid = mmag >= 1e-15
    minv = np.where(mvalid, 1.0 / np.where(mvalid, mmag, 1.0), 0.0)
    n = mvec * minv[..., None]

    cos = np.einsum("nva,nva->nv", n, target_normals)
    values = 1.0 - cos.mean(axis=1)

    # adjoint: d/dn of sum_v (1 - n.c)/V is -c/V
    g_n = -target_normals / V
    g_m = (g_n - n * np.einsum("nva,nva->nv", n, g_n)[..., None]) * minv[..., None]
    g_nhat = _batched_spmm(ops.accum.T.tocsr(), g_m)
    g_u = (g_nhat - nhat * np.einsum("nfa,nfa->nf", nhat, g_nhat)[..., None]) \
        * uinv[..., None]
    g_p = np.cross(r, g_u)
    g_r = np.cross(g_u, p)
    grad = (_batched_spmm(ops.corner[2], g_p) - _batched_spmm(ops.corner[0], g_p)
            + _batched_spmm(ops.corner[3], g_r) - _batched_spmm(ops.corner[1], g_r))
    return values, grad


def _edge_term(y: np.ndarray, ref_lengths: np.ndarray,
               ops: _MeshOps) -> tuple[np.ndarray, np.ndarray]:
    """Per-scan edge-length energy against reference lengths, with gradient."""
    d = _batched_spmm(ops.incidence, y)
    ln = np.linalg.norm(d, axis=2)
    diff = ln - ref_lengths
    values = np.einsum("ne,ne->n", diff, diff)
    safe = np.where(ln > 0, ln, 1.0)
    coeff = (2.0 * diff / safe)[..., None] * d
    grad = _batched_spmm(ops.incidence.T.tocsr(), coeff)
    return values, grad


def data_term(generated: np.ndarray, target: QuadMesh,
              w_vertex: float = 1.0, w_normal: float = 0.1) -> tuple[float, np.ndarray]:
    """Vertex + normal distance between generated positions and a target mesh.

    value = w_vertex * mean ||y - t||^2 + w_normal * mean (1 - cos angle)
    Returns (value, gradient w.r.t. generated), gradient flowing through
    the generated normals.
    """
    generated = np.asarray(generated, dtype=np.float64)
    if generated.shape != target.vertices.shape:
        raise TopologyMismatch(
            f"generated {generated.shape} vs target {target.vertices.shape}")
    ops = _MeshOps(target.quads, target.n_vertices)
    tn = vertex_normals(target)
    y = generated[None]
    V = target.n_vertices
    diff = generated - target.vertices
    v_val = float(np.einsum("va,va->", diff, diff)) / V
    n_vals, n_grad = _normal_term(y, tn[None], ops)
    value = w_vertex * v_val + w_normal * float(n_vals[0])
    grad = w_vertex * (2.0 / V) * diff + w_normal * n_grad[0]
    return value, grad


# ---------------------------------------------------------------------------
# total loss over all scans
# ---------------------------------------------------------------------------

@dataclass
class ThetaBlocks:
    """Per-scan parameters packed as arrays for the optimizer."""

    alpha: np.ndarray          # (N, m)
    beta: np.ndarray           # (N, n_expr)
    joint_angles: np.ndarray   # (N, 4, 3)
    global_rot: np.ndarray     # (N, 3)
    global_trans: np.ndarray   # (N, 3)

    @classmethod
    def zeros(cls, n: int, m: int, n_expr: int) -> "ThetaBlocks":
        return cls(np.zeros((n, m)), np.zeros((n, n_expr)),
                   np.zeros((n, 4, 3)), np.zeros((n, 3)), np.zeros((n, 3)))

    @classmethod
    def from_params(cls, thetas: list[ModelParams]) -> "ThetaBlocks":
        return cls(np.stack([t.alpha for t in thetas]),
                   np.stack([t.beta for t in thetas]),
                   np.stack([t.gamma.joint_angles for t in thetas]),
                   np.stack([t.gamma.global_rot for t in thetas]),
                   np.stack([t.gamma.global_trans for t in thetas]))

    def to_params(self) -> list[ModelParams]:
        return [ModelParams(self.alpha[k], self.beta[k],
                            Pose(self.joint_angles[k], self.global_rot[k],
                                 self.global_trans[k]))
                for k in range(len(self.alpha))]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"alpha": self.alpha, "beta": self.beta,
                "joint_angles": self.joint_angles,
                "global_rot": self.global_rot, "global_trans": self.global_trans}


@dataclass
class LossResult:
    total: float
    breakdown: dict[str, float]
    grads: dict[str, np.ndarray]   # phi + the ThetaBlocks keys


def total_loss(thetas: ThetaBlocks | list[ModelParams], phi: np.ndarray,
               scans: ScanSet, weights: LossWeights,
               base: BlendshapeModel, ops: _MeshOps | None = None,
               target_normals: np.ndarray | None = None,
               ref_edge_lengths: np.ndarray | None = None) -> LossResult:
    """Full learning loss and analytic gradients for every parameter block.

    `base` supplies template, expression basis, skeleton and skinning
    weights (all held fixed); `phi` is the identity basis being learned.
    """
    if isinstance(thetas, list):
        thetas = ThetaBlocks.from_params(thetas)
    phi = np.asarray(phi, dtype=np.float64)
    N = scans.n_scans
    V = scans.n_vertices
    m = phi.shape[0]
    if phi.shape[1:] != (V, 3):
        raise DimensionMismatch(f"phi must be (m, {V}, 3), got {phi.shape}")
    if thetas.alpha.shape != (N, m):
        raise DimensionMismatch(
            f"alpha blocks {thetas.alpha.shape} inconsistent with (N={N}, m={m})")
    if base.template.n_vertices != V:
        raise DimensionMismatch("base template does not match scan vertex count")

    # canonical scan order: every reduction below runs in sorted-id order
    order = np.argsort(np.asarray(scans.ids))
    inv_order = np.argsort(order)

    if ops is None:
        ops = _MeshOps(scans.quads, V)
    if target_normals is None:
        target_normals = np.stack([
            vertex_normals(QuadMesh(scans.vertices[k], scans.quads))
            for k in range(N)])
    if ref_edge_lengths is None:
        d = base.template.vertices[ops.edges[:, 0]] - base.template.vertices[ops.edges[:, 1]]
        ref_edge_lengths = np.linalg.norm(d, axis=1)

    alpha = thetas.alpha[order]
    beta = thetas.beta[order]
    joint_angles = thetas.joint_angles[order]
    global_rot = thetas.global_rot[order]
    global_trans = thetas.global_trans[order]
    targets = scans.vertices[order]
    tnormals = target_normals[order]

    model = replace(base, identity_basis=phi)
    w = base.skinning_weights
    skel = base.skeleton

    # forward
    vbar = evaluate_unposed(model, alpha, beta)                    # (N, V, 3)
    der = pose_derivatives(skel, alpha, joint_angles)
    v_out = lbs_apply(w, der.R_w, der.b_w, vbar)
    R_g = euler_xyz(global_rot)
    dR_g = euler_xyz_grad(global_rot)
    y = np.einsum("nab,nvb->nva", R_g, v_out) + global_trans[:, None, :]

    # data terms
    diff = y - targets
    vert_vals = np.einsum("nva,nva->n", diff, diff) / V
    norm_vals, norm_grad_y = _normal_term(y, tnormals, ops)
    term_vertex = weights.w_vertex * float(vert_vals.sum())
    term_normal = weights.w_normal * float(norm_vals.sum())

    # edge-degeneracy term against template edge lengths
    edge_vals, edge_grad_y = _edge_term(y, ref_edge_lengths, ops)
    term_edge = weights.w_edge * float(edge_vals.sum())

    # barriers
    bexpr_val, bexpr_der = barrier4(beta, 0.0, 1.0)
    term_bexpr = weights.w_barrier_expr * float(bexpr_val.sum())
    lo = skel.limits[..., 0]
    hi = skel.limits[..., 1]
    above = np.maximum(joint_angles - hi, 0.0)
    below = np.maximum(lo - joint_angles, 0.0)
    bpose_val = above ** 4 + below ** 4
    bpose_der = 4.0 * above ** 3 - 4.0 * below ** 3
    bglob_val, bglob_der = barrier4(global_rot, *GLOBAL_ROT_LIMITS)
    term_bpose = weights.w_barrier_pose * float(bpose_val.sum() + bglob_val.sum())

    # priors
    term_id_coeff = weights.w_id_coeff * float(np.einsum("nq,nq->", alpha, alpha))
    term_id_basis = weights.w_id_basis * float(np.einsum("qva,qva->", phi, phi))
    phi_flat = phi.transpose(1, 0, 2).reshape(V, m * 3)
    lap_phi = ops.laplacian @ phi_flat
    term_lap = weights.w_laplacian * float(np.einsum("ij,ij->", lap_phi, lap_phi))

    total = (term_vertex + term_normal + term_bexpr + term_bpose
             + term_id_coeff + term_id_basis + term_lap + term_edge)

    # ---- backward ----------------------------------------------------
    dLdy = (weights.w_vertex * (2.0 / V) * diff
            + weights.w_normal * norm_grad_y
            + weights.w_edge * edge_grad_y)

    g_gtrans = dLdy.sum(axis=1)
    M_g = np.einsum("nva,nvb->nab", dLdy, v_out)
    g_grot = np.einsum("nkab,nab->nk", dR_g, M_g) \
        + weights.w_barrier_pose * bglob_der
    dLdv_out = np.einsum("nva,nab->nvb", dLdy, R_g)

    s = np.einsum("vi,nva->nia", w, dLdv_out)
    M = np.einsum("vi,nva,nvb->niab", w, dLdv_out, vbar)
    g_angles = (np.einsum("nijkab,niab->njk", der.dR_w, M)
                + np.einsum("nijka,nia->njk", der.db_w, s)
                + weights.w_barrier_pose * bpose_der)
    g_pivot = np.einsum("nijab,nia->njb", der.db_dpiv, s)

    # adjoint of the delta-form LBS: g + sum_i w_vi (R_i - I)^T g
    dLdvbar = dLdv_out + np.einsum(
        "vi,niab,nva->nvb", w, der.R_w - np.eye(3), dLdv_out)
    g_alpha = (np.einsum("nvb,qvb->nq", dLdvbar, phi)
               + np.einsum("njb,jbq->nq", g_pivot, skel.a)
               + weights.w_id_coeff * 2.0 * alpha)
    g_beta = (np.einsum("nvb,qvb->nq", dLdvbar, base.expression_basis)
              + weights.w_barrier_expr * bexpr_der)
    g_phi = (np.einsum("nq,nvb->qvb", alpha, dLdvbar)
             + weights.w_id_basis * 2.0 * phi
             + weights.w_laplacian * 2.0
             * (ops.lap_gram @ phi_flat).reshape(V, m, 3).transpose(1, 0, 2))

    breakdown = {
        "data_vertex": term_vertex,
        "data_normal": term_normal,
        "barrier_expr": term_bexpr,
        "barrier_pose": term_bpose,
        "id_coeff": term_id_coeff,
        "id_basis": term_id_basis,
        "laplacian": term_lap,
        "edge": term_edge,
    }
    grads = {
        "phi": g_phi,
        "alpha": g_alpha[inv_order],
        "beta": g_beta[inv_order],
        "joint_angles": g_angles[inv_order],
        "global_rot": g_grot[inv_order],
        "global_trans": g_gtrans[inv_order],
    }
    return LossResult(total=float(total), breakdown=breakdown, grads=grads)


# ---------------------------------------------------------------------------
# fit driver
# ---------------------------------------------------------------------------

@dataclass
class FitSchedule:
    iterations: int = 2000
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_window: int = 50
    early_stop_rel: float = 1e-7
    init: str = "pca"          # or "random"
    init_sigma: float = 1e-3
    freeze_beta: bool = False
    freeze_pose: bool = False


@dataclass
class FitReport:
    trajectory: list[float]
    term_trajectory: list[dict[str, float]]
    breakdown: dict[str, float]
    per_scan_rms: np.ndarray
    iterations: int
    wall_time_s: float
    final_alphas: np.ndarray
    stopped_early: bool

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "stopped_early": self.stopped_early,
            "breakdown": self.breakdown,
            "per_scan_rms": [float(x) for x in self.per_scan_rms],
            "final_loss": self.trajectory[-1] if self.trajectory else None,
            "trajectory": self.trajectory,
        }

    def trajectory_csv(self) -> str:
        terms = sorted(self.term_trajectory[0]) if self.term_trajectory else []
        lines = ["iteration,total" + "".join(f",{t}" for t in terms)]
        for i, v in enumerate(self.trajectory):
            row = f"{i},{v!r}"
            for t in terms:
                row += f",{self.term_trajectory[i][t]!r}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def _init_phi(scans: ScanSet, template: np.ndarray, m: int,
              schedule: FitSchedule, rng: np.random.Generator) -> np.ndarray:
    N, V = scans.n_scans, scans.n_vertices
    if schedule.init == "random":
        return schedule.init_sigma * rng.standard_normal((m, V, 3))
    disp = (scans.vertices - template).reshape(N, V * 3)
    # uncentered SVD: the model is linear (no affine offset beyond the template)
    _, svals, vt = np.linalg.svd(disp, full_matrices=False)
    k = min(m, len(svals))
    phi = np.zeros((m, V * 3))
    phi[:k] = 0.9 * (svals[:k, None] / np.sqrt(N)) * vt[:k]
    return phi.reshape(m, V, 3)


def fit(scans: ScanSet, m: int, weights: LossWeights | None = None,
        schedule: FitSchedule | None = None, seed: int = 0,
        base: BlendshapeModel | None = None) -> tuple[BlendshapeModel, FitReport]:
    """Learn the identity basis jointly with per-scan parameters.

    Expression basis and skeleton are held fixed.  When no base model is
    given, a desk-scale default is synthesized: template = mean scan,
    zero expression basis, procedural skeleton and skinning weights.
    Deterministic for a fixed seed.
    """
    weights = weights or LossWeights()
    schedule = schedule or FitSchedule()
    if scans.n_scans < 2:
        raise InvalidParam("fit needs at least 2 scans")
    if m > scans.n_scans:
        raise InvalidParam("identity basis size m must not exceed the scan count")
    rng = np.random.default_rng(seed)

    if base is None:
        from .procedural import default_base_model
        base = default_base_model(scans, m)
    if base.n_identity != m:
        raise DimensionMismatch(
            f"base model expects m={base.n_identity}, fit called with m={m}")

    V = scans.n_vertices
    N = scans.n_scans
    ops = _MeshOps(scans.quads, V)
    target_normals = np.stack([
        vertex_normals(QuadMesh(scans.vertices[k], scans.quads)) for k in range(N)])
    d = base.template.vertices[ops.edges[:, 0]] - base.template.vertices[ops.edges[:, 1]]
    ref_edge_lengths = np.linalg.norm(d, axis=1)

    phi = _init_phi(scans, base.template.vertices, m, schedule, rng)
    theta = ThetaBlocks.zeros(N, m, base.n_expression)

    params = {"phi": phi, **theta.as_dict()}
    frozen = set()
    if schedule.freeze_beta:
        frozen.add("beta")
    if schedule.freeze_pose:
        frozen.update({"joint_angles", "global_rot", "global_trans"})

    state = AdamState()
    trajectory: list[float] = []
    term_trajectory: list[dict[str, float]] = []
    stopped_early = False
    t0 = time.perf_counter()
    res = None
    for it in range(schedule.iterations):
        theta = ThetaBlocks(params["alpha"], params["beta"], params["joint_angles"],
                            params["global_rot"], params["global_trans"])
        res = total_loss(theta, params["phi"], scans, weights, base,
                         ops=ops, target_normals=target_normals,
                         ref_edge_lengths=ref_edge_lengths)
        if not np.isfinite(res.total):
            raise Diverged(it)
        trajectory.append(res.total)
        term_trajectory.append(res.breakdown)
        grads = {k: g for k, g in res.grads.items() if k not in frozen}
        params = adam_step(state, params, grads, schedule.lr,
                           schedule.beta1, schedule.beta2, schedule.eps)
        win = schedule.early_stop_window
        if it >= win:
            prev = trajectory[-win - 1]
            if prev - trajectory[-1] < schedule.early_stop_rel * abs(prev):
                stopped_early = True
                break
    wall = time.perf_counter() - t0

    theta = ThetaBlocks(params["alpha"], params["beta"], params["joint_angles"],
                        params["global_rot"], params["global_trans"])
    final = total_loss(theta, params["phi"], scans, weights, base,
                       ops=ops, target_normals=target_normals,
                       ref_edge_lengths=ref_edge_lengths)
    model = replace(base, identity_basis=params["phi"])

    posed = _forward_vertices(model, theta)
    rms = np.sqrt(np.mean(np.sum((posed - scans.vertices) ** 2, axis=2), axis=1))
    report = FitReport(
        trajectory=trajectory,
        term_trajectory=term_trajectory,
        breakdown=final.breakdown,
        per_scan_rms=rms,
        iterations=len(trajectory),
        wall_time_s=wall,
        final_alphas=params["alpha"].copy(),
        stopped_early=stopped_early,
    )
    return model, report


def _forward_vertices(model: BlendshapeModel, theta: ThetaBlocks) -> np.ndarray:
    vbar = evaluate_unposed(model, theta.alpha, theta.beta)
    der = pose_derivatives(model.skeleton, theta.alpha, theta.joint_angles)
    v_out = lbs_apply(model.skinning_weights, der.R_w, der.b_w, vbar)
    R_g = euler_xyz(theta.global_rot)
    return np.einsum("nab,nvb->nva", R_g, v_out) + theta.global_trans[:, None, :]


def project_identity(model: BlendshapeModel, scan_vertices: np.ndarray,
                     ridge: float = 0.0) -> np.ndarray:
    """Least-squares identity coefficients for a registered neutral scan."""
    V = model.n_vertices
    A = model.identity_basis.reshape(model.n_identity, V * 3).T
    b = (np.asarray(scan_vertices, dtype=np.float64)
         - model.template.vertices).ravel()
    if ridge > 0:
        AtA = A.T @ A + ridge * np.eye(A.shape[1])
        return np.linalg.solve(AtA, A.T @ b)
    return np.linalg.lstsq(A, b, rcond=None)[0]
