"""Articulated parametric face model.

The unposed head is a template plus linear combinations of identity and
expression displacement fields.  Pose is linear-blend skinning over a
4-joint skeleton (neck root; jaw and both eyes parented to it) whose
pivots move linearly with the identity coefficients, followed by one
global rigid transform.  Euler angles use the intrinsic XYZ convention:
R = Rx(a) @ Ry(b) @ Rz(c).

All evaluation functions accept arbitrary leading batch dimensions on
the coefficient arrays and are pure; models are immutable after load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParam, PoseLimitViolation
from .mesh import QuadMesh

JOINT_NAMES = ("neck", "jaw", "eye_left", "eye_right")
JOINT_PARENTS = (-1, 0, 0, 0)


def euler_xyz(angles: np.ndarray) -> np.ndarray:
    """Rotation matrices for intrinsic-XYZ Euler angles, shape (..., 3) -> (..., 3, 3)."""
    angles = np.asarray(angles, dtype=np.float64)
    a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = cb * cc
    R[..., 0, 1] = -cb * sc
    R[..., 0, 2] = sb
    R[..., 1, 0] = ca * sc + cc * sa * sb
    R[..., 1, 1] = ca * cc - sa * sb * sc
    R[..., 1, 2] = -cb * sa
    R[..., 2, 0] = sa * sc - ca * cc * sb
    R[..., 2, 1] = cc * sa + ca * sb * sc
    R[..., 2, 2] = ca * cb
    return R


def euler_xyz_grad(angles: np.ndarray) -> np.ndarray:
    """d(euler_xyz)/d(angle_k), shape (..., 3) -> (..., 3, 3, 3), axis -3 indexes k."""
    angles = np.asarray(angles, dtype=np.float64)
    a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
    z = np.zeros_like(a)
    o = np.ones_like(a)
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)

    def mat(rows):
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    Rx = mat([[o, z, z], [z, ca, -sa], [z, sa, ca]])
    Ry = mat([[cb, z, sb], [z, o, z], [-sb, z, cb]])
    Rz = mat([[cc, -sc, z], [sc, cc, z], [z, z, o]])
    dRx = mat([[z, z, z], [z, -sa, -ca], [z, ca, -sa]])
    dRy = mat([[-sb, z, cb], [z, z, z], [-cb, z, -sb]])
    dRz = mat([[-sc, -cc, z], [cc, -sc, z], [z, z, z]])
    d0 = dRx @ Ry @ Rz
    d1 = Rx @ dRy @ Rz
    d2 = Rx @ Ry @ dRz
    return np.stack([d0, d1, d2], axis=-3)


@dataclass(frozen=True)
class Skeleton:
    """4-joint skeleton: template pivots, identity pivot offsets, limits.

    t0     : (4, 3) template joint positions (meters)
    a      : (4, 3, m) identity-offset matrices, pivot_i = t0_i + a_i @ alpha
    limits : (4, 3, 2) per-joint per-axis [min, max] rotation limits (radians)
    rest_rotations : optional (4, 3, 3) joint rest frames; Euler angles act
        inside these frames (A E A^T), so a rigidly transformed skeleton
        poses equivariantly with unchanged angles.  Defaults to identity.
    """

    t0: np.ndarray
    a: np.ndarray
    limits: np.ndarray
    rest_rotations: np.ndarray | None = None

    def __post_init__(self):
        t0 = np.asarray(self.t0, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        limits = np.asarray(self.limits, dtype=np.float64)
        if t0.shape != (4, 3):
            raise InvalidParam(f"t0 must be (4, 3), got {t0.shape}")
        if a.ndim != 3 or a.shape[:2] != (4, 3):
            raise InvalidParam(f"a must be (4, 3, m), got {a.shape}")
        if limits.shape != (4, 3, 2):
            raise InvalidParam(f"limits must be (4, 3, 2), got {limits.shape}")
        if np.any(limits[..., 0] >= limits[..., 1]):
            raise InvalidParam("rotation limits need min < max per axis")
        if np.any(np.abs(limits) >= np.pi):
            raise InvalidParam("rotation limits must satisfy |limit| < pi")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "limits", limits)
        if self.rest_rotations is not None:
            A = np.asarray(self.rest_rotations, dtype=np.float64)
            if A.shape != (4, 3, 3):
                raise InvalidParam(f"rest_rotations must be (4, 3, 3), got {A.shape}")
            if np.max(np.abs(np.swapaxes(A, 1, 2) @ A - np.eye(3))) > 1e-9:
                raise InvalidParam("rest_rotations must be orthonormal")
            object.__setattr__(self, "rest_rotations", A)

    def joint_rotations(self, joint_angles: np.ndarray) -> np.ndarray:
        """Local rotation matrices, conjugated into the joint rest frames."""
        E = euler_xyz(joint_angles)
        if self.rest_rotations is None:
            return E
        A = self.rest_rotations
        return A @ E @ np.swapaxes(A, -1, -2)

    def joint_rotation_grads(self, joint_angles: np.ndarray) -> np.ndarray:
        dE = euler_xyz_grad(joint_angles)
        if self.rest_rotations is None:
            return dE
        A = self.rest_rotations[:, None]      # broadcast over the angle axis
        return A @ dE @ np.swapaxes(A, -1, -2)

    @property
    def n_identity(self) -> int:
        return self.a.shape[2]

    def pivots(self, alpha: np.ndarray) -> np.ndarray:
        """Identity-adjusted joint pivots t0 + a @ alpha, batched over alpha."""
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape[-1] != self.n_identity:
            raise DimensionMismatch(
                f"alpha has {alpha.shape[-1]} coeffs, skeleton expects {self.n_identity}")
        return self.t0 + np.einsum("jkm,...m->...jk", self.a, alpha)

    def check_limits(self, joint_angles: np.ndarray) -> None:
        ang = np.asarray(joint_angles, dtype=np.float64)
        lo, hi = self.limits[..., 0], self.limits[..., 1]
        bad = (ang < lo) | (ang > hi)
        if np.any(bad):
            flat = np.nonzero(bad.reshape(-1, 4, 3))
            j, k = int(flat[1][0]), int(flat[2][0])
            v = float(ang.reshape(-1, 4, 3)[flat[0][0], j, k])
            raise PoseLimitViolation(JOINT_NAMES[j], k, v,
                                     float(lo[j, k]), float(hi[j, k]))


@dataclass(frozen=True)
class Pose:
    """Pose parameters: 4x3 joint Euler angles plus one global rigid transform.

    The 15-dim pose vector is joint_angles flattened followed by the
    global rotation angles; global translation is carried separately.
    """

    joint_angles: np.ndarray
    global_rot: np.ndarray
    global_trans: np.ndarray

    def __post_init__(self):
        ja = np.asarray(self.joint_angles, dtype=np.float64).reshape(4, 3)
        gr = np.asarray(self.global_rot, dtype=np.float64).reshape(3)
        gt = np.asarray(self.global_trans, dtype=np.float64).reshape(3)
        object.__setattr__(self, "joint_angles", ja)
        object.__setattr__(self, "global_rot", gr)
        object.__setattr__(self, "global_trans", gt)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros((4, 3)), np.zeros(3), np.zeros(3))

    @property
    def vector15(self) -> np.ndarray:
        return np.concatenate([self.joint_angles.ravel(), self.global_rot])


@dataclass(frozen=True)
class ModelParams:
    """theta = (alpha, beta, gamma) for one face instance."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: Pose

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=np.float64).reshape(-1))

    @classmethod
    def zeros(cls, n_identity: int, n_expression: int = 51) -> "ModelParams":
        return cls(np.zeros(n_identity), np.zeros(n_expression), Pose.identity())

    def validate(self, skeleton: Skeleton) -> None:
        """Sampled-value checks: beta in [0,1], angles within limits."""
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise InvalidParam("beta coefficients must lie in [0, 1]")
        skeleton.check_limits(self.gamma.joint_angles)


@dataclass(frozen=True)
class BlendshapeModel:
    """Template mesh, identity/expression bases, skeleton, skinning weights."""

    template: QuadMesh
    identity_basis: np.ndarray      # (m, V, 3)
    expression_basis: np.ndarray    # (n_expr, V, 3)
    skeleton: Skeleton
    skinning_weights: np.ndarray    # (V, 4)
    eyelid_left: np.ndarray | None = None
    eyelid_right: np.ndarray | None = None

    def __post_init__(self):
        V = self.template.n_vertices
        idb = np.asarray(self.identity_basis, dtype=np.float64)
        exb = np.asarray(self.expression_basis, dtype=np.float64)
        w = np.asarray(self.skinning_weights, dtype=np.float64)
        if idb.ndim != 3 or idb.shape[1:] != (V, 3):
            raise DimensionMismatch(f"identity basis must be (m, {V}, 3), got {idb.shape}")
        if exb.ndim != 3 or exb.shape[1:] != (V, 3):
            raise DimensionMismatch(f"expression basis must be (n, {V}, 3), got {exb.shape}")
        if w.shape != (V, 4):
            raise DimensionMismatch(f"skinning weights must be ({V}, 4), got {w.shape}")
        if np.any(w < 0):
            raise InvalidParam("skinning weights must be nonnegative")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidParam("skinning weight rows must sum to 1 within 1e-9")
        if self.skeleton.n_identity != idb.shape[0]:
            raise DimensionMismatch(
                f"skeleton identity offsets expect m={self.skeleton.n_identity}, "
                f"basis has m={idb.shape[0]}")
        object.__setattr__(self, "identity_basis", idb)
        object.__setattr__(self, "expression_basis", exb)
        object.__setattr__(self, "skinning_weights", w)
        for side in ("eyelid_left", "eyelid_right"):
            ids = getattr(self, side)
            if ids is not None:
                object.__setattr__(self, side, np.asarray(ids, dtype=np.int64))

    @property
    def n_identity(self) -> int:
        return self.identity_basis.shape[0]

    @property
    def n_expression(self) -> int:
        return self.expression_basis.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.template.n_vertices

    def zero_params(self) -> ModelParams:
        return ModelParams.zeros(self.n_identity, self.n_expression)


def evaluate_unposed(model: BlendshapeModel, alpha: np.ndarray,
                     beta: np.ndarray) -> np.ndarray:
    """Unposed vertices: template + alpha . identity basis + beta . expression basis.

    alpha (..., m) and beta (..., n_expr) may carry batch dimensions.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if alpha.shape[-1] != model.n_identity:
        raise DimensionMismatch(
            f"alpha has {alpha.shape[-1]} coeffs, model expects {model.n_identity}")
    if beta.shape[-1] != model.n_expression:
        raise DimensionMismatch(
            f"beta has {beta.shape[-1]} coeffs, model expects {model.n_expression}")
    return (model.template.vertices
            + np.einsum("...q,qvk->...vk", alpha, model.identity_basis)
            + np.einsum("...q,qvk->...vk", beta, model.expression_basis))


def world_transforms(skeleton: Skeleton, alpha: np.ndarray,
                     joint_angles: np.ndarray,
                     check_limits: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-space joint transforms composed along the neck-rooted tree.

    Each local transform rotates about its identity-adjusted pivot.
    Returns (R_w (..., 4, 3, 3), b_w (..., 4, 3), pivots (..., 4, 3)) with
    the transform acting as x -> R_w @ x + b_w.
    """
    joint_angles = np.asarray(joint_angles, dtype=np.float64)
    if joint_angles.shape[-2:] != (4, 3):
        raise DimensionMismatch(f"joint angles must be (..., 4, 3), got {joint_angles.shape}")
    if check_limits:
        skeleton.check_limits(joint_angles)
    piv = skeleton.pivots(alpha)                       # (..., 4, 3)
    R = skeleton.joint_rotations(joint_angles)         # (..., 4, 3, 3)
    # local affine: x -> R (x - t) + t
    b_loc = piv - np.einsum("...jab,...jb->...ja", R, piv)
    R_w = R.copy()
    b_w = b_loc.copy()
    for j, p in enumerate(JOINT_PARENTS):
        if p < 0:
            continue
        R_w[..., j, :, :] = R[..., p, :, :] @ R[..., j, :, :]
        b_w[..., j, :] = (np.einsum("...ab,...b->...a", R[..., p, :, :], b_loc[..., j, :])
                          + b_loc[..., p, :])
    return R_w, b_w, piv


@dataclass(frozen=True)
class JointTransform:
    name: str
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,), transform acts as x -> R x + t
    pivot: np.ndarray        # (3,), identity-adjusted pivot

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def joint_transforms(skeleton: Skeleton, alpha: np.ndarray, joint_angles: np.ndarray,
                     check_limits: bool = True) -> list[JointTransform]:
    """World transforms [R|t] for the 4 joints (parent chains composed)."""
    R_w, b_w, piv = world_transforms(skeleton, alpha, joint_angles, check_limits)
    return [JointTransform(JOINT_NAMES[j], R_w[j], b_w[j], piv[j]) for j in range(4)]


def apply_pose(model: BlendshapeModel, alpha: np.ndarray, pose: Pose,
               unposed: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """Linear-blend skinning followed by the global rigid transform."""
    unposed = np.asarray(unposed, dtype=np.float64)
    if unposed.shape[-2] != model.n_vertices:
        raise DimensionMismatch(
            f"unposed has {unposed.shape[-2]} vertices, model has {model.n_vertices}")
    R_w, b_w, _ = world_transforms(model.skeleton, alpha, pose.joint_angles, check_limits)
    v_out = lbs_apply(model.skinning_weights, R_w, b_w, unposed)
    R_g = euler_xyz(pose.global_rot)
    return np.einsum("...ab,...vb->...va", R_g, v_out) + pose.global_trans


def lbs_apply(weights: np.ndarray, R_w: np.ndarray, b_w: np.ndarray,
              unposed: np.ndarray) -> np.ndarray:
    """v = sum_i w_vi (R_i v + b_i), evaluated in delta form
    v + sum_i w_vi ((R_i - I) v + b_i) so the rest pose reproduces the
    input bit-exactly despite float rounding in the weight rows."""
    delta = np.einsum("vi,...iab->...vab", weights, R_w - np.eye(3))
    blend_b = np.einsum("vi,...ia->...va", weights, b_w)
    return unposed + np.einsum("...vab,...vb->...va", delta, unposed) + blend_b


def evaluate(model: BlendshapeModel, params: ModelParams,
             check_limits: bool = True) -> QuadMesh:
    """Full transform from parameters to a posed mesh on the template topology."""
    unposed = evaluate_unposed(model, params.alpha, params.beta)
    posed = apply_pose(model, params.alpha, params.gamma, unposed, check_limits)
    return model.template.with_vertices(posed)


def evaluate_vertices(model: BlendshapeModel, params: ModelParams,
                      check_limits: bool = True) -> np.ndarray:
    unposed = evaluate_unposed(model, params.alpha, params.beta)
    return apply_pose(model, params.alpha, params.gamma, unposed, check_limits)


# ---------------------------------------------------------------------------
# derivative tables for the pose chain (shared by the Jacobian and the
# learner's backward pass)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseDerivatives:
    """Forward transforms plus their derivatives w.r.t. pose and pivots.

    Leading batch dims match the inputs.  Layout:
      R_w, b_w : (..., 4, 3, 3), (..., 4, 3)
      dR_w     : (..., 4, 4, 3, 3, 3)  [i, j, k] = d R_w[i] / d angle[j, k]
      db_w     : (..., 4, 4, 3, 3)     [i, j, k] = d b_w[i] / d angle[j, k]
      db_dpiv  : (..., 4, 4, 3, 3)     [i, j]    = d b_w[i] / d pivot[j]
    Only the neck column (j=0) and the diagonal (j=i) are nonzero.
    """

    R_w: np.ndarray
    b_w: np.ndarray
    pivots: np.ndarray
    dR_w: np.ndarray
    db_w: np.ndarray
    db_dpiv: np.ndarray


def pose_derivatives(skeleton: Skeleton, alpha: np.ndarray,
                     joint_angles: np.ndarray) -> PoseDerivatives:
    """Analytic derivatives of the world transforms for the fixed 4-joint tree."""
    joint_angles = np.asarray(joint_angles, dtype=np.float64)
    batch = joint_angles.shape[:-2]
    piv = skeleton.pivots(alpha)
    R = skeleton.joint_rotations(joint_angles)           # (..., 4, 3, 3)
    dR = skeleton.joint_rotation_grads(joint_angles)     # (..., 4, 3, 3, 3)
    b_loc = piv - np.einsum("...jab,...jb->...ja", R, piv)

    Rn = R[..., 0, :, :]
    dRn = dR[..., 0, :, :, :]                      # (..., 3, 3, 3)
    tn = piv[..., 0, :]

    R_w = R.copy()
    b_w = b_loc.copy()
    dR_w = np.zeros(batch + (4, 4, 3, 3, 3))
    db_w = np.zeros(batch + (4, 4, 3, 3))
    db_dpiv = np.zeros(batch + (4, 4, 3, 3))
    eye = np.broadcast_to(np.eye(3), batch + (3, 3))

    # neck is its own world transform
    dR_w[..., 0, 0, :, :, :] = dRn
    db_w[..., 0, 0, :, :] = -np.einsum("...kab,...b->...ka", dRn, tn)
    db_dpiv[..., 0, 0, :, :] = eye - Rn

    for j in (1, 2, 3):
        Rj = R[..., j, :, :]
        dRj = dR[..., j, :, :, :]
        tj = piv[..., j, :]
        R_w[..., j, :, :] = Rn @ Rj
        b_w[..., j, :] = (np.einsum("...ab,...b->...a", Rn, b_loc[..., j, :] - tn)
                          + tn)
        # neck angles
        dR_w[..., j, 0, :, :, :] = np.einsum("...kab,...bc->...kac", dRn, Rj)
        db_w[..., j, 0, :, :] = np.einsum(
            "...kab,...b->...ka", dRn, b_loc[..., j, :] - tn)
        # own angles
        dR_w[..., j, j, :, :, :] = np.einsum("...ab,...kbc->...kac", Rn, dRj)
        db_w[..., j, j, :, :] = -np.einsum(
            "...ab,...kbc,...c->...ka", Rn, dRj, tj)
        # pivots
        db_dpiv[..., j, 0, :, :] = eye - Rn
        db_dpiv[..., j, j, :, :] = Rn @ (eye - Rj)

    return PoseDerivatives(R_w=R_w, b_w=b_w, pivots=piv,
                           dR_w=dR_w, db_w=db_w, db_dpiv=db_dpiv)


def param_layout(model: BlendshapeModel) -> dict[str, slice]:
    """Column layout of the full Jacobian: alpha, beta, joint angles (12),
    global rotation (3), global translation (3)."""
    m, ne = model.n_identity, model.n_expression
    ofs = 0
    layout = {}
    for name, width in (("alpha", m), ("beta", ne), ("joint_angles", 12),
                        ("global_rot", 3), ("global_trans", 3)):
        layout[name] = slice(ofs, ofs + width)
        ofs += width
    layout["total"] = slice(0, ofs)
    return layout


def evaluate_with_jacobian(model: BlendshapeModel, params: ModelParams,
                           check_limits: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Posed vertices and the dense Jacobian (V, 3, P) over all parameters.

    Column order follows param_layout; meant for desk-scale validation,
    the learner uses the adjoint path instead.
    """
    m, ne = model.n_identity, model.n_expression
    V = model.n_vertices
    w = model.skinning_weights
    unposed = evaluate_unposed(model, params.alpha, params.beta)
    if check_limits:
        model.skeleton.check_limits(params.gamma.joint_angles)
    der = pose_derivatives(model.skeleton, params.alpha, params.gamma.joint_angles)
    v_out = lbs_apply(w, der.R_w, der.b_w, unposed)
    R_g = euler_xyz(params.gamma.global_rot)
    dR_g = euler_xyz_grad(params.gamma.global_rot)
    posed = v_out @ R_g.T + params.gamma.global_trans

    P = m + ne + 12 + 3 + 3
    jac = np.zeros((V, 3, P))
    layout = param_layout(model)

    # d v_out / d vbar in delta form: I + sum_i w_vi (R_i - I)
    blend_R = np.eye(3) + np.einsum("vi,iab->vab", w, der.R_w - np.eye(3))

    # identity: blendshape path plus pivot path
    dvbar = np.einsum("vab,qvb->qva", blend_R, model.identity_basis)
    piv_path = np.einsum("vi,ijab,jbq->vaq", w, der.db_dpiv, model.skeleton.a)
    jac[:, :, layout["alpha"]] = np.einsum("qva->vaq", dvbar) + piv_path

    # expression: blendshape path only
    dvbar_e = np.einsum("vab,qvb->qva", blend_R, model.expression_basis)
    jac[:, :, layout["beta"]] = np.einsum("qva->vaq", dvbar_e)

    # joint angles
    dpose = (np.einsum("vi,ijkab,vb->vajk", w, der.dR_w, unposed)
             + np.einsum("vi,ijka->vajk", w, der.db_w))
    jac[:, :, layout["joint_angles"]] = dpose.reshape(V, 3, 12)

    # everything so far is pre-global; rotate into the output frame
    jac[:, :, :m + ne + 12] = np.einsum(
        "ab,vbp->vap", R_g, jac[:, :, :m + ne + 12])

    jac[:, :, layout["global_rot"]] = np.einsum("kab,vb->vak", dR_g, v_out)
    jac[:, :, layout["global_trans"]] = np.broadcast_to(np.eye(3), (V, 3, 3))
    return posed, jac
