"""Blendshape-model serialization in the matrix container format.

Schema (version 1) tensors: template_vertices, template_quads,
identity_basis [m, V, 3], expression_basis [n, V, 3],
skinning_weights [V, 4], skeleton_t0 [4, 3], skeleton_a [4, 3, m],
skeleton_limits [4, 3, 2]; optional template_uvs and eyelid id lists.
"""

from __future__ import annotations

import numpy as np

from .container import load_container, save_container
from .errors import DataError
from .mesh import QuadMesh
from .model import BlendshapeModel, Skeleton

MODEL_SCHEMA_VERSION = 1


def save_model(path, model: BlendshapeModel) -> None:
    tensors = {
        "template_vertices": model.template.vertices,
        "template_quads": model.template.quads.astype(np.float64),
        "identity_basis": model.identity_basis,
        "expression_basis": model.expression_basis,
        "skinning_weights": model.skinning_weights,
        "skeleton_t0": model.skeleton.t0,
        "skeleton_a": model.skeleton.a,
        "skeleton_limits": model.skeleton.limits,
    }
    if model.template.uvs is not None:
        tensors["template_uvs"] = model.template.uvs
    if model.skeleton.rest_rotations is not None:
        tensors["skeleton_rest_rotations"] = model.skeleton.rest_rotations
    if model.eyelid_left is not None:
        tensors["eyelid_left"] = model.eyelid_left.astype(np.float64)
    if model.eyelid_right is not None:
        tensors["eyelid_right"] = model.eyelid_right.astype(np.float64)
    save_container(path, tensors, metadata={
        "kind": "blendshape_model",
        "version": MODEL_SCHEMA_VERSION,
    })


def load_model(path) -> BlendshapeModel:
    tensors, meta = load_container(path)
    if meta.get("kind") != "blendshape_model":
        raise DataError(f"{path} is not a blendshape model container")
    if "version" not in meta:
        raise DataError(f"{path}: model container missing mandatory version field")
    if meta["version"] != MODEL_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported model version {meta['version']}")
    template = QuadMesh(
        tensors["template_vertices"],
        tensors["template_quads"].astype(np.int64),
        tensors.get("template_uvs"),
    )
    skeleton = Skeleton(
        t0=tensors["skeleton_t0"],
        a=tensors["skeleton_a"],
        limits=tensors["skeleton_limits"],
        rest_rotations=tensors.get("skeleton_rest_rotations"),
    )
    lid_l = tensors.get("eyelid_left")
    lid_r = tensors.get("eyelid_right")
    return BlendshapeModel(
        template=template,
        identity_basis=tensors["identity_basis"],
        expression_basis=tensors["expression_basis"],
        skeleton=skeleton,
        skinning_weights=tensors["skinning_weights"],
        eyelid_left=None if lid_l is None else lid_l.astype(np.int64),
        eyelid_right=None if lid_r is None else lid_r.astype(np.int64),
    )
