"""Minimal OBJ import/export for quad meshes.

Only `v`, `vt` and quad `f` lines are handled (1-based indices).  Floats
are written with shortest round-trip decimal formatting, so exporting a
mesh and re-importing it reproduces the coordinates bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError
from .mesh import QuadMesh


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_obj(mesh: QuadMesh) -> str:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    if mesh.uvs is None:
        for q in mesh.quads:
            lines.append(f"f {q[0] + 1} {q[1] + 1} {q[2] + 1} {q[3] + 1}")
    else:
        flat_uv = mesh.uvs.reshape(-1, 2)
        for uv in flat_uv:
            lines.append(f"vt {_fmt(uv[0])} {_fmt(uv[1])}")
        for fi, q in enumerate(mesh.quads):
            toks = " ".join(f"{q[c] + 1}/{fi * 4 + c + 1}" for c in range(4))
            lines.append(f"f {toks}")
    return "\n".join(lines) + "\n"


def save_obj(path, mesh: QuadMesh) -> None:
    Path(path).write_text(dump_obj(mesh))


def parse_obj(text: str) -> QuadMesh:
    verts: list[list[float]] = []
    uvs: list[list[float]] = []
    faces: list[list[int]] = []
    face_uvs: list[list[int]] = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise DataError(f"line {ln}: malformed vertex")
            verts.append([float(p) for p in parts[1:4]])
        elif tag == "vt":
            if len(parts) < 3:
                raise DataError(f"line {ln}: malformed texture coord")
            uvs.append([float(p) for p in parts[1:3]])
        elif tag == "f":
            if len(parts) != 5:
                raise DataError(f"line {ln}: only quad faces are supported")
            vids, tids = [], []
            for tok in parts[1:]:
                fields = tok.split("/")
                vids.append(int(fields[0]) - 1)
                if len(fields) > 1 and fields[1]:
                    tids.append(int(fields[1]) - 1)
            faces.append(vids)
            if len(tids) == 4:
                face_uvs.append(tids)
        # other tags (vn, o, g, s, usemtl, ...) are ignored
    if not verts:
        raise DataError("OBJ contains no vertices")
    uv_arr = None
    if face_uvs and len(face_uvs) == len(faces):
        uv_pool = np.asarray(uvs, dtype=np.float64)
        uv_arr = uv_pool[np.asarray(face_uvs, dtype=np.int64)]
    return QuadMesh(np.asarray(verts, dtype=np.float64),
                    np.asarray(faces, dtype=np.int64),
                    uv_arr)


def load_obj(path) -> QuadMesh:
    return parse_obj(Path(path).read_text())
