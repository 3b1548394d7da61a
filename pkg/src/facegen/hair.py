"""Strand-hair parametrization: grooms (strand polylines rooted in scalp
UV space) encoded into two UV maps (root density, strand length) plus a
volumetric flow-direction grid, and reconstructed back by growing
strands through the flow field.

The flattened code vector is [density | length | flow xyz-interleaved],
d = 2 R^2 + 3 G^3; the bounding box and the per-texel mean root position
grid travel alongside as metadata (they are needed to reconstruct, not
to compress).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import load_container, save_container
from .errors import (
    DataError,
    DimensionMismatch,
    EmptyDensity,
    EmptyGroom,
    InvalidParam,
    MissingRootMap,
    PointOutsideBbox,
)

HAIR_STYLES = ("scalp", "eyebrow", "beard", "eyelash")


@dataclass(frozen=True)
class Groom:
    """Hair groom: strand polylines (meters) with scalp-UV roots."""

    strands: tuple[np.ndarray, ...]    # each (L_i >= 2, 3)
    root_uv: np.ndarray                # (S, 2) in [0, 1]^2
    style: str = "scalp"

    def __post_init__(self):
        strands = tuple(np.asarray(s, dtype=np.float64) for s in self.strands)
        for i, s in enumerate(strands):
            if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 2:
                raise InvalidParam(f"strand {i} must be (L >= 2, 3), got {s.shape}")
            if not np.all(np.isfinite(s)):
                raise InvalidParam(f"strand {i} contains non-finite points")
        uv = np.asarray(self.root_uv, dtype=np.float64)
        if uv.shape != (len(strands), 2):
            raise InvalidParam(f"root_uv must be ({len(strands)}, 2), got {uv.shape}")
        if uv.size and (uv.min() < 0.0 or uv.max() > 1.0):
            raise InvalidParam("root_uv must lie in the unit square")
        if self.style not in HAIR_STYLES:
            raise InvalidParam(f"unknown style {self.style!r}, expected one of {HAIR_STYLES}")
        object.__setattr__(self, "strands", strands)
        object.__setattr__(self, "root_uv", uv)

    @property
    def n_strands(self) -> int:
        return len(self.strands)

    def arc_lengths(self) -> np.ndarray:
        return np.array([
            float(np.linalg.norm(np.diff(s, axis=0), axis=1).sum())
            for s in self.strands])

    def points_bbox(self, pad: float = 0.0) -> np.ndarray:
        pts = np.concatenate(self.strands, axis=0)
        return np.array([pts.min(axis=0) - pad, pts.max(axis=0) + pad])


@dataclass(frozen=True)
class HairCode:
    """Groom encoding: density/length UV maps + flow volume + metadata."""

    density_map: np.ndarray      # (R, R), max-normalized root counts
    length_map: np.ndarray       # (R, R), mean strand length per texel (m)
    flow_volume: np.ndarray      # (G, G, G, 3), unit or zero vectors
    bbox: np.ndarray             # (2, 3) [min, max] of the volume (m)
    root_points: np.ndarray | None = None   # (R, R, 3) mean root per texel

    def __post_init__(self):
        den = np.asarray(self.density_map, dtype=np.float64)
        ln = np.asarray(self.length_map, dtype=np.float64)
        flow = np.asarray(self.flow_volume, dtype=np.float64)
        bbox = np.asarray(self.bbox, dtype=np.float64).reshape(2, 3)
        R = den.shape[0]
        G = flow.shape[0]
        if den.shape != (R, R) or ln.shape != (R, R):
            raise DimensionMismatch("density/length maps must be square and equal size")
        if flow.shape != (G, G, G, 3):
            raise DimensionMismatch(f"flow volume must be (G, G, G, 3), got {flow.shape}")
        if np.any(den < 0) or np.any(ln < 0):
            raise InvalidParam("density and length maps must be nonnegative")
        norms = np.linalg.norm(flow, axis=3)
        nz = norms > 1e-6
        if np.any(np.abs(norms[nz] - 1.0) > 1e-6):
            raise InvalidParam("nonzero flow cells must have unit norm within 1e-6")
        if np.any(bbox[0] >= bbox[1]):
            raise InvalidParam("bbox min must be strictly below bbox max")
        object.__setattr__(self, "density_map", den)
        object.__setattr__(self, "length_map", ln)
        object.__setattr__(self, "flow_volume", flow)
        object.__setattr__(self, "bbox", bbox)
        if self.root_points is not None:
            rp = np.asarray(self.root_points, dtype=np.float64)
            if rp.shape != (R, R, 3):
                raise DimensionMismatch(f"root_points must be ({R}, {R}, 3), got {rp.shape}")
            object.__setattr__(self, "root_points", rp)

    @property
    def uv_resolution(self) -> int:
        return self.density_map.shape[0]

    @property
    def volume_resolution(self) -> int:
        return self.flow_volume.shape[0]

    def cell_size(self) -> np.ndarray:
        return (self.bbox[1] - self.bbox[0]) / self.volume_resolution

    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.cell_size()))


def _uv_texel(uv: np.ndarray, R: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.clip(np.floor(uv * R).astype(np.int64), 0, R - 1)
    return idx[:, 0], idx[:, 1]


def _resample_strand(points: np.ndarray, spacing: float
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Positions and unit tangents at uniform arc-length midpoints."""
    seg = np.diff(points, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    keep = seg_len > 0
    if not np.any(keep):
        return np.empty((0, 3)), np.empty((0, 3))
    seg = seg[keep]
    seg_len = seg_len[keep]
    starts = points[:-1][keep]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = max(1, int(np.floor(total / spacing)))
    s = (np.arange(n) + 0.5) * (total / n)
    seg_idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    t = (s - cum[seg_idx]) / seg_len[seg_idx]
    pos = starts[seg_idx] + t[:, None] * seg[seg_idx]
    tang = seg[seg_idx] / seg_len[seg_idx, None]
    return pos, tang


def encode_groom(groom: Groom, R: int = 64, G: int = 32,
                 bbox: np.ndarray | None = None) -> HairCode:
    """Rasterize a groom into density/length UV maps and a flow volume.

    Root counts are normalized by the max texel count.  Segment tangents
    (oriented root to tip) are sampled every half cell and averaged per
    volume cell, then normalized to unit length.
    """
    if R < 4 or G < 4:
        raise InvalidParam("resolutions R and G must be >= 4")
    if groom.n_strands == 0:
        raise EmptyGroom("groom has no strands")
    if bbox is None:
        bbox = groom.points_bbox(pad=1e-9)
    bbox = np.asarray(bbox, dtype=np.float64).reshape(2, 3)
    all_pts = np.concatenate(groom.strands, axis=0)
    if np.any(all_pts < bbox[0] - 1e-12) or np.any(all_pts > bbox[1] + 1e-12):
        raise PointOutsideBbox("strand points fall outside the given bbox")

    iu, iv = _uv_texel(groom.root_uv, R)
    counts = np.zeros((R, R))
    np.add.at(counts, (iu, iv), 1.0)
    density = counts / counts.max()

    lengths = groom.arc_lengths()
    lsum = np.zeros((R, R))
    np.add.at(lsum, (iu, iv), lengths)
    length_map = np.divide(lsum, counts, out=np.zeros_like(lsum), where=counts > 0)

    roots = np.stack([s[0] for s in groom.strands])
    rsum = np.zeros((R, R, 3))
    np.add.at(rsum, (iu, iv), roots)
    root_points = np.divide(rsum, counts[..., None],
                            out=np.zeros_like(rsum), where=counts[..., None] > 0)

    cell = (bbox[1] - bbox[0]) / G
    spacing = 0.5 * float(cell.min())
    if spacing <= 0:
        raise InvalidParam("bbox is degenerate")
    acc = np.zeros((G, G, G, 3))
    for strand in groom.strands:
        pos, tang = _resample_strand(strand, spacing)
        if len(pos) == 0:
            continue
        ijk = np.clip(((pos - bbox[0]) / cell).astype(np.int64), 0, G - 1)
        np.add.at(acc, (ijk[:, 0], ijk[:, 1], ijk[:, 2]), tang)
    norms = np.linalg.norm(acc, axis=3)
    nz = norms > 1e-8
    flow = np.zeros_like(acc)
    flow[nz] = acc[nz] / norms[nz][:, None]

    return HairCode(density_map=density, length_map=length_map,
                    flow_volume=flow, bbox=bbox, root_points=root_points)


def _trilinear(volume: np.ndarray, pos: np.ndarray, bbox: np.ndarray) -> np.ndarray:
    """Cell-centered trilinear interpolation of a (G, G, G, 3) field."""
    G = volume.shape[0]
    cell = (bbox[1] - bbox[0]) / G
    g = (pos - bbox[0]) / cell - 0.5
    i0 = np.clip(np.floor(g).astype(np.int64), 0, G - 2)
    f = np.clip(g - i0, 0.0, 1.0)
    out = np.zeros((len(pos), 3))
    for dx in (0, 1):
        wx = f[:, 0] if dx else 1.0 - f[:, 0]
        for dy in (0, 1):
            wy = f[:, 1] if dy else 1.0 - f[:, 1]
            for dz in (0, 1):
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                w = (wx * wy * wz)[:, None]
                out += w * volume[i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz]
    return out


def _systematic_counts(weights: np.ndarray, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Low-variance weight-proportional allocation of n draws."""
    p = weights / weights.sum()
    cum = np.cumsum(p)
    cum[-1] = 1.0
    pts = (rng.uniform(0.0, 1.0) + np.arange(n)) / n
    idx = np.searchsorted(cum, pts, side="left")
    return np.bincount(idx, minlength=len(p))


@dataclass
class DecodeReport:
    target_lengths: np.ndarray
    grown_lengths: np.ndarray
    early_terminated: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n_strands": int(len(self.target_lengths)),
            "n_early_terminated": int(self.early_terminated.sum()),
            "target_lengths": [float(x) for x in self.target_lengths],
            "grown_lengths": [float(x) for x in self.grown_lengths],
        }


def decode_groom(code: HairCode, n_strands: int, step: float,
                 rng=None, style: str = "scalp") -> tuple[Groom, DecodeReport]:
    """Grow strands back out of a code.

    Roots are allocated over texels proportionally to density (systematic
    resampling) and jittered inside their texel in UV; each strand starts
    at the texel's mean root position and follows the trilinearly
    interpolated flow until its target length (the length map at the
    root) is consumed.  Zero-flow regions terminate growth early.
    """
    if n_strands < 1:
        raise InvalidParam("n_strands must be >= 1")
    if step <= 0 or step >= code.cell_size().min():
        raise InvalidParam("step must be positive and below the cell size")
    if code.root_points is None:
        raise MissingRootMap(
            "code lacks the root position grid needed for reconstruction")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    R = code.uv_resolution
    weights = code.density_map.ravel()
    if weights.sum() <= 0:
        raise EmptyDensity("density map is all zeros")

    counts = _systematic_counts(weights, n_strands, rng)
    texels = np.repeat(np.arange(R * R), counts)
    iu, iv = texels // R, texels % R
    jitter = rng.uniform(0.0, 1.0, size=(n_strands, 2))
    root_uv = np.clip((np.stack([iu, iv], axis=1) + jitter) / R, 0.0, 1.0)
    starts = code.root_points[iu, iv]
    targets = code.length_map[iu, iv]

    pos = starts.copy()
    remaining = targets.copy()
    alive = remaining > 0
    early = np.zeros(n_strands, dtype=bool)
    paths = [[p.copy()] for p in pos]
    max_steps = int(np.ceil(targets.max() / step)) + 2 if n_strands else 0
    for _ in range(max_steps):
        if not np.any(alive):
            break
        idx = np.nonzero(alive)[0]
        d = _trilinear(code.flow_volume, pos[idx], code.bbox)
        dn = np.linalg.norm(d, axis=1)
        dead = dn < 1e-6
        early[idx[dead]] = True
        alive[idx[dead]] = False
        ok = idx[~dead]
        if len(ok) == 0:
            continue
        dirn = d[~dead] / dn[~dead, None]
        lens = np.minimum(step, remaining[ok])
        cand = pos[ok] + dirn * lens[:, None]
        clipped = np.clip(cand, code.bbox[0], code.bbox[1])
        hit_wall = np.any(clipped != cand, axis=1)
        pos[ok] = clipped
        remaining[ok] -= lens
        for k in ok:
            paths[k].append(pos[k].copy())
        done = ok[remaining[ok] <= 1e-12]
        alive[done] = False
        # strands pressed against the volume boundary stop growing
        wall = ok[hit_wall & (remaining[ok] > 1e-12)]
        early[wall] = True
        alive[wall] = False

    strands = []
    for k, path in enumerate(paths):
        if len(path) < 2:
            # never moved: synthesize a degenerate-but-valid stub along +z
            path = [path[0], path[0] + np.array([0.0, 0.0, max(step * 0.5, 1e-9)])]
            early[k] = True
        strands.append(np.asarray(path))
    groom = Groom(tuple(strands), root_uv, style=style)
    grown = groom.arc_lengths()
    return groom, DecodeReport(target_lengths=targets, grown_lengths=grown,
                               early_terminated=early)


def flip_groom(groom: Groom) -> Groom:
    """Mirror across the x = 0 plane: x -> -x on points, u -> 1 - u on roots."""
    strands = tuple(s * np.array([-1.0, 1.0, 1.0]) for s in groom.strands)
    uv = groom.root_uv.copy()
    uv[:, 0] = 1.0 - uv[:, 0]
    return Groom(strands, uv, style=groom.style)


# ---------------------------------------------------------------------------
# code vector layout
# ---------------------------------------------------------------------------

def code_vector_length(R: int, G: int) -> int:
    return 2 * R * R + 3 * G ** 3


def code_to_vector(code: HairCode) -> np.ndarray:
    """[density | length | flow xyz-interleaved], row-major."""
    return np.concatenate([
        code.density_map.ravel(),
        code.length_map.ravel(),
        code.flow_volume.ravel(),
    ])


def vector_to_code(v: np.ndarray, R: int, G: int, bbox: np.ndarray,
                   root_points: np.ndarray | None = None) -> HairCode:
    """Inverse of code_to_vector; flow cells are re-normalized (cells with
    norm below 1e-6 become zero, unit cells pass through bit-exactly)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if len(v) != code_vector_length(R, G):
        raise DimensionMismatch(
            f"vector length {len(v)} != 2R^2+3G^3 = {code_vector_length(R, G)}")
    r2 = R * R
    density = v[:r2].reshape(R, R)
    length = v[r2:2 * r2].reshape(R, R)
    flow = v[2 * r2:].reshape(G, G, G, 3)
    norms = np.linalg.norm(flow, axis=3)
    out = np.zeros_like(flow)
    nz = norms >= 1e-6
    renorm = nz & (np.abs(norms - 1.0) > 1e-6)
    keep = nz & ~renorm
    out[keep] = flow[keep]
    out[renorm] = flow[renorm] / norms[renorm][:, None]
    density = np.maximum(density, 0.0)
    length = np.maximum(length, 0.0)
    return HairCode(density_map=density, length_map=length, flow_volume=out,
                    bbox=bbox, root_points=root_points)


# ---------------------------------------------------------------------------
# groom and code files
# ---------------------------------------------------------------------------

def save_groom(path, groom: Groom) -> None:
    """Groom file: container manifest with style/counts/bbox header fields."""
    counts = [len(s) for s in groom.strands]
    points = np.concatenate(groom.strands, axis=0)
    bbox = groom.points_bbox()
    save_container(path, {"points": points, "root_uv": groom.root_uv},
                   metadata={
                       "kind": "groom",
                       "style": groom.style,
                       "counts": counts,
                       "bbox": [[float(x) for x in bbox[0]],
                                [float(x) for x in bbox[1]]],
                   })


def load_groom(path) -> Groom:
    tensors, meta = load_container(path)
    if meta.get("kind") != "groom":
        raise DataError(f"{path} is not a groom file")
    counts = meta["counts"]
    points = tensors["points"]
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
    strands = tuple(points[offsets[i]:offsets[i + 1]] for i in range(len(counts)))
    return Groom(strands, tensors["root_uv"], style=meta.get("style", "scalp"))


def save_hair_code(path, code: HairCode) -> None:
    tensors = {
        "density_map": code.density_map,
        "length_map": code.length_map,
        "flow_volume": code.flow_volume,
        "bbox": code.bbox,
    }
    if code.root_points is not None:
        tensors["root_points"] = code.root_points
    save_container(path, tensors, metadata={
        "kind": "hair_code",
        "uv_resolution": code.uv_resolution,
        "volume_resolution": code.volume_resolution,
    })


def load_hair_code(path) -> HairCode:
    tensors, meta = load_container(path)
    if meta.get("kind") != "hair_code":
        raise DataError(f"{path} is not a hair code file")
    return HairCode(
        density_map=tensors["density_map"],
        length_map=tensors["length_map"],
        flow_volume=tensors["flow_volume"],
        bbox=tensors["bbox"],
        root_points=tensors.get("root_points"),
    )
