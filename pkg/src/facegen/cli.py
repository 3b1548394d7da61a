"""Command-line entry point.

Subcommands: fit, sample, subdivide, encode-hair, decode-hair, fit-pca,
fit-gmm, pore-map, export, demo-assets.  Exit codes: 0 success, 1 usage,
2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .container import load_container, save_container
from .errors import DataError, FacegenError, NumericError
from .gmm import fit_gmm
from .hair import (
    decode_groom,
    encode_groom,
    load_groom,
    load_hair_code,
    save_groom,
    save_hair_code,
)
from .hdr import augment_rotations, preprocess_hdr, read_hdr
from .learning import FitSchedule, LossWeights, ScanSet, fit
from .library import AssetLibrary
from .modelio import save_model
from .objio import load_obj, save_obj
from .pca import fit_pca, save_pca
from .poremap import pore_map, read_pgm, write_pgm16
from .sampling import split_seed
from .scene import SceneDescription, export_scene, realize_scene, sample_scene
from .subdivision import subdivide_catmull_clark

log = logging.getLogger("facegen")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({
            "level": record.levelname.lower(),
            "event": record.getMessage(),
            "logger": record.name,
        }, sort_keys=True)


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("facegen: %(message)s"))
    root = logging.getLogger("facegen")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="facegen",
        description="Synthetic face asset toolkit: model fitting, scene "
                    "sampling and export for an external renderer.")
    p.add_argument("--version", action="version", version=f"facegen {__version__}")
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config file (weights/schedule for fit)")
    p.add_argument("--out", type=Path, default=None, help="output path")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: FACEGEN_THREADS or 1)")
    p.add_argument("--sigma-mode", choices=("std", "var"), default=None,
                   help="interpret the identity sampling sigma as a std or "
                        "variance scale")
    p.add_argument("--json-logs", action="store_true",
                   help="machine-readable JSON logs on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="learn the identity basis from registered scans")
    sp.add_argument("--scans", type=Path, required=True,
                    help="directory of registered .obj scans (template topology)")
    sp.add_argument("--basis-size", type=int, required=True, help="identity basis size m")

    sp = sub.add_parser("sample", help="sample scenes and export their geometry")
    sp.add_argument("--library", type=Path, required=True, help="library config JSON")
    sp.add_argument("--count", type=int, default=1)

    sp = sub.add_parser("subdivide", help="Catmull-Clark subdivision of an OBJ quad mesh")
    sp.add_argument("--mesh", type=Path, required=True)
    sp.add_argument("--levels", type=int, default=3)

    sp = sub.add_parser("encode-hair", help="encode a groom into maps + flow volume")
    sp.add_argument("--groom", type=Path, required=True)
    sp.add_argument("--uv-res", type=int, default=64)
    sp.add_argument("--vol-res", type=int, default=32)

    sp = sub.add_parser("decode-hair", help="reconstruct strands from a hair code")
    sp.add_argument("--code", type=Path, required=True)
    sp.add_argument("--count", type=int, default=200, help="strands to grow")
    sp.add_argument("--step", type=float, default=None,
                    help="growth step in meters (default: cell size / 4)")
    sp.add_argument("--reference", type=Path, default=None,
                    help="reference groom for a roundtrip report")

    sp = sub.add_parser("fit-pca", help="fit a PCA model to vectors or HDR images")
    sp.add_argument("--data", type=Path, default=None,
                    help="matrix container with one (n, d) tensor")
    sp.add_argument("--hdr-dir", type=Path, default=None,
                    help="directory of .hdr maps (preprocessed + augmented)")
    sp.add_argument("--components", type=int, default=50)
    sp.add_argument("--augment", type=int, default=5,
                    help="random yaw rotations per HDR image")

    sp = sub.add_parser("fit-gmm", help="fit a Gaussian mixture to coefficient vectors")
    sp.add_argument("--data", type=Path, required=True,
                    help="matrix container with one (n, m) tensor")
    sp.add_argument("--components", type=int, default=5)

    sp = sub.add_parser("pore-map", help="Laplacian-of-Gaussian pore map from a texture")
    sp.add_argument("--texture", type=Path, required=True, help="grayscale PGM input")
    sp.add_argument("--sigma", type=float, required=True, help="blob scale in pixels")

    sp = sub.add_parser("export", help="realize and export one scene description")
    sp.add_argument("--library", type=Path, required=True)
    sp.add_argument("--scene", type=Path, required=True)

    sub.add_parser("demo-assets", help="write a self-contained demo asset library")
    return p


def _require_out(args) -> Path:
    if args.out is None:
        raise DataError("--out is required for this command")
    return args.out


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("FACEGEN_THREADS")
    return max(1, int(env)) if env else 1


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON in {path}: {e}") from e


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    out = _require_out(args)
    scan_files = sorted(args.scans.glob("*.obj"))
    if not scan_files:
        raise DataError(f"no .obj scans found in {args.scans}")
    meshes = [load_obj(p) for p in scan_files]
    scans = ScanSet.from_meshes(meshes, [p.stem for p in scan_files])

    weights = LossWeights()
    schedule = FitSchedule()
    seed = args.seed
    if args.config is not None:
        cfg = _load_json(args.config)
        weights = LossWeights(**cfg.get("weights", {}))
        schedule = FitSchedule(**cfg.get("schedule", {}))
        seed = cfg.get("seed", seed)

    log.info(f"fitting m={args.basis_size} basis to {scans.n_scans} scans")
    model, report = fit(scans, args.basis_size, weights, schedule, seed)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.json", model)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    (out / "trajectory.csv").write_text(report.trajectory_csv())
    save_container(out / "alphas.json", {"alphas": report.final_alphas},
                   metadata={"kind": "identity_coefficients"})
    log.info(f"fit finished: {report.iterations} iterations, "
             f"final loss {report.trajectory[-1]:.6g}")
    return EXIT_OK


def _cmd_sample(args) -> int:
    out = _require_out(args)
    library = AssetLibrary.load(args.library)
    if args.sigma_mode is not None:
        library.sigma_mode = args.sigma_mode

    def one(i: int) -> None:
        seed_i = split_seed(args.seed, i)
        scene = sample_scene(library, seed_i)
        geometry = realize_scene(library, scene)
        export_scene(scene, geometry, out / f"scene_{i:04d}")

    n = _threads(args)
    if n == 1:
        for i in range(args.count):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(one, range(args.count)))
    log.info(f"exported {args.count} scene(s) to {out}")
    return EXIT_OK


def _cmd_subdivide(args) -> int:
    out = _require_out(args)
    mesh = load_obj(args.mesh)
    result = subdivide_catmull_clark(mesh, args.levels)
    save_obj(out, result)
    log.info(f"subdivided {args.levels} level(s): "
             f"{mesh.n_vertices} -> {result.n_vertices} vertices")
    return EXIT_OK


def _cmd_encode_hair(args) -> int:
    out = _require_out(args)
    groom = load_groom(args.groom)
    code = encode_groom(groom, R=args.uv_res, G=args.vol_res)
    save_hair_code(out, code)
    log.info(f"encoded {groom.n_strands} strands into "
             f"R={args.uv_res} maps and G={args.vol_res} flow volume")
    return EXIT_OK


def _cmd_decode_hair(args) -> int:
    out = _require_out(args)
    code = load_hair_code(args.code)
    step = args.step if args.step is not None else float(code.cell_size().min()) / 4.0
    groom, report = decode_groom(code, args.count, step, rng=args.seed)
    save_groom(out, groom)
    report_path = out.with_name(out.stem + "_report.json")
    payload = report.to_dict()
    if args.reference is not None:
        ref = load_groom(args.reference)
        re_code = encode_groom(groom, R=code.uv_resolution,
                               G=code.volume_resolution, bbox=code.bbox)
        ref_ends = np.stack([s[-1] for s in ref.strands])
        ends = np.stack([s[-1] for s in groom.strands])
        d = np.linalg.norm(ends[:, None, :] - ref_ends[None], axis=2).min(axis=1)
        payload["roundtrip"] = {
            "endpoint_error_mean": float(d.mean()),
            "endpoint_error_per_strand": [float(x) for x in d],
            "density_rms_delta": _rms(re_code.density_map - code.density_map),
            "length_rms_delta": _rms(re_code.length_map - code.length_map),
            "cell_diagonal": code.cell_diagonal(),
        }
    report_path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    log.info(f"decoded {groom.n_strands} strands "
             f"({int(report.early_terminated.sum())} early-terminated)")
    return EXIT_OK


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def _cmd_fit_pca(args) -> int:
    out = _require_out(args)
    if (args.data is None) == (args.hdr_dir is None):
        raise DataError("fit-pca needs exactly one of --data or --hdr-dir")
    if args.data is not None:
        tensors, _ = load_container(args.data)
        if len(tensors) != 1:
            raise DataError("--data container must hold exactly one tensor")
        rows = next(iter(tensors.values())).astype(np.float64)
        tag = ""
    else:
        paths = sorted(args.hdr_dir.glob("*.hdr"))
        if not paths:
            raise DataError(f"no .hdr files in {args.hdr_dir}")
        rng = np.random.default_rng(args.seed)
        rows = []
        for p in paths:
            img = read_hdr(p)
            variants = augment_rotations(img, args.augment, rng) \
                if args.augment > 0 else [img]
            rows.extend(preprocess_hdr(v) for v in variants)
        rows = np.stack(rows)
        tag = "log1p+resize64x128"
    model = fit_pca(rows, k=args.components, preprocessing=tag)
    save_pca(out, model)
    explained = float(model.explained_variance_ratio.sum())
    log.info(f"PCA on {rows.shape[0]}x{rows.shape[1]} data: k={model.n_components}, "
             f"explained variance {explained:.3f}")
    return EXIT_OK


def _cmd_fit_gmm(args) -> int:
    out = _require_out(args)
    tensors, _ = load_container(args.data)
    if len(tensors) != 1:
        raise DataError("--data container must hold exactly one tensor")
    data = next(iter(tensors.values())).astype(np.float64)
    gmm = fit_gmm(data, K=args.components, seed=args.seed)
    from .library import save_gmm
    save_gmm(out, gmm)
    log.info(f"fitted GMM with K={args.components} on {data.shape[0]} samples, "
             f"final log-likelihood {gmm.ll_trajectory[-1]:.6g}")
    return EXIT_OK


def _cmd_pore_map(args) -> int:
    out = _require_out(args)
    tex = read_pgm(args.texture)
    response = pore_map(tex, args.sigma)
    write_pgm16(out, response, sidecar={"sigma": args.sigma})
    log.info(f"pore map {response.shape[1]}x{response.shape[0]} written to {out}")
    return EXIT_OK


def _cmd_export(args) -> int:
    out = _require_out(args)
    library = AssetLibrary.load(args.library)
    scene = SceneDescription.from_json(args.scene.read_text())
    geometry = realize_scene(library, scene)
    export_scene(scene, geometry, out)
    log.info(f"exported scene to {out}")
    return EXIT_OK


def _cmd_demo_assets(args) -> int:
    out = _require_out(args)
    from .demo import build_demo_library
    path = build_demo_library(out, seed=args.seed)
    log.info(f"demo library written to {path}")
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "sample": _cmd_sample,
    "subdivide": _cmd_subdivide,
    "encode-hair": _cmd_encode_hair,
    "decode-hair": _cmd_decode_hair,
    "fit-pca": _cmd_fit_pca,
    "fit-gmm": _cmd_fit_gmm,
    "pore-map": _cmd_pore_map,
    "export": _cmd_export,
    "demo-assets": _cmd_demo_assets,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    _setup_logging(args.json_logs)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, OSError, KeyError, ValueError,
            TypeError) as e:
        log.error(f"data error: {e}")
        return EXIT_DATA
    except NumericError as e:
        log.error(f"numeric failure: {e}")
        return EXIT_NUMERIC
    except FacegenError as e:
        log.error(f"error: {e}")
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
