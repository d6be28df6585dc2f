"""Command-line entry point wiring all stages together.

Subcommands: build (stack -> depth map + report), synth (generate a
synthetic focal stack), eval (region MAE against ground truth), bench
(timing report), serve (HTTP focus service), debug-dump (per-stage
intermediate images).

Exit codes: 0 success, 2 usage, 3 data error, 4 degenerate geometry
(the build produced no triangles).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evalkit, focus_measure, pipeline, raster, stack_io, volume as vol_mod
from . import focuscontrol, graph as graph_mod
from .errors import FocalGraphError, StageError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4


@dataclass
class RunConfig:
    stack: str
    out: str | None = None
    preview: str | None = None
    sigma: float = focus_measure.DEFAULT_SIGMA
    non_edge_ratio: float = focus_measure.DEFAULT_NON_EDGE_RATIO
    cos_threshold: float = -0.95
    use_all_nodes: bool = False
    fill: str = "none"
    view_step: int = raster.DEFAULT_VIEW_STEP
    threads: int = 1
    lens: focuscontrol.LensConfig = field(default_factory=focuscontrol.LensConfig)

    def pipeline_params(self) -> pipeline.PipelineParams:
        return pipeline.PipelineParams(
            canny=focus_measure.CannyParams(
                sigma=self.sigma, non_edge_ratio=self.non_edge_ratio
            ),
            cos_threshold=self.cos_threshold,
            use_all_nodes=self.use_all_nodes,
            fill=self.fill,
            view_step=self.view_step,
            threads=self.threads,
        )


def run_build(config: RunConfig):
    """Full build with stage attribution; returns (DepthMap, report)."""
    import time

    try:
        stack = stack_io.load_stack(config.stack)
    except FocalGraphError as exc:
        raise StageError("stack_io", exc) from exc
    params = config.pipeline_params()
    t0 = time.perf_counter()
    try:
        vol, per_slice_ms = pipeline.preprocess_stack(stack, params)
    except FocalGraphError as exc:
        raise StageError("focus_measure", exc) from exc
    t1 = time.perf_counter()
    try:
        depth_map, refined, stage_ms, counts = pipeline.depth_stage(vol, params)
    except FocalGraphError as exc:
        raise StageError("depth_map", exc) from exc
    t2 = time.perf_counter()
    report = {
        "stack": str(config.stack),
        "image": {
            "width": stack.width,
            "height": stack.height,
            "depth_count": stack.depth_count,
        },
        "params": {
            "sigma": config.sigma,
            "non_edge_ratio": config.non_edge_ratio,
            "cos_threshold": config.cos_threshold,
            "use_all_nodes": config.use_all_nodes,
            "fill": config.fill,
            "view_step": config.view_step,
            "threads": config.threads,
        },
        "node_count": counts["node_count"],
        "max_node_count": counts["max_node_count"],
        "retained_node_count": counts["retained_node_count"],
        "triangle_count": counts["triangle_count"],
        "stage_ms": stage_ms,
        "per_slice_ms": per_slice_ms,
        "preprocess_ms": (t1 - t0) * 1e3,
        "depth_stage_ms": (t2 - t1) * 1e3,
        "total_ms": (t2 - t0) * 1e3,
    }
    if config.out:
        raster.save_fdm(depth_map, config.out)
    if config.preview:
        view = raster.normalize_for_view(depth_map, config.view_step)
        stack_io.write_pgm(config.preview, view.gray)
        rgb_path = Path(config.preview).with_suffix(".ppm")
        stack_io.write_ppm(rgb_path, view.rgb)
    return depth_map, report


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=focus_measure.DEFAULT_SIGMA,
                   help="Gaussian derivative std-dev in pixels")
    p.add_argument("--non-edge-ratio", type=float,
                   default=focus_measure.DEFAULT_NON_EDGE_RATIO,
                   help="fraction of pixels assumed non-edge (threshold quantile)")
    p.add_argument("--cos-threshold", type=float, default=-0.95,
                   help="max cosine between candidate directions")
    p.add_argument("--use-all-nodes", action="store_true",
                   help="keep non-maximal nodes through refinement and rebuild")
    p.add_argument("--fill", choices=["none", "nearest"], default="none",
                   help="hole handling for uncovered pixels")
    p.add_argument("--view-step", type=int, default=raster.DEFAULT_VIEW_STEP,
                   help="intensity step per depth index in previews")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for per-slice preprocessing")


def _add_lens_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lens-min-mm", type=float, default=50.0)
    p.add_argument("--lens-max-mm", type=float, default=120.0)
    p.add_argument("--lens-settle-ms", type=float, default=2.5)


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        stack=args.stack,
        out=getattr(args, "out", None),
        preview=getattr(args, "preview", None),
        sigma=args.sigma,
        non_edge_ratio=args.non_edge_ratio,
        cos_threshold=args.cos_threshold,
        use_all_nodes=args.use_all_nodes,
        fill=args.fill,
        view_step=args.view_step,
        threads=args.threads,
    )


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _cmd_build(args) -> int:
    config = _config_from_args(args)
    depth_map, report = run_build(config)
    if args.json:
        _write_json(args.json, report)
    print(
        f"{report['node_count']} nodes, {report['retained_node_count']} retained, "
        f"{report['triangle_count']} triangles; "
        f"preprocess {report['preprocess_ms']:.1f}ms, "
        f"depth stage {report['depth_stage_ms']:.1f}ms"
    )
    if report["triangle_count"] == 0:
        print("no triangles: depth map is empty", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


_SCENES = {
    "flat": lambda a: evalkit.flat_scene(a.width, a.height, depth=a.depth),
    "slant": lambda a: evalkit.slanted_scene(
        a.width, a.height, depth_span=(0.0, a.depth_count - 1.0)
    ),
    "fin": lambda a: evalkit.fin_scene(a.width, a.height, seed=a.seed),
    "half": lambda a: evalkit.half_textured_scene(a.width, a.height, depth=a.depth),
}


def _cmd_synth(args) -> int:
    scene = _SCENES[args.scene](args)
    stack, gt = evalkit.synth_stack(scene, args.depth_count)
    out_dir = Path(args.out_dir)
    manifest = stack_io.save_stack(stack, out_dir, name=args.scene)
    gt_map = raster.DepthMap(
        depth=gt, valid=np.ones(gt.shape, dtype=bool), depth_count=args.depth_count
    )
    raster.save_fdm(gt_map, out_dir / f"{args.scene}_gt.fdm")
    print(f"wrote {manifest} and {args.scene}_gt.fdm")
    return EXIT_OK


def _cmd_eval(args) -> int:
    depth_map = raster.load_fdm(args.map)
    gt_map = raster.load_fdm(args.gt)
    gt = np.where(gt_map.valid, gt_map.depth, np.nan)
    if args.mask:
        mask = evalkit.load_mask(args.mask)
    else:
        mask = evalkit.full_mask(gt.shape)
    mask = evalkit.RegionMask(
        label=mask.label, pixels=mask.pixels & gt_map.valid
    )
    value = evalkit.mae(depth_map, gt, mask)
    coverage = float((depth_map.valid & mask.pixels).sum() / max(mask.pixels.sum(), 1))
    payload = {
        "mask": mask.label,
        "mae": value,
        "coverage": coverage,
        "evaluated_pixels": int((depth_map.valid & mask.pixels).sum()),
    }
    if args.json:
        _write_json(args.json, payload)
    if value is None:
        print(f"{mask.label}: no valid pixels under the mask")
    else:
        print(f"{mask.label}: MAE {value:.4f} over {payload['evaluated_pixels']} px "
              f"(coverage {coverage:.1%})")
    return EXIT_OK


def _cmd_bench(args) -> int:
    stack = stack_io.load_stack(args.stack)
    config = _config_from_args(args)
    report = evalkit.bench(stack, config.pipeline_params(), repetitions=args.reps)
    if args.json:
        _write_json(args.json, report)
    pre = report["stages"]["preprocess"]
    dm = report["stages"]["depth_map"]
    print(
        f"preprocess median {pre['median_ms']:.1f}ms "
        f"(worst slice {pre['max_slice_median_ms']:.1f}ms); "
        f"depth stage median {dm['median_ms']:.1f}ms; "
        f"end-to-end {report['end_to_end']['median_ms']:.1f}ms"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    stack = stack_io.load_stack(args.stack)
    depth_map = raster.load_fdm(args.map)
    lens = focuscontrol.LensConfig(
        min_focal_mm=args.lens_min_mm,
        max_focal_mm=args.lens_max_mm,
        settle_time_ms=args.lens_settle_ms,
    )
    focuscontrol.serve(
        stack, depth_map, lens, bind=args.bind, cors_origin=args.cors_origin
    )
    return EXIT_OK


def _cmd_debug_dump(args) -> int:
    config = _config_from_args(args)
    stack = stack_io.load_stack(config.stack)
    params = config.pipeline_params()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    z = args.z if args.z is not None else stack.depth_count // 2
    if not 0 <= z < stack.depth_count:
        raise StageError("debug", FocalGraphError(f"slice {z} out of range"))
    for name, img in focus_measure.debug_images(stack.images[z], params.canny).items():
        stack_io.write_pgm(out / f"slice_{z:03d}_{name}.pgm", img)

    vol, _ = pipeline.preprocess_stack(stack, params)
    maps = vol_mod.build_max_maps(vol)
    peak = maps.M.max()
    m8 = np.zeros_like(maps.M, dtype=np.uint8)
    if peak > 0:
        m8 = np.clip(np.rint(maps.M * (255.0 / peak)), 0, 255).astype(np.uint8)
    stack_io.write_pgm(out / "max_map.pgm", m8)
    dview = np.where(
        maps.M > 0, np.clip(maps.D * max(1, 255 // max(stack.depth_count - 1, 1)) + 1, 1, 255), 0
    ).astype(np.uint8)
    stack_io.write_pgm(out / "depth_index_map.pgm", dview)

    nodes = graph_mod.extract_local_maxima(maps)
    graph = graph_mod.delaunay(nodes)
    parts = graph_mod.partition(graph)
    overlay = np.zeros((stack.height, stack.width), dtype=np.uint8)
    for nd in nodes:
        overlay[nd.y, nd.x] = 255
    stack_io.write_pgm(out / "local_maxima.pgm", overlay)
    for label, ids in (("gmax", parts[0]), ("gnonmax", parts[1])):
        mask = np.zeros((stack.height, stack.width), dtype=np.uint8)
        for i in ids:
            mask[nodes[i].y, nodes[i].x] = 255
        stack_io.write_pgm(out / f"nodes_{label}.pgm", mask)
    _write_svg(out / "graph_all.svg", graph, stack.width, stack.height)

    depth_map, refined, _, _ = pipeline.depth_stage(vol, params)
    _write_svg(out / "graph_refined.svg", refined, stack.width, stack.height)
    view = raster.normalize_for_view(depth_map, config.view_step)
    stack_io.write_pgm(out / "depth_map.pgm", view.gray)
    stack_io.write_ppm(out / "depth_map.ppm", view.rgb)
    print(f"wrote debug dumps to {out}")
    return EXIT_OK


def _write_svg(path, graph, width, height) -> None:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="black"/>',
    ]
    for a, b, c in graph.triangles:
        pts = " ".join(
            f"{graph.nodes[i].x},{graph.nodes[i].y}" for i in (a, b, c)
        )
        lines.append(
            f'<polygon points="{pts}" fill="none" stroke="white" stroke-width="0.5"/>'
        )
    for nd in graph.nodes:
        lines.append(f'<circle cx="{nd.x}" cy="{nd.y}" r="1" fill="red"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focalgraph",
        description="Depth from focus over a sparse edge graph, in real time.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="focal stack -> depth map")
    p.add_argument("--stack", required=True, help="stack manifest path")
    p.add_argument("--out", help="output .fdm depth raster")
    p.add_argument("--preview", help="output preview .pgm (and .ppm with red invalid)")
    p.add_argument("--json", help="write the build report here")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("synth", help="generate a synthetic focal stack")
    p.add_argument("--scene", choices=sorted(_SCENES), default="flat")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--depth-count", type=int, default=9)
    p.add_argument("--depth", type=float, default=4.0,
                   help="plane depth index for flat/half scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="mean absolute error against ground truth")
    p.add_argument("--map", required=True, help=".fdm under test")
    p.add_argument("--gt", required=True, help="ground-truth .fdm")
    p.add_argument("--mask", help="region mask .pgm (0/255)")
    p.add_argument("--json", help="write the result here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="timing report")
    p.add_argument("--stack", required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--json", help="write the report here")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="HTTP focus-control service")
    p.add_argument("--stack", required=True)
    p.add_argument("--map", required=True, help="prebuilt .fdm for the stack")
    p.add_argument("--bind", default="127.0.0.1:8713")
    p.add_argument("--cors-origin", default="*")
    _add_lens_flags(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("debug-dump", help="write per-stage intermediate images")
    p.add_argument("--stack", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--z", type=int, help="slice index for the focus-measure dumps")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_debug_dump)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_DATA
    except FocalGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
