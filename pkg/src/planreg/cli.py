"""Command line interface: ``planreg {generate,solve,pairwise,map,plot}``."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from planreg import __version__
from planreg.bnb import SolverConfig, default_root_box, solve
from planreg.geometry import TWO_PI, Point2, TransformBox
from planreg.instances import (InstanceSpec, PoseGraph, compose_map, generate_instance,
                               load_instance, load_pose_graph, read_point_set, save_instance,
                               save_pose_graph, shortest_paths)
from planreg.objective import RigidTransform2, inlier_indices, trim_count
from planreg.svg import alignment_svg, convergence_svg, map_svg

log = logging.getLogger("planreg")

DEFAULTS = {
    "eps": 1e-4,
    "delta": 0.1,
    "trim": 0.8,
    "box": None,
    "max_iter": 10_000_000,
    "abs_tol": 1e-10,
    "no_queue": False,
    "seed": 0,
}

BOX_HELP = ("root box as 'zx_min zx_max zy_min zy_max th_min th_max'. Default: the "
            "instance's coordinate range for generated instances, otherwise the "
            "destination bounding box inflated by the largest source radius; "
            "theta always defaults to [0, 2*pi]")


class CliError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with solver settings (flags take precedence)")
    p.add_argument("--eps", type=float, help="relative optimality tolerance (default 1e-4)")
    p.add_argument("--delta", type=float,
                   help="box size below which the relaxation bound is used (default 0.1)")
    p.add_argument("--trim", type=float, help="fraction of points kept, p = ceil(trim*n) (default 0.8)")
    p.add_argument("--box", type=str, help=BOX_HELP)
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")
    p.add_argument("--abs-tol", dest="abs_tol", type=float,
                   help="absolute gap accepted when the optimum is ~0 (default 1e-10)")
    p.add_argument("--no-queue", dest="no_queue", action="store_const", const=True,
                   help="rebuild candidate lists from scratch at every node")
    p.add_argument("--seed", type=int, help="recorded in outputs; the solver is deterministic")


def _settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        settings.update(cfg)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _parse_box(box) -> TransformBox | None:
    if box is None:
        return None
    vals = box.split() if isinstance(box, str) else list(box)
    if len(vals) != 6:
        raise CliError("--box needs six numbers: zx_min zx_max zy_min zy_max th_min th_max")
    try:
        zx0, zx1, zy0, zy1, t0, t1 = (float(v) for v in vals)
        return TransformBox(Point2(zx0, zy0), Point2(zx1, zy1), t0, t1)
    except ValueError as exc:
        raise CliError(f"invalid --box: {exc}") from exc


def _solver_config(settings: dict, root_box: TransformBox | None, trace: bool = False) -> SolverConfig:
    cfg = SolverConfig(epsilon=settings["eps"], delta=settings["delta"],
                       trim_fraction=settings["trim"], root_box=root_box,
                       max_iterations=settings["max_iter"], abs_tol=settings["abs_tol"],
                       use_queue=not settings["no_queue"], trace=trace)
    try:
        cfg.validate()
        if not 0 < cfg.trim_fraction <= 1:
            raise ValueError("--trim must lie in (0, 1]")
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return cfg


# -- generate -----------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        spec = InstanceSpec(n=args.n, sigma=args.sigma, outlier_fraction=args.outliers,
                            coord_range=(args.range[0], args.range[1]), seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    inst = generate_instance(spec)
    save_instance(inst, args.out)
    t = inst.true_transform
    print(f"wrote {args.out}: n={spec.n} sigma={spec.sigma:g} outliers={int(inst.outlier_mask.sum())} "
          f"true transform z=({t.z.x:.6g}, {t.z.y:.6g}) theta={t.theta:.6g}")
    return 0


# -- solve --------------------------------------------------------------------


def cmd_solve(args) -> int:
    settings = _settings(args)
    truth = None
    if args.instance:
        if args.src or args.dest:
            raise CliError("give either --instance or SRC DEST, not both")
        inst = load_instance(args.instance)
        src, dest, truth = inst.src, inst.dest, inst.true_transform
        root = _parse_box(settings["box"])
        if root is None and inst.spec is not None:
            lo, hi = inst.spec.coord_range
            root = TransformBox(Point2(lo, lo), Point2(hi, hi), 0.0, TWO_PI)
    else:
        if not (args.src and args.dest):
            raise CliError("need --instance or both SRC and DEST point files")
        src, dest = read_point_set(args.src), read_point_set(args.dest)
        root = _parse_box(settings["box"])
    if root is None:
        root = default_root_box(src, dest)

    cfg = _solver_config(settings, root, trace=bool(args.trace))
    t0 = time.perf_counter()
    res = solve(src, dest, cfg)
    elapsed = time.perf_counter() - t0

    out = res.to_dict()
    out["config"] = settings
    out["points"] = {"src": src.tolist(), "dest": dest.tolist()}
    if truth is not None:
        out["true_transform"] = truth.to_dict()
    out["version"] = __version__
    if args.out:
        _write_json(args.out, out)
        # timing is kept out of the deterministic result file
        if args.timing:
            _write_json(args.timing, {"wall_time_seconds": elapsed})
    if args.trace:
        with open(args.trace, "w") as fh:
            for rec in res.trace:
                fh.write(json.dumps(rec) + "\n")
    if args.plot:
        Path(args.plot).write_text(alignment_svg(src, dest, res.transform.apply(src)))

    t = res.transform
    print(f"objective={res.objective:.10g} lower={res.lower_bound_at_exit:.10g} "
          f"gap={res.relative_gap:.3g} certified={res.certified} "
          f"z=({t.z.x:.9g}, {t.z.y:.9g}) theta={t.theta:.9g} "
          f"iterations={res.stats.iterations} nodes={res.stats.nodes_created} "
          f"time={elapsed:.2f}s")
    if not res.certified and not args.allow_uncertified:
        print("result not certified (use --allow-uncertified to accept)", file=sys.stderr)
        return 1
    return 0


# -- pairwise -----------------------------------------------------------------


def _solve_pair(job):
    i, j, src, dest, settings = job
    cfg = _solver_config(settings, _parse_box(settings["box"]))
    t0 = time.perf_counter()
    res = solve(src, dest, cfg)
    return i, j, res, time.perf_counter() - t0


def cmd_pairwise(args) -> int:
    settings = _settings(args)
    scan_dir = Path(args.scans)
    if not scan_dir.is_dir():
        raise CliError(f"{scan_dir} is not a directory")
    files = sorted(f for f in scan_dir.iterdir() if f.is_file() and not f.name.startswith("."))
    scans, names, paths, unreadable = [], [], [], []
    for f in files:
        try:
            scans.append(read_point_set(f))
        except (OSError, UnicodeDecodeError, ValueError) as exc:
            log.warning("skipping unreadable scan %s: %s", f, exc)
            unreadable.append(f.name)
            continue
        names.append(f.name)
        paths.append(f)
    if len(scans) < 2:
        raise CliError(f"need at least two readable scans in {scan_dir}, found {len(scans)}")

    jobs = [(i, j, scans[i], scans[j], settings)
            for i, j in itertools.combinations(range(len(scans)), 2)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_pair, jobs))
    else:
        results = [_solve_pair(job) for job in jobs]

    graph_dir = Path(args.out).resolve().parent
    graph = PoseGraph(len(scans), names=names,
                      scans=[os.path.relpath(p.resolve(), graph_dir) for p in paths],
                      trim_fraction=settings["trim"])
    pairs = []
    for i, j, res, elapsed in results:
        graph.add_edge(i, j, res.objective, res.transform)
        pairs.append({"i": i, "j": j, "src": names[i], "dest": names[j],
                      "objective": res.objective, "wall_time_seconds": elapsed,
                      "iterations": res.stats.iterations, "certified": res.certified,
                      "transform": res.transform.to_dict()})
    # pairs that could not be attempted because one of their scans is unreadable
    absent = [{"src": a.name, "dest": b.name, "status": "absent"}
              for a, b in itertools.combinations(files, 2)
              if a.name in unreadable or b.name in unreadable]
    save_pose_graph(graph, args.out)
    if args.report:
        _write_json(args.report, {"version": __version__, "config": settings,
                                  "pairs": pairs, "absent_pairs": absent,
                                  "unreadable_scans": unreadable})
    for rec in pairs:
        print(f"{rec['src']} -> {rec['dest']}: objective={rec['objective']:.6g} "
              f"certified={rec['certified']} time={rec['wall_time_seconds']:.2f}s")
    ok = all(r["certified"] for r in pairs)
    if not ok and not args.allow_uncertified:
        print("some pairs are not certified", file=sys.stderr)
        return 1
    return 0


# -- map ----------------------------------------------------------------------


def _load_graph_scans(graph: PoseGraph, graph_path: Path) -> list[np.ndarray]:
    base = graph_path.resolve().parent
    scans = []
    for s in graph.scans:
        p = Path(s)
        scans.append(read_point_set(p if p.is_absolute() else base / p))
    return scans


def cmd_map(args) -> int:
    graph_path = Path(args.graph)
    graph = load_pose_graph(graph_path)
    try:
        paths = shortest_paths(graph, args.reference)
        poses = compose_map(graph, args.reference)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    names = graph.names or [str(i) for i in range(graph.size)]
    records = [{"node": i, "name": names[i], **poses[i].to_dict(), "path": paths[i]}
               for i in range(graph.size)]
    if args.out:
        _write_json(args.out, {"reference": args.reference, "poses": records})

    if args.svg:
        if len(graph.scans) != graph.size:
            raise CliError("pose graph does not list its scan files; cannot render map")
        scans = _load_graph_scans(graph, graph_path)
        world = [poses[i].apply(scans[i]) for i in range(graph.size)]
        masks = []
        for i in range(graph.size):
            # classify each scan against the next scan on its path to the reference
            if len(paths[i]) > 1:
                nb = paths[i][1]
            else:
                nbrs = [(w, b if a == i else a) for (a, b), (w, _) in graph.edges.items() if i in (a, b)]
                nb = min(nbrs)[1] if nbrs else None
            mask = np.ones(len(world[i]), dtype=bool)
            if nb is not None:
                p = trim_count(graph.trim_fraction, len(world[i]))
                mask[:] = False
                mask[inlier_indices(RigidTransform2.identity(), world[i], world[nb], p)] = True
            masks.append(mask)
        positions = [[pose.z.x, pose.z.y] for pose in poses]
        Path(args.svg).write_text(map_svg(world, masks, positions))
    for r in records:
        print(f"{r['name']}: z=({r['zx']:.6g}, {r['zy']:.6g}) theta={r['theta']:.6g} "
              f"path={r['path']}")
    return 0


# -- plot ---------------------------------------------------------------------


def _read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_plot(args) -> int:
    if bool(args.result) == bool(args.trace):
        raise CliError("give exactly one of --result or --trace")
    if args.result:
        res = json.loads(Path(args.result).read_text())
        try:
            src = np.asarray(res["points"]["src"], dtype=float)
            dest = np.asarray(res["points"]["dest"], dtype=float)
        except KeyError as exc:
            raise CliError(f"{args.result} has no embedded point sets") from exc
        t = RigidTransform2.from_dict(res["transform"])
        Path(args.out).write_text(alignment_svg(src, dest, t.apply(src)))
    else:
        labels = args.labels or [Path(t).stem for t in args.trace]
        if len(labels) != len(args.trace):
            raise CliError("--labels must match the number of --trace files")
        traces = {label: _read_trace(path) for label, path in zip(labels, args.trace)}
        Path(args.out).write_text(convergence_svg(traces))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planreg",
        description="Globally optimal trimmed registration of planar point sets.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random registration instance")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--outliers", type=float, default=0.1)
    p.add_argument("--range", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="register a source point set onto a destination")
    p.add_argument("src", nargs="?", help="source point file")
    p.add_argument("dest", nargs="?", help="destination point file")
    p.add_argument("--instance", help="instance JSON written by 'generate'")
    _add_solver_flags(p)
    p.add_argument("--out", help="result JSON")
    p.add_argument("--timing", help="write wall-clock time to this JSON file")
    p.add_argument("--trace", help="per-iteration bounds, one JSON record per line")
    p.add_argument("--plot", help="SVG overlay of source, destination and aligned source")
    p.add_argument("--allow-uncertified", action="store_true",
                   help="exit 0 even if the iteration cap stopped the solver early")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pairwise", help="register every pair of scans in a directory")
    p.add_argument("scans", help="directory of point files")
    _add_solver_flags(p)
    p.add_argument("--out", required=True, help="pose-graph JSON")
    p.add_argument("--report", help="run report JSON")
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--allow-uncertified", action="store_true",
                   help="exit 0 even if some pairs did not certify")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("map", help="compose scan poses along minimum-weight paths")
    p.add_argument("graph", help="pose-graph JSON written by 'pairwise'")
    p.add_argument("--reference", type=int, default=0)
    p.add_argument("--out", help="poses JSON")
    p.add_argument("--svg", help="rendered map")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("plot", help="re-render figures from result or trace files")
    p.add_argument("--result", help="result JSON from 'solve'")
    p.add_argument("--trace", action="append", help="trace file (repeatable)")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        parser.error(str(exc))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
