"""Command-line entry points: serve, prelabel, eval, export, bench."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .config import AppConfig, load_config
from .errors import AnnotationError


def _add_param_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ground-thresh", type=float, help="ground inlier distance, meters")
    parser.add_argument("--ground-seed-frac", type=float, help="lowest-z seed fraction")
    parser.add_argument("--ground-iters", type=int, help="max refit iterations")
    parser.add_argument("--epsilon", type=float, help="cluster neighbor distance, meters")
    parser.add_argument("--prune-radius", type=float, help="click neighborhood radius, meters")
    parser.add_argument("--downsample-cell", type=float, help="voxel size for downsampling, meters")
    parser.add_argument("--theta-step", type=float, help="heading search step, degrees")


def _apply_overrides(config: AppConfig, args) -> AppConfig:
    g = config.ground
    if args.ground_thresh is not None:
        g = dataclasses.replace(g, dist_thresh=args.ground_thresh)
    if args.ground_seed_frac is not None:
        g = dataclasses.replace(g, seed_fraction=args.ground_seed_frac)
    if args.ground_iters is not None:
        g = dataclasses.replace(g, max_iterations=args.ground_iters)
    c = config.cluster
    if args.epsilon is not None:
        c = dataclasses.replace(c, epsilon=args.epsilon)
    if args.prune_radius is not None:
        c = dataclasses.replace(c, prune_radius=args.prune_radius)
    if args.downsample_cell is not None:
        c = dataclasses.replace(c, downsample_cell=args.downsample_cell)
    f = config.fit
    if args.theta_step is not None:
        f = dataclasses.replace(f, theta_step_deg=args.theta_step)
    return dataclasses.replace(config, ground=g, cluster=c, fit=f)


def _load_config(args) -> AppConfig:
    return load_config(args.config) if args.config else AppConfig()


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _apply_overrides(_load_config(args), args)
    if args.data_root:
        config = dataclasses.replace(config, data_root=args.data_root)
    ui_dir = args.ui
    if ui_dir is None and os.path.isdir("frontend/dist"):
        ui_dir = "frontend/dist"
    app = create_app(config, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_prelabel(args) -> int:
    from .fusion import transfer_labels
    from .sequence import scan_sequence_dir

    seq = scan_sequence_dir(args.seq)
    out_dir = args.out or os.path.join(args.seq, "prelabels")
    os.makedirs(out_dir, exist_ok=True)
    written = 0
    for k, desc in enumerate(seq.frames):
        calib = seq.load_calibration(k)
        mask = seq.load_mask(k)
        if calib is None or mask is None:
            print(f"{desc.frame_id}: skipped (no calibration or mask)", file=sys.stderr)
            continue
        cloud = seq.load_cloud(k)
        labels = transfer_labels(calib, cloud, mask)
        out_path = os.path.join(out_dir, f"{desc.frame_id}.json")
        with open(out_path, "w") as fh:
            json.dump(
                [{"index": p.index, "label": p.label, "instance": p.instance_id}
                 for p in labels],
                fh,
            )
        written += 1
        print(f"{desc.frame_id}: {len(labels)} pre-labels -> {out_path}")
    print(f"wrote pre-labels for {written}/{len(seq)} frames")
    return 0


def cmd_eval(args) -> int:
    from .metrics import match_instances, precision_recall
    from .store import parse_label_text

    def read_dir(d):
        frames = {}
        for entry in sorted(os.listdir(d)):
            if entry.endswith(".txt"):
                with open(os.path.join(d, entry)) as fh:
                    frames[os.path.splitext(entry)[0]] = parse_label_text(fh.read())
        return frames

    pred = read_dir(args.pred)
    gt = read_dir(args.gt)
    results = []
    for frame in sorted(set(pred) | set(gt)):
        p = [(f"{frame}/p{i}", box) for i, (_, box) in enumerate(pred.get(frame, []))]
        g = [(f"{frame}/g{i}", box) for i, (_, box) in enumerate(gt.get(frame, []))]
        results.append(match_instances(p, g, args.iou_thresh))
    report = precision_recall(results)

    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    print(f"frames evaluated : {len(results)}")
    print(f"true positives   : {report.true_positives}")
    print(f"false positives  : {report.false_positives}")
    print(f"false negatives  : {report.false_negatives}")
    print(f"precision        : {fmt(report.precision)}")
    print(f"recall           : {fmt(report.recall)}")
    print(f"mean matched IoU : {fmt(report.mean_iou)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report.as_dict(), fh, indent=2)
            fh.write("\n")
        print(f"report -> {args.json}")
    return 0


def cmd_export(args) -> int:
    from .store import export_labels, load_session

    session = load_session(args.session)
    os.makedirs(args.out, exist_ok=True)
    for frame_id in session.frame_ids:
        text = export_labels(session, frame_id)
        path = os.path.join(args.out, f"{frame_id}.txt")
        with open(path, "w") as fh:
            fh.write(text)
        print(f"{frame_id}: {len(text.splitlines())} boxes -> {path}")
    return 0


def cmd_bench(args) -> int:
    from .bench import run_click_benchmark

    result = run_click_benchmark(n_points=args.points, repeats=args.repeats)
    print(result.summary())
    budget = 300.0
    ok = result.click_ms_median < budget
    print(f"interactive budget {budget:.0f} ms: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pclabel",
                                     description="LiDAR point-cloud annotation tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP annotation service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--data-root", help="sequence directory or directory of sequences")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="built frontend directory to serve at /")
    _add_param_overrides(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("prelabel", help="batch mask-to-cloud label transfer")
    p.add_argument("--seq", required=True, help="sequence directory")
    p.add_argument("--out", help="output directory (default <seq>/prelabels)")
    p.set_defaults(func=cmd_prelabel)

    p = sub.add_parser("eval", help="score predicted label files against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted label files")
    p.add_argument("--gt", required=True, help="directory of ground-truth label files")
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--json", help="also write a machine-readable report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="write per-frame label files from a session")
    p.add_argument("--session", required=True, help="session JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("bench", help="one-click latency benchmark")
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AnnotationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
