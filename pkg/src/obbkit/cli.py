"""``obbkit`` command line: one subcommand per pipeline stage.

Exit status is 0 on success, 2 for usage errors and 1 for bad input data.
All numbers are printed with six decimals.
"""
import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import coder, geometry, overlap, pipeline
from .evaluation import Annotations, evaluate_map, recall_counts
from .formats import (ClassIndex, FormatError, fmt, fmt_row, format_annotations, format_detections,
                      parse_annotations, parse_detections, parse_rows, read_tensor, write_tensor)
from .roialign import FeatureMap, project_rroi, rroi_align


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _classes(arg):
    return ClassIndex(arg.split(","), frozen=True) if arg else ClassIndex()


def _emit(lines, out):
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _probability(value):
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not in [0, 1]")
    return v


def _positive_int(value):
    v = int(value)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer")
    return v


def cmd_iou(args):
    if args.quads:
        a = parse_rows(_read(args.quads[0]), 8, "quad").reshape(-1, 4, 2)
        b = parse_rows(_read(args.quads[1]), 8, "quad").reshape(-1, 4, 2)
        pair_fn, elem_fn = overlap.pairwise_quad_iou, overlap.quad_iou
    else:
        a = parse_rows(_read(args.hboxes[0]), 4, "hbox")
        b = parse_rows(_read(args.hboxes[1]), 4, "hbox")
        pair_fn, elem_fn = overlap.pairwise_hbox_iou, overlap.hbox_iou
    if args.pairwise:
        return [fmt_row(row) for row in pair_fn(a, b)]
    if len(a) != len(b) and 1 not in (len(a), len(b)):
        raise FormatError(f"element-wise IoU needs equal row counts, got {len(a)} and {len(b)}")
    return [fmt(v) for v in np.atleast_1d(elem_fn(a, b))]


def cmd_nms(args):
    classes = ClassIndex()
    dets = parse_detections(_read(args.dets), classes)
    shapes = geometry.external_hbox(dets.quads) if args.kind == "hbox" else dets.quads
    if args.per_class:
        keep = overlap.batched_nms(shapes, dets.scores, dets.labels, args.iou_thr, kind=args.kind)
    else:
        keep = overlap.nms(shapes, dets.scores, args.iou_thr, kind=args.kind)
    return format_detections(dets.subset(keep), classes).splitlines()


def cmd_decode(args):
    anchors = parse_rows(_read(args.anchors), 4, "anchor")
    deltas = parse_rows(_read(args.deltas), 6, "delta")
    boxes = coder.decode(anchors, deltas)
    if args.quads:
        return [fmt_row(q) for q in geometry.vertices_from_midpoint(boxes)]
    return [fmt_row(b) for b in boxes]


def cmd_encode(args):
    anchors = parse_rows(_read(args.anchors), 4, "anchor")
    if args.gt_format == "quad":
        gt = geometry.midpoint_from_quad(parse_rows(_read(args.gt), 8, "quad").reshape(-1, 4, 2))
    else:
        gt = parse_rows(_read(args.gt), 6, "midpoint box")
    return [fmt_row(d) for d in coder.encode(anchors, gt)]


def cmd_roialign(args):
    fmap = FeatureMap(read_tensor(args.feat), stride=args.stride)
    if args.roi is not None:
        rois = parse_rows(args.roi, 5, "roi")
    elif args.rois is not None:
        rois = parse_rows(_read(args.rois), 5, "roi")
    else:
        rois = project_rroi(geometry.canonicalize_rect(parse_rows(_read(args.rects), 5, "rect")), args.stride)
    pooled = rroi_align(fmap, rois, m=args.m, samples_per_bin_axis=args.samples)
    if args.tensor_out:
        write_tensor(pooled, args.tensor_out)
    lines = []
    for k, roi_out in enumerate(pooled):
        if k:
            lines.append("")
        lines.extend(fmt_row(bin_vals) for bin_vals in roi_out.reshape(-1, roi_out.shape[-1]))
    return lines


def cmd_proposals(args):
    levels = []
    for path in args.levels:
        rows = parse_rows(_read(path), 7, "proposal")
        levels.append((rows[:, 1:], rows[:, 0]))
    props = pipeline.select_proposals(levels, pre_nms=args.pre_nms, nms_thr=args.nms_thr, max_num=args.topk)
    return [f"{fmt(s)} {fmt_row(q)}" for s, q in zip(props.scores, props.quads)]


def cmd_postprocess(args):
    classes = ClassIndex()
    dets = parse_detections(_read(args.dets), classes)
    out = pipeline.postprocess_detections(dets, score_thr=args.score_thr, nms_thr=args.nms_thr)
    return format_detections(out, classes).splitlines()


def cmd_tile(args):
    scheme = pipeline.TileScheme(args.patch, args.stride)
    offsets = pipeline.tile_offsets(args.width, args.height, scheme)
    if args.ann:
        if not args.out_dir:
            raise FormatError("--ann requires --out-dir")
        classes = ClassIndex()
        gts = parse_annotations(_read(args.ann), classes)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for ox, oy in offsets:
            tile_gts = pipeline.clip_annotations_to_tile(gts, (ox, oy), scheme.patch)
            (out_dir / f"{ox}_{oy}.txt").write_text(format_annotations(tile_gts, classes), encoding="utf-8")
    return [f"{ox} {oy}" for ox, oy in offsets]


def cmd_merge(args):
    classes = ClassIndex()
    per_patch, offsets = [], []
    for path, ox, oy in args.input:
        per_patch.append(parse_detections(_read(path), classes))
        offsets.append((float(ox), float(oy)))
    merged = pipeline.merge_patches(per_patch, offsets, nms_thr=args.nms_thr)
    return format_detections(merged, classes).splitlines()


def cmd_eval_map(args):
    classes = _classes(args.classes)
    dets, anns = [], []
    for det_path, ann_path in args.pair:
        anns.append(Annotations.from_instances(parse_annotations(_read(ann_path), classes)))
        dets.append(parse_detections(_read(det_path), classes))
    ap, mean_ap = evaluate_map(dets, anns, len(classes), metric=args.metric, iou_thr=args.iou_thr)
    lines = [f"{classes.name(c)} {fmt(v)}" for c, v in enumerate(ap) if not np.isnan(v)]
    lines.append(f"mAP {fmt(mean_ap)}")
    return lines


def cmd_eval_recall(args):
    scenes = []
    for prop_path, ann_path in args.pair:
        rows = parse_rows(_read(prop_path), 9, "proposal")
        gts = Annotations.from_instances(parse_annotations(_read(ann_path)))
        scenes.append((rows[:, 1:].reshape(-1, 4, 2), rows[:, 0], gts))
    lines = []
    for k in args.k:
        hit = total = 0
        for quads, scores, gts in scenes:
            h, t = recall_counts(quads, scores, gts.quads, k, args.iou_thr, gts.difficult)
            hit += h
            total += t
        lines.append(f"recall@{k} {fmt(hit / total if total else 0.0)}")
    return lines


def build_parser():
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="obbkit", description="Oriented bounding box tools: one subcommand per pipeline stage.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iou", help="IoU between two box files", formatter_class=fmt_cls)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--quads", nargs=2, metavar=("A", "B"), help="files of 8-value quad rows")
    g.add_argument("--hboxes", nargs=2, metavar=("A", "B"), help="files of 'cx cy w h' rows")
    p.add_argument("--pairwise", action="store_true", help="print the full IoU matrix")
    p.add_argument("--out")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("nms", help="greedy NMS over a detection file", formatter_class=fmt_cls)
    p.add_argument("dets")
    p.add_argument("--iou-thr", type=_probability, default=0.1, help="suppression IoU threshold")
    p.add_argument("--kind", choices=("quad", "hbox"), default="quad",
                   help="exact quad IoU or IoU of external rectangles")
    p.add_argument("--per-class", action="store_true", help="suppress only within a class")
    p.add_argument("--out")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("decode", help="apply 6-value deltas to anchors", formatter_class=fmt_cls)
    p.add_argument("--anchors", required=True, help="'cx cy w h' rows")
    p.add_argument("--deltas", required=True, help="'dx dy dw dh dalpha dbeta' rows")
    p.add_argument("--quads", action="store_true", help="print vertices instead of midpoint boxes")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("encode", help="regression targets of boxes w.r.t. anchors", formatter_class=fmt_cls)
    p.add_argument("--anchors", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-format", choices=("quad", "midpoint"), default="quad")
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("roialign", help="rotated RoIAlign on a tensor file", formatter_class=fmt_cls)
    p.add_argument("--feat", required=True, help=".obbt tensor of shape (C, H, W)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--roi", help="one feature-space RoI 'x y w h theta'")
    g.add_argument("--rois", help="file of feature-space RoIs")
    g.add_argument("--rects", help="file of image-space rects, projected with --stride")
    p.add_argument("--stride", type=_positive_int, default=1, help="feature map stride in pixels")
    p.add_argument("--m", type=_positive_int, default=7, help="output bins per side")
    p.add_argument("--samples", type=_positive_int, default=2, help="samples per bin along each axis")
    p.add_argument("--tensor-out", help="also write the (N, m, m, C) result as .obbt")
    p.add_argument("--out")
    p.set_defaults(func=cmd_roialign)

    p = sub.add_parser("proposals", help="select second-stage proposals", formatter_class=fmt_cls)
    p.add_argument("levels", nargs="+", help="one file per level, rows 'score cx cy w h da db'")
    p.add_argument("--pre-nms", type=_positive_int, default=2000, help="proposals kept per level before NMS")
    p.add_argument("--nms-thr", type=_probability, default=0.8, help="horizontal NMS IoU threshold")
    p.add_argument("--topk", type=_positive_int, default=1000, help="proposals kept after pooling levels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_proposals)

    p = sub.add_parser("postprocess", help="score filter + class-wise poly NMS", formatter_class=fmt_cls)
    p.add_argument("dets")
    p.add_argument("--score-thr", type=_probability, default=0.05, help="minimum class probability")
    p.add_argument("--nms-thr", type=_probability, default=0.1, help="poly NMS IoU threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("tile", help="patch offsets, optionally splitting annotations", formatter_class=fmt_cls)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--patch", type=_positive_int, default=1024, help="patch side in pixels")
    p.add_argument("--stride", type=_positive_int, default=824, help="offset step between patches")
    p.add_argument("--ann", help="annotation file to split per tile")
    p.add_argument("--out-dir", help="directory receiving <ox>_<oy>.txt tile annotations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("merge", help="merge per-patch detections", formatter_class=fmt_cls)
    p.add_argument("--input", nargs=3, action="append", required=True, metavar=("DETS", "OX", "OY"),
                   help="patch detection file and its offset; repeat per patch")
    p.add_argument("--nms-thr", type=_probability, default=0.1, help="poly NMS IoU threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval-map", help="VOC-style mAP", formatter_class=fmt_cls)
    p.add_argument("--pair", nargs=2, action="append", required=True, metavar=("DETS", "ANN"),
                   help="detections and annotations of one image; repeat per image")
    p.add_argument("--metric", choices=("voc07", "voc12"), default="voc07")
    p.add_argument("--iou-thr", type=_probability, default=0.5)
    p.add_argument("--classes", help="comma-separated class names fixing the class order")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("eval-recall", help="proposal recall at several budgets", formatter_class=fmt_cls)
    p.add_argument("--pair", nargs=2, action="append", required=True, metavar=("PROPOSALS", "ANN"),
                   help="proposal rows 'score x1 y1 ... y4' and annotations; repeat per patch")
    p.add_argument("--k", type=_positive_int, nargs="+", default=[300, 1000, 2000])
    p.add_argument("--iou-thr", type=_probability, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_recall)
    return parser


def _apply_thread_cap():
    raw = os.environ.get("OBB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise FormatError(f"OBB_THREADS must be an integer, got {raw!r}") from None
    if n > 0:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_thread_cap()
        lines = args.func(args)
        _emit(lines, args.out)
    except (FormatError, geometry.GeometryError, ValueError, OSError) as exc:
        print(f"obbkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
