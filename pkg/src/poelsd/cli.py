"""Command-line interface: detect, eval, synth, sweep.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .edgemap import NORMALIZE_MODES, fallback_edges, load_edge_map, read_image
from .growing import MODES, POE, POEV2, PRESETS, DetectionParams
from .metrics import EvalConfig, evaluate, f_score, heatmap_match, load_shanghaitech_json, rasterize
from .pipeline import detect as run_detect
from .segments import FORMATS, read_segments, serialize

log = logging.getLogger("poelsd")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
IMAGE_SUFFIXES = (".pgm", ".png")
SEGMENT_SUFFIXES = (".txt", ".json")
DEFAULT_LAMBDAS = tuple(i / 10 for i in range(10))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def read_config(path) -> dict:
    """key=value lines; '#' starts a comment. Keys use the long flag names."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_detection_flags(p):
    p.add_argument("--mode", choices=MODES, default=POEV2)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="generic: lambda=0.1, s=5; wireframe: lambda=0.8, s=3")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="seed threshold (POEv2) or binarization threshold (POE)")
    p.add_argument("--search", type=int, default=None, help="search neighbourhood side s (odd)")
    p.add_argument("--lw", type=float, default=3.0, help="max distance to the line, pixels")
    p.add_argument("--tau-div", type=float, default=16.0, help="angle tolerance tau = pi / value")
    p.add_argument("--angles", type=int, default=16, help="number of directions P")
    p.add_argument("--window", type=int, default=7, help="window half-width W")
    p.add_argument("--epsilon", type=float, default=1.0, help="allowed false detections")
    p.add_argument("--nms", action="store_true", help="thin the edge map before detection")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poelsd", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="key=value file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect line segments in edge maps")
    p.add_argument("--input", type=Path, required=True, help="edge map file or directory")
    p.add_argument("--output", type=Path, required=True, help="output file or directory")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--normalize", choices=NORMALIZE_MODES, default="auto")
    p.add_argument("--fallback-edges", action="store_true",
                   help="input is a grayscale image; derive edges from gradients")
    p.add_argument("--dump-regions", type=Path, help="write accepted regions as JSON lines")
    p.add_argument("--workers", type=int, default=1, help="parallel images in directory mode")
    _add_detection_flags(p)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", type=Path, required=True, help="directory of predicted segments")
    p.add_argument("--gt", type=Path, required=True,
                   help="ground-truth directory or wireframe annotation JSON file")
    p.add_argument("--images", type=Path, help="directory with images giving the dimensions")
    p.add_argument("--size", help="WIDTHxHEIGHT used when no image is found")
    p.add_argument("--d-match", type=float, default=0.0075,
                   help="pixel match tolerance as a fraction of the image diagonal")
    p.add_argument("--dt", type=float, nargs="+", default=[5.0, 10.0, 15.0],
                   help="structural AP squared-distance thresholds (128x128 frame)")
    p.add_argument("--metric", choices=("heatmap", "sap", "both"), default="both")
    p.add_argument("--output", type=Path, default=Path("eval_report.json"))

    p = sub.add_parser("synth", help="write a synthetic edge-map dataset")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--min-segments", type=int, default=5)
    p.add_argument("--max-segments", type=int, default=15)
    p.add_argument("--min-length", type=float, default=40.0)
    p.add_argument("--noise", type=float, default=0.02, help="salt noise probability")
    p.add_argument("--no-blur", action="store_true", help="binary rendering instead of coverage")

    p = sub.add_parser("sweep", help="F^H of both modes over a lambda grid")
    p.add_argument("--data", type=Path, required=True, help="directory of edge maps + gt .txt")
    p.add_argument("--lambdas", type=float, nargs="+", default=list(DEFAULT_LAMBDAS))
    p.add_argument("--search", type=int, default=5)
    p.add_argument("--d-match", type=float, default=0.0075)
    p.add_argument("--nms", action="store_true")
    p.add_argument("--output", type=Path, help="write the table as JSON")
    return parser


def params_from_args(args) -> DetectionParams:
    preset = PRESETS[args.preset] if args.preset else PRESETS["generic"]
    lam = args.lam if args.lam is not None else preset["lam"]
    s = args.search if args.search is not None else preset["s"]
    if not args.tau_div > 0:
        raise UsageError("--tau-div must be positive")
    try:
        return DetectionParams(lam=lam, W=args.window, P=args.angles, tau=math.pi / args.tau_div,
                               l_w=args.lw, s=s, epsilon=args.epsilon, mode=args.mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_input(path: Path, normalize: str, fallback: bool) -> np.ndarray:
    if fallback:
        raw, _ = read_image(path)
        return fallback_edges(raw)
    return load_edge_map(path, normalize)


def _detect_one(path: Path, out: Path, params: DetectionParams, args_dict: dict):
    values = _load_input(path, args_dict["normalize"], args_dict["fallback_edges"])
    segs, regions = run_detect(values, params, nms=args_dict["nms"], return_regions=True)
    height, width = values.shape
    out.write_bytes(serialize(segs, args_dict["format"], (width, height)))
    if args_dict.get("dump_regions"):
        with open(args_dict["dump_regions"], "w") as fh:
            for region in regions:
                fh.write(json.dumps(region.to_json()) + "\n")
    return len(segs)


def cmd_detect(args) -> int:
    params = params_from_args(args)
    ext = {"text": ".txt", "json": ".json", "svg": ".svg"}[args.format]
    opts = {"normalize": args.normalize, "fallback_edges": args.fallback_edges,
            "nms": args.nms, "format": args.format, "dump_regions": args.dump_regions}
    if args.input.is_dir():
        inputs = sorted(p for p in args.input.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not inputs:
            raise FileNotFoundError(f"no .pgm/.png files in {args.input}")
        args.output.mkdir(parents=True, exist_ok=True)
        opts["dump_regions"] = None
        jobs = [(p, args.output / (p.stem + ext)) for p in inputs]
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                futures = [pool.submit(_detect_one, p, o, params, opts) for p, o in jobs]
                counts = [f.result() for f in futures]
        else:
            counts = [_detect_one(p, o, params, opts) for p, o in jobs]
        log.info("%d images, %d segments", len(jobs), sum(counts))
        return EXIT_OK
    if not args.input.exists():
        raise FileNotFoundError(f"input not found: {args.input}")
    n = _detect_one(args.input, args.output, params, opts)
    log.info("%s: %d segments", args.input, n)
    return EXIT_OK


def _stems(directory: Path, suffixes) -> dict:
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() in suffixes}


def _dims_for(stem: str, dirs, size) -> tuple[int, int]:
    for d in dirs:
        if d is None:
            continue
        for suffix in IMAGE_SUFFIXES:
            path = d / (stem + suffix)
            if path.exists():
                raw, _ = read_image(path)
                return raw.shape[1], raw.shape[0]
    if size:
        return size
    raise FileNotFoundError(f"no image dimensions for {stem!r}; pass --images or --size")


def _parse_size(text):
    if text is None:
        return None
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size expects WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def cmd_eval(args) -> int:
    if not args.d_match > 0 or not all(d > 0 for d in args.dt):
        raise UsageError("--d-match and --dt must be positive")
    config = EvalConfig(d_match=args.d_match, d_t=tuple(args.dt))
    size = _parse_size(args.size)
    if not args.pred.is_dir():
        raise FileNotFoundError(f"prediction directory not found: {args.pred}")
    preds = _stems(args.pred, SEGMENT_SUFFIXES)
    if args.gt.is_file():
        annotated = load_shanghaitech_json(args.gt)
        gt_names = sorted(annotated)
    elif args.gt.is_dir():
        gts = _stems(args.gt, SEGMENT_SUFFIXES)
        gt_names = sorted(gts)
    else:
        raise FileNotFoundError(f"ground truth not found: {args.gt}")
    if not gt_names:
        raise FileNotFoundError("no ground-truth files")
    missing = [name for name in gt_names if name not in preds]
    if missing:
        raise FileNotFoundError("missing predictions for: " + ", ".join(missing))

    pred_sets, gt_sets, dims = [], [], []
    for name in gt_names:
        pred_sets.append(read_segments(preds[name]))
        if args.gt.is_file():
            segs, wh = annotated[name]
        else:
            segs = read_segments(gts[name])
            wh = _dims_for(name, [args.images, args.gt, args.pred], size)
        gt_sets.append(segs)
        dims.append(wh)

    report = evaluate(pred_sets, gt_sets, dims, config, args.metric, names=gt_names)
    args.output.write_text(json.dumps(report.to_json(), indent=1) + "\n")
    _print_report(report, args.metric)
    return EXIT_OK


def _print_report(report, metric):
    cols = []
    if metric in ("heatmap", "both"):
        cols += [("P", report.precision), ("R", report.recall), ("F^H", report.f_h),
                 ("AP^H", report.ap_h), ("AR^H", report.ar_h)]
    cols += [(f"sAP{d:g}", v) for d, v in report.sap.items()]
    print("  ".join(f"{name:>8}" for name, _ in cols))
    print("  ".join(f"{value:8.4f}" for _, value in cols))


def cmd_synth(args) -> int:
    from .synth import write_dataset

    try:
        paths = write_dataset(
            args.output, args.count, seed=args.seed, width=args.width, height=args.height,
            n_segments=(args.min_segments, args.max_segments), min_length=args.min_length,
            noise=args.noise, blur=not args.no_blur,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    log.info("wrote %d scenes to %s", len(paths), args.output)
    return EXIT_OK


def load_dataset(directory: Path):
    """(stem, edge map, ground truth) triples for every image with a .txt sibling."""
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    images = _stems(directory, IMAGE_SUFFIXES)
    items = []
    for stem, path in images.items():
        gt_path = directory / (stem + ".txt")
        if gt_path.exists():
            items.append((stem, load_edge_map(path), read_segments(gt_path)))
    if not items:
        raise FileNotFoundError(f"no (edge map, .txt ground truth) pairs in {directory}")
    return items


def lambda_sweep(items, lambdas, s: int = 5, d_match: float = 0.0075, nms: bool = False):
    """Dataset F^H for both modes at each lambda: {mode: [f_h, ...]}."""
    table = {}
    gt_maps = [rasterize(gt, v.shape[1], v.shape[0]) for _, v, gt in items]
    for mode in (POE, POEV2):
        row = []
        for lam in lambdas:
            params = DetectionParams(lam=lam, s=s, mode=mode)
            matched = n_pred = n_gt = 0
            for (_, values, _), gmap in zip(items, gt_maps):
                segs = run_detect(values, params, nms=nms)
                m, p, g = heatmap_match(rasterize(segs, values.shape[1], values.shape[0]),
                                        gmap, d_match)
                matched, n_pred, n_gt = matched + m, n_pred + p, n_gt + g
            precision = matched / n_pred if n_pred else 0.0
            recall = matched / n_gt if n_gt else 0.0
            row.append(f_score(precision, recall))
        table[mode] = row
    return table


def cmd_sweep(args) -> int:
    for lam in args.lambdas:
        if not 0.0 <= lam <= 1.0:
            raise UsageError(f"lambda {lam} outside [0, 1]")
    try:
        DetectionParams(s=args.search)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    items = load_dataset(args.data)
    table = lambda_sweep(items, args.lambdas, args.search, args.d_match, args.nms)
    print("lambda      " + " ".join(f"{lam:7.1f}" for lam in args.lambdas))
    for mode, label in ((POE, "F^H (POE)  "), (POEV2, "F^H (POEv2)")):
        print(label + " " + " ".join(f"{v:7.4f}" for v in table[mode]))
    if args.output:
        args.output.write_text(json.dumps({"lambda": list(args.lambdas), **table}, indent=1) + "\n")
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "eval": cmd_eval, "synth": cmd_synth, "sweep": cmd_sweep}


def _apply_config(parser, argv):
    """Re-parse with config-file values installed as defaults on the chosen subparser."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    values = read_config(args.config)
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = sub_action.choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        dest = "lam" if key == "lambda" else key
        if dest not in known:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = raw.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            defaults[dest] = [action.type(v) for v in raw.split()]
        else:
            try:
                defaults[dest] = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"bad config value {key}={raw!r}") from None
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"poelsd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"poelsd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AssertionError, ArithmeticError) as exc:
        print(f"poelsd: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
