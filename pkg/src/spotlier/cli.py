"""Command-line entry point: ``spotlier {synth,train-dict,detect,baseline,eval}``.

Exit codes: 0 success, 2 usage or validation error, 1 runtime error.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from spotlier import baselines, dictionary, evaluation, imaging, synth
from spotlier.detection import DetectParams, detect_frame, threshold_and_group
from spotlier.points import (AnnotationSet, DetectionSet, read_annotations, read_detections,
                             write_detections)
from spotlier.robust_coding import write_trace

log = logging.getLogger("spotlier")


class UsageError(Exception):
    pass


def _jobs(args):
    env = os.environ.get("SPOTLIER_JOBS")
    n = int(env) if env else args.jobs
    if n < 1:
        raise UsageError(f"jobs must be >= 1, got {n}")
    return n


def _pmap(fn, items, jobs):
    if jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def list_frames(directory):
    path = Path(directory)
    if not path.is_dir():
        raise UsageError(f"frame directory {directory} does not exist")
    frames = sorted(path.glob("*.pgm"))
    if not frames:
        raise UsageError(f"no .pgm frames in {directory}")
    return frames


def _validated(fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- synth -----------------------------------------------------------------

def cmd_synth(args):
    spec = _validated(
        synth.SynthSpec, frames=args.frames, image_h=args.height, image_w=args.width,
        patch_size=args.patch_size, overlap=args.overlap,
        background_atoms=args.background_atoms, background_sparsity=args.background_sparsity,
        spots=args.spots, spot_amplitude=args.amplitude, spot_sigma=args.spot_sigma,
        noise_sigma=args.noise, seed=args.seed, first_frame=args.first_frame)
    _validated(imaging.make_grid, spec.image_h, spec.image_w, spec.patch_size, spec.overlap)
    synth.generate_dataset(spec, args.out)
    print(f"wrote {spec.frames} frames to {args.out}")
    return 0


# -- train-dict ------------------------------------------------------------

def cmd_train(args):
    frames = list_frames(args.frames)
    if args.atoms < 1 or args.sparsity < 1 or args.iters < 1:
        raise UsageError("atoms, sparsity and iters must be >= 1")
    truth = {}
    if args.truth:
        truth = _validated(read_annotations, args.truth)

    columns = []
    for path in frames:
        img = imaging.load_image(path)
        grid = _validated(imaging.make_grid, *img.shape, args.patch_size, args.overlap)
        pm = imaging.extract_patches(img, grid)
        keep = np.ones(grid.n_patches, dtype=bool)
        if path.stem in truth:
            keep = _validated(imaging.exclude_annotated_patches, grid, truth[path.stem].xy)
        columns.append(pm.values[:, keep])
    y = np.hstack(columns)
    if y.shape[1] < args.atoms:
        raise UsageError(f"only {y.shape[1]} training patches for {args.atoms} atoms")

    result = dictionary.train_mod(y, args.atoms, args.sparsity, args.iters, args.seed)
    dictionary.save_dictionary(result.dictionary, args.out)
    log_path = args.log or f"{args.out}.errors.csv"
    lines = ["iter,error"] + [f"{i},{e!r}" for i, e in enumerate(result.errors)]
    imaging.atomic_write(log_path, ("\n".join(lines) + "\n").encode())
    print(f"trained {args.atoms} atoms on {y.shape[1]} patches; "
          f"error {result.errors[0]:.6g} -> {result.errors[-1]:.6g}")
    return 0


# -- detect ----------------------------------------------------------------

def cmd_detect(args):
    frames = list_frames(args.frames)
    params = DetectParams(beta=args.beta, alpha=args.alpha, patch_size=args.patch_size,
                          overlap=args.overlap, level=args.level, mu0=args.mu0,
                          max_iters=args.max_iters)
    _validated(params.validate)
    if params.mu0 <= 0 or params.max_iters < 1:
        raise UsageError("mu0 must be positive and max-iters >= 1")
    d = _validated(dictionary.load_dictionary, args.dict)
    p = args.patch_size ** 2
    if d.shape[0] != p:
        raise UsageError(
            f"dictionary patch dimension {d.shape[0]} does not match "
            f"patch size {args.patch_size} ({p} pixels)")
    jobs = _jobs(args)
    for directory in (args.outlier_dir, args.diagnostics_dir):
        if directory:
            os.makedirs(directory, exist_ok=True)

    def run(path):
        img = imaging.load_image(path)
        dets, oi, res = detect_frame(img, d, params, frame=path.stem,
                                     trace=bool(args.diagnostics_dir))
        if not res.converged:
            log.warning("%s: ADMM stopped after %d iterations without converging",
                        path.stem, res.iterations)
        if args.outlier_dir:
            imaging.save_image(oi.values, os.path.join(args.outlier_dir, path.stem + ".pgm"))
        if args.diagnostics_dir:
            write_trace(os.path.join(args.diagnostics_dir, path.stem + ".csv"), res.trace)
        return dets

    results = _pmap(run, frames, jobs)
    write_detections(args.out, results)
    print(f"{sum(len(r) for r in results)} detections in {len(frames)} frames -> {args.out}")
    return 0


# -- baseline --------------------------------------------------------------

def cmd_baseline(args):
    if args.method not in baselines.METHODS:
        raise UsageError(f"unknown method {args.method!r}")
    if not 0 <= args.level <= 1:
        raise UsageError(f"level must be in [0, 1], got {args.level}")
    frames = list_frames(args.frames)
    kw = {}
    if args.method == "gsoth":
        kw = dict(shape=args.footprint, subtract_from=args.subtract_from,
                  smoothing=_validated(baselines.KernelSpec, 5, args.smooth_sigma))
    jobs = _jobs(args)
    if args.outlier_dir:
        os.makedirs(args.outlier_dir, exist_ok=True)

    def run(path):
        img = imaging.load_image(path)
        response = baselines.baseline_response(img, args.method, **kw)
        if args.outlier_dir:
            imaging.save_image(response, os.path.join(args.outlier_dir, path.stem + ".pgm"))
        return threshold_and_group(response, args.level, path.stem)

    results = _pmap(run, frames, jobs)
    write_detections(args.out, results)
    print(f"{sum(len(r) for r in results)} detections in {len(frames)} frames -> {args.out}")
    return 0


# -- eval ------------------------------------------------------------------

def _thresholds(n):
    if n < 2:
        raise UsageError("need at least 2 thresholds")
    return np.round(np.linspace(0.0, 1.0, n), 10)


def cmd_eval(args):
    if bool(args.outliers) == bool(args.detections):
        raise UsageError("give exactly one of --outliers or --detections")
    if args.radius <= 0:
        raise UsageError("radius must be positive")
    if args.mode not in evaluation.MODES:
        raise UsageError(f"unknown mode {args.mode!r}")
    frame_ids = None
    if args.frame_list:
        frame_ids = [p.stem for p in list_frames(args.frame_list)]
    truth = _validated(read_annotations, args.truth)

    if args.outliers:
        paths = list_frames(args.outliers)
        frames = [p.stem for p in paths]
        images = {p.stem: p for p in paths}
    else:
        dets = _validated(read_detections, args.detections)
        frames = sorted(set(dets) | set(truth)) if frame_ids is None else frame_ids

    known = set(frames if frame_ids is None else frame_ids)
    extra = sorted(set(truth) - known)
    if args.detections:
        extra += sorted(set(dets) - known)
    if args.outliers and frame_ids is not None:
        extra += sorted(set(frames) - set(frame_ids))
    if extra:
        raise UsageError(f"frame set mismatch: {', '.join(extra[:5])} not in the evaluated frames")
    truths = [truth.get(f, AnnotationSet(f)) for f in frames]

    if args.counts:
        if not args.detections:
            raise UsageError("--counts needs --detections")
        algo = [len(dets.get(f, ())) for f in frames]
        true_counts = [len(t) for t in truths]
        evaluation.write_counts_csv(args.out, frames, true_counts, algo)
        try:
            r = evaluation.pearson(true_counts, algo)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(f"pearson,{r!r}")
        return 0

    thresholds = _thresholds(args.thresholds)
    if args.outliers:
        responses = [imaging.load_image(images[f]) for f in frames]
        curve = evaluation.pr_curve(responses, truths, args.radius, thresholds, args.mode)
    else:
        det_list = [dets.get(f, DetectionSet(f)) for f in frames]
        curve = evaluation.pr_curve_from_detections(det_list, truths, args.radius,
                                                    thresholds, args.mode)
    evaluation.write_pr_csv(args.out, curve)
    print(f"auc,{curve.auc!r}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="spotlier", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def geometry(p):
        p.add_argument("--patch-size", type=int, default=27)
        p.add_argument("--overlap", type=float, default=0.5)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--spots", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first-frame", type=int, default=0)
    p.add_argument("--height", type=int, default=274)
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--spot-sigma", type=float, default=1.5)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--background-atoms", type=int, default=20)
    p.add_argument("--background-sparsity", type=int, default=3)
    geometry(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-dict", help="learn a background dictionary (MOD)")
    p.add_argument("--frames", required=True, help="directory of training PGMs")
    p.add_argument("--truth", help="annotation CSV; annotated patches are excluded")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training error CSV (default: OUT.errors.csv)")
    p.add_argument("--atoms", type=int, default=100)
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    geometry(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="sparse-outlier detection")
    p.add_argument("--frames", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1e-5)
    p.add_argument("--level", type=float, default=0.07)
    p.add_argument("--mu0", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--outlier-dir", help="write normalized outlier images here")
    p.add_argument("--diagnostics-dir", help="write per-frame ADMM traces here")
    p.add_argument("--jobs", type=int, default=1)
    geometry(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("baseline", help="LoG / DoG / top-hat detection")
    p.add_argument("--frames", required=True)
    p.add_argument("--method", required=True, choices=baselines.METHODS)
    p.add_argument("--level", type=float, default=0.07)
    p.add_argument("--out", required=True)
    p.add_argument("--outlier-dir", help="write normalized responses here")
    p.add_argument("--footprint", choices=("square", "cross"), default="square")
    p.add_argument("--subtract-from", choices=("smoothed", "original"), default="smoothed")
    p.add_argument("--smooth-sigma", type=float, default=0.8)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="precision-recall / count correlation")
    p.add_argument("--truth", required=True)
    p.add_argument("--outliers", help="directory of normalized response PGMs")
    p.add_argument("--detections", help="detection CSV")
    p.add_argument("--frame-list", help="directory whose PGMs define the frame set")
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--mode", choices=evaluation.MODES, default="paper-literal")
    p.add_argument("--thresholds", type=int, default=101)
    p.add_argument("--counts", action="store_true", help="per-frame counts and Pearson r")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spotlier: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"spotlier: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
