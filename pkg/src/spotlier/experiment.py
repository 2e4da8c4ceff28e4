"""Synthetic benchmark pipeline: train, detect, compare against baselines, sweep counts.

Frames go through 8-bit quantization exactly as they would when written
to and read back from PGM, so in-memory results match the CLI.
"""
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from spotlier import baselines, dictionary, evaluation, imaging, synth
from spotlier.detection import DetectParams, detect_frame

BETAS = (0.02, 0.05, 0.1, 0.15, 0.2)
TRAIN_FIRST_FRAME = 1000
TRAIN_FRAMES = 4
SWEEP_SPOTS = (2, 8, 32, 128)
SWEEP_FIRST_FRAME = 2000
SWEEP_FRAMES = 3
# 128 spots 25 px apart do not fit in a 274 x 384 frame
SWEEP_SIZE = 512


def quantize(img):
    return imaging.to_bytes(img) / 255.0


def training_patches(spec, atoms=None, frames=TRAIN_FRAMES, first_frame=TRAIN_FIRST_FRAME):
    """Patches from spot-free frames that share the test frames' background model."""
    bg = dataclasses.replace(spec, spots=0)
    grid = imaging.make_grid(spec.image_h, spec.image_w, spec.patch_size, spec.overlap)
    cols = []
    for i in range(first_frame, first_frame + frames):
        img = quantize(synth.make_frame(bg, i, atoms)[0])
        cols.append(imaging.extract_patches(img, grid).values)
    return np.hstack(cols)


def train_background(spec, atoms=None, k=100, sparsity=5, iters=30, seed=0):
    return dictionary.train_mod(training_patches(spec, atoms), k, sparsity, iters, seed)


def labelled_frames(spec, atoms=None):
    imgs, truths = [], []
    for i in range(spec.first_frame, spec.first_frame + spec.frames):
        img, ann = synth.make_frame(spec, i, atoms)
        imgs.append(quantize(img))
        truths.append(ann)
    return imgs, truths


@dataclass
class RunSummary:
    frame: str
    beta: float
    iterations: int
    converged: bool
    primal: float
    dual: float
    epsilon: float


@dataclass
class Comparison:
    sparse_auc: dict  # beta -> AUC
    sparse_curves: dict  # beta -> PrCurve
    baseline_auc: dict  # method -> AUC
    training_errors: list
    runs: list = field(default_factory=list)
    dictionary: np.ndarray = None

    @property
    def best_beta(self):
        # first beta in sweep order wins ties
        return max(self.sparse_auc, key=lambda b: (self.sparse_auc[b], -list(self.sparse_auc).index(b)))

    @property
    def best_auc(self):
        return self.sparse_auc[self.best_beta]

    def operating_point(self):
        """(beta, level) for counting: the tuned beta at its F1-optimal level."""
        beta = self.best_beta
        return beta, evaluation.best_f1(self.sparse_curves[beta])[0]


def compare_detectors(spec=synth.SynthSpec(), betas=BETAS, radius=10.0, mode="paper-literal",
                      level=0.07):
    """Train on spot-free frames, then score the sparse detector and the baselines."""
    atoms = synth.planted_atoms(spec)
    training = train_background(spec, atoms)
    d = training.dictionary
    imgs, truths = labelled_frames(spec, atoms)
    thresholds = evaluation.default_thresholds()
    p = spec.patch_size ** 2

    sparse, curves, runs = {}, {}, []
    for beta in betas:
        params = DetectParams(beta=beta, patch_size=spec.patch_size, overlap=spec.overlap,
                              level=level)
        responses = []
        for img, truth in zip(imgs, truths):
            _, oi, res = detect_frame(img, d, params, truth.frame)
            responses.append(oi)
            eps = np.sqrt(p * res.psi.shape[1]) * 1e-6
            runs.append(RunSummary(truth.frame, beta, res.iterations, res.converged,
                                   res.primal_residual, res.dual_residual, eps))
        curves[beta] = evaluation.pr_curve(responses, truths, radius, thresholds, mode)
        sparse[beta] = curves[beta].auc

    base = {}
    for method in baselines.METHODS:
        responses = [baselines.baseline_response(img, method) for img in imgs]
        base[method] = evaluation.pr_curve(responses, truths, radius, thresholds, mode).auc
    return Comparison(sparse, curves, base, training.errors, runs, d)


def concentration_sweep(d, beta, level, base=synth.SynthSpec(), spots=SWEEP_SPOTS,
                        size=SWEEP_SIZE, frames=SWEEP_FRAMES, first_frame=SWEEP_FIRST_FRAME):
    """Detection counts over specimens of increasing spot density.

    Returns ``(spots_per_frame, truth_counts, algo_counts)``, one entry per frame.
    """
    params = DetectParams(beta=beta, patch_size=base.patch_size, overlap=base.overlap, level=level)
    per_spec, truth_counts, algo_counts = [], [], []
    for n in spots:
        spec = dataclasses.replace(base, spots=n, image_h=size, image_w=size, frames=frames,
                                   first_frame=first_frame)
        imgs, truths = labelled_frames(spec)
        for img, truth in zip(imgs, truths):
            dets, _, _ = detect_frame(img, d, params, truth.frame)
            per_spec.append(n)
            truth_counts.append(len(truth))
            algo_counts.append(len(dets))
    return per_spec, truth_counts, algo_counts
