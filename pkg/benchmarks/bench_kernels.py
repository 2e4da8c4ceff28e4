"""Time the compiled and NumPy kernel backends on frame-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per kernel for each available backend and the
speed-up of the compiled one.
"""
import argparse
import timeit

import numpy as np

from spotlier import baselines, kernels
from spotlier.imaging import make_grid


def cases(rng):
    img = rng.random((274, 384))
    g = make_grid(274, 384, 27, 0.5)
    patches = rng.random((g.n_pixels, g.n_patches))
    mask = rng.random((274, 384)) > 0.93
    labels, n = kernels.label8(mask)
    fp = baselines.footprint("square")
    k = baselines.log_kernel(5, 0.8)
    r = rng.normal(size=(729, 468))
    return {
        "soft_threshold": lambda b: b.soft_threshold(r, 0.1),
        "extract_patches": lambda b: b.extract_patches(img, 27, g.stride, g.rows, g.cols),
        "accumulate_patches": lambda b: b.accumulate_patches(patches, 27, g.stride, g.rows, g.cols,
                                                             274, 384),
        "label8": lambda b: b.label8(mask),
        "component_stats": lambda b: b.component_stats(labels, n, img),
        "centered_correlate": lambda b: b.centered_correlate(img, k, 0.0),
        "grey_erode": lambda b: b.grey_erode(img, fp),
        "grey_dilate": lambda b: b.grey_dilate(img, fp),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    names = kernels.available_backends()
    backends = {n: kernels.load_backend(n) for n in names}
    print(f"{'kernel':<20}" + "".join(f"{n + ' ms':>12}" for n in names)
          + ("   speed-up" if len(names) > 1 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        times = []
        for b in backends.values():
            number = 5
            times.append(min(timeit.repeat(lambda: fn(b), number=number, repeat=args.repeat)) / number)
        row = f"{name:<20}" + "".join(f"{t * 1e3:12.3f}" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
