"""Background dictionary learning: OMP coding and MOD updates.

A dictionary is a ``(P, K)`` float array whose columns (atoms) have unit
Euclidean norm.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from spotlier.imaging import atomic_write

log = logging.getLogger(__name__)

MOD_RIDGE = 1e-10
UNIT_TOL = 1e-9


@dataclass
class SparseCode:
    support: list
    coeffs: np.ndarray
    residual_norm: float


@dataclass
class TrainingResult:
    dictionary: np.ndarray
    codes: np.ndarray
    errors: list = field(default_factory=list)  # errors[0] is the initial dictionary
    replaced_atoms: int = 0


def normalize_atoms(d):
    """Scale every column to unit norm.

    Returns ``(normalized, scales)`` with ``d = normalized * scales``, so
    codes paired with ``d`` become ``scales[:, None] * codes``.
    """
    d = np.asarray(d, dtype=np.float64)
    scales = np.linalg.norm(d, axis=0)
    zero = np.flatnonzero(scales == 0)
    if zero.size:
        raise ValueError(f"atom {zero[0]} has zero norm")
    return d / scales, scales


def check_dictionary(d):
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"dictionary must be 2-D, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("dictionary has non-finite entries")
    bad = np.flatnonzero(np.abs(np.linalg.norm(d, axis=0) - 1) > UNIT_TOL)
    if bad.size:
        raise ValueError(f"atom {bad[0]} is not unit norm")
    return d


def omp_batch(d, y, max_atoms, residual_tol=1e-6):
    """Orthogonal matching pursuit on every column of ``y``.

    Each step adds, per column, the atom with the largest absolute
    correlation to the current residual (lowest index on ties) and refits
    all selected coefficients by least squares. A column stops once its
    residual norm is at most ``residual_tol`` or it holds ``max_atoms``.

    Returns ``(codes, residual_norms)`` with ``codes`` of shape ``(K, L)``.
    """
    d = np.asarray(d, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    k, n_cols = d.shape[1], y.shape[1]
    if max_atoms > k:
        raise ValueError(f"max_atoms {max_atoms} exceeds atom count {k}")

    # work in the K-dimensional correlation domain: D^T r = D^T y - G_S c
    gram = d.T @ d
    dty = d.T @ y
    support = np.zeros((n_cols, max_atoms), dtype=np.int64)
    coef = np.zeros((n_cols, max_atoms))
    size = np.zeros(n_cols, dtype=np.int64)
    y_sq = np.einsum("ij,ij->j", y, y)
    norms = np.sqrt(y_sq)
    active = norms > residual_tol

    for step in range(max_atoms):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        corr = dty[:, idx]
        for t in range(step):
            corr = corr - gram[:, support[idx, t]] * coef[idx, t]
        corr = np.abs(corr)
        if step:
            corr[support[idx, :step].T, np.arange(idx.size)] = -1.0
        best = np.argmax(corr, axis=0)
        # residual already orthogonal to every atom: nothing left to add
        stuck = corr[best, np.arange(idx.size)] <= 1e-14 * np.maximum(norms[idx], 1.0)
        if stuck.any():
            active[idx[stuck]] = False
            idx, best = idx[~stuck], best[~stuck]
            if idx.size == 0:
                break
        support[idx, step] = best
        sup = support[idx, : step + 1]
        g = gram[sup[:, :, None], sup[:, None, :]]
        rhs = dty[sup, idx[:, None]]
        c = np.linalg.solve(g, rhs[..., None])[..., 0]
        coef[idx, : step + 1] = c
        size[idx] = step + 1
        # least-squares optimum: ||r||^2 = ||y||^2 - b^T c
        norms[idx] = np.sqrt(np.maximum(y_sq[idx] - np.einsum("ij,ij->i", rhs, c), 0.0))
        active[idx] = norms[idx] > residual_tol

    codes = np.zeros((k, n_cols))
    for t in range(max_atoms):
        used = size > t
        codes[support[used, t], np.flatnonzero(used)] = coef[used, t]
    norms = np.linalg.norm(y - d @ codes, axis=0)
    return codes, norms


def omp(d, y, max_atoms, residual_tol=1e-6):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    codes, norms = omp_batch(d, y[:, None], max_atoms, residual_tol)
    support = [int(i) for i in np.flatnonzero(codes[:, 0])]
    return SparseCode(support, codes[support, 0], float(norms[0]))


def mod_update(y_train, psi, replace_unused=True):
    """Least-squares dictionary for fixed codes, with unit-norm atoms.

    Solves ``D = Y psi^T (psi psi^T + ridge I)^-1`` then normalizes the
    atoms. Returns ``(D, psi_rescaled)`` with ``D @ psi_rescaled`` equal
    to the unnormalized product. Atoms no code uses are replaced by the
    worst-represented training columns.
    """
    y = np.asarray(y_train, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    k = psi.shape[0]
    a = psi @ psi.T + MOD_RIDGE * np.eye(k)
    try:
        d = np.linalg.solve(a, psi @ y.T).T
    except np.linalg.LinAlgError:
        raise ValueError("code Gram matrix is singular even after regularization") from None
    if not np.all(np.isfinite(d)):
        raise ValueError("code Gram matrix is singular even after regularization")

    unused = np.flatnonzero(~np.any(psi != 0, axis=1))
    if unused.size:
        if not replace_unused:
            raise ValueError(f"atom {unused[0]} is unused by every code")
        used = np.setdiff1d(np.arange(k), unused)
        errs = np.linalg.norm(y - d[:, used] @ psi[used], axis=0)
        order = np.argsort(-errs, kind="stable")
        order = order[errs[order] > 0]
        if order.size < unused.size:
            raise ValueError("not enough nonzero training columns to replace unused atoms")
        for atom, col in zip(unused, order):
            d[:, atom] = y[:, col]
        log.info("replaced %d unused atom(s) with worst-represented columns", unused.size)

    d, scales = normalize_atoms(d)
    return d, psi * scales[:, None]


def representation_error(y, d, psi):
    return float(np.linalg.norm(y - d @ psi))


def _initial_atoms(y, k, rng):
    """k distinct nonzero training columns in seeded random order."""
    chosen, seen = [], set()
    for col in rng.permutation(y.shape[1]):
        v = y[:, col]
        if not np.any(v):
            continue
        key = v.tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(col)
        if len(chosen) == k:
            break
    if len(chosen) < k:
        raise ValueError(f"only {len(chosen)} distinct nonzero training patches for {k} atoms")
    return y[:, chosen]


def _reseed(y, d, psi, order, sparsity, residual_tol):
    """Swap the first untried rarely used atom for the worst-fit training column.

    Returns the recoded ``(d, psi, error)`` or None when ``order`` is empty.
    """
    if not order:
        return None
    atom = order.pop(0)
    worst = int(np.argmax(np.linalg.norm(y - d @ psi, axis=0)))
    col = y[:, worst]
    if not np.any(col):
        return None
    trial = d.copy()
    trial[:, atom] = col / np.linalg.norm(col)
    codes, _ = omp_batch(trial, y, sparsity, residual_tol)
    return trial, codes, representation_error(y, trial, codes)


def train_mod(y_train, k, sparsity=5, iters=50, seed=0, residual_tol=1e-6, stall=1e-3):
    """Learn a ``(P, k)`` dictionary by alternating OMP and MOD.

    OMP codes are only accepted for a column when they fit at least as
    well as that column's previous code under the current dictionary, so
    the recorded representation error never increases.

    When an iteration improves the error by less than the relative
    ``stall`` amount, the least used atom is replaced by the worst
    represented training column; the swap is kept only if the recoded
    error does not go up. Repeated stalls try the next least used atom.
    """
    y = np.asarray(y_train, dtype=np.float64)
    if y.shape[1] < k:
        raise ValueError(f"{y.shape[1]} training patches is fewer than {k} atoms")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    sparsity = min(sparsity, k)
    rng = np.random.default_rng(seed)
    d, _ = normalize_atoms(_initial_atoms(y, k, rng))

    psi, _ = omp_batch(d, y, sparsity, residual_tol)
    errors = [representation_error(y, d, psi)]
    replaced = 0
    untried = None
    for it in range(iters):
        if it:
            stalled = errors[-2] - errors[-1] <= stall * errors[-2]
            swap = None
            if stalled:
                if untried is None:
                    usage = np.count_nonzero(psi, axis=1)
                    untried = [int(a) for a in np.argsort(usage, kind="stable")]
                swap = _reseed(y, d, psi, untried, sparsity, residual_tol)
            if swap is not None and swap[2] <= errors[-1]:
                d, psi, _ = swap
                replaced += 1
                untried = None
                log.debug("MOD iteration %d: reseeded an atom", it + 1)
            else:
                fresh, fresh_norms = omp_batch(d, y, sparsity, residual_tol)
                old_norms = np.linalg.norm(y - d @ psi, axis=0)
                better = fresh_norms <= old_norms
                psi = np.where(better[None, :], fresh, psi)
        replaced += int(np.count_nonzero(~np.any(psi != 0, axis=1)))
        d, psi = mod_update(y, psi)
        errors.append(representation_error(y, d, psi))
        log.debug("MOD iteration %d: error %.6g", it + 1, errors[-1])
    return TrainingResult(d, psi, errors, replaced)


def save_dictionary(d, path):
    d = np.asarray(d, dtype=np.float64)
    p, k = d.shape
    lines = [f"SPOTDICT 1 {p} {k}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in d]
    atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


def load_dictionary(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "SPOTDICT" or header[1] != "1":
            raise ValueError(f"{path}: bad dictionary header {' '.join(header)!r}")
        p, k = int(header[2]), int(header[3])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != p or any(len(r) != k for r in rows):
        raise ValueError(f"{path}: expected {p} rows of {k} values")
    return check_dictionary(np.array(rows, dtype=np.float64))
