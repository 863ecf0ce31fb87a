"""Evaluation quantities: subspace distance, reconstruction errors, rolling
validation, loading distances and complete-linkage clustering."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .eig import sym_eig
from .tensor import series_multi_mode_product


def orthonormal_basis(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space, via the eigenvectors of a.T @ a."""
    a = np.asarray(a, dtype=float)
    pair = sym_eig(a.T @ a)
    lead = max(pair.values[0], 0.0)
    if pair.values[-1] <= 1e-12 * max(lead, 1e-300):
        raise ValueError("rank-deficient input: column space is degenerate")
    return a @ (pair.vectors / np.sqrt(pair.values))


def subspace_distance(a_hat: np.ndarray, a_true: np.ndarray) -> float:
    """Distance in [0, 1] between the column spaces of two p x r matrices.

    0 when the spans coincide, 1 when they are orthogonal.  Basis-free: any
    right-multiplication by a nonsingular matrix leaves the value unchanged.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    a_true = np.asarray(a_true, dtype=float)
    if a_hat.shape != a_true.shape:
        raise ValueError(f"shape mismatch: {a_hat.shape} vs {a_true.shape}")
    q_hat = orthonormal_basis(a_hat)
    q = orthonormal_basis(a_true)
    r = a_hat.shape[1]
    # ||P_hat - P||_F^2 / (2r) equals 1 - tr(P_hat P)/r but stays accurate
    # near zero (sums of tiny squares instead of cancelling subtraction).
    val = np.sum(np.square(q_hat @ q_hat.T - q @ q.T)) / (2 * r)
    return float(np.sqrt(min(max(val, 0.0), 1.0)))


def sign_align(a_hat: np.ndarray, a_true: np.ndarray) -> np.ndarray:
    """Diagonal +-1 matrix aligning estimated column signs with the truth.

    Entry j is the sign of the j-th diagonal of a_true.T @ a_hat / p; exact
    zeros map to +1.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    a_true = np.asarray(a_true, dtype=float)
    if a_hat.shape != a_true.shape:
        raise ValueError(f"shape mismatch: {a_hat.shape} vs {a_true.shape}")
    p = a_hat.shape[0]
    d = np.sign(np.einsum("ij,ij->j", a_true, a_hat) / p)
    d[d == 0] = 1.0
    return np.diag(d)


def mse_common(est: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared entry error: sum_t ||est_t - truth_t||_F^2 / (T p)."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return float(np.mean(np.square(est - truth)))


def relative_mse(x: np.ndarray, s_hat: np.ndarray) -> float:
    """sum_t ||x_t - s_hat_t||_F^2 / sum_t ||x_t||_F^2."""
    x = np.asarray(x, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if x.shape != s_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {s_hat.shape}")
    den = float(np.sum(np.square(x)))
    if den <= 0.0:
        raise ValueError("zero data: relative error undefined")
    return float(np.sum(np.square(x - s_hat)) / den)


def rolling_validation(x: np.ndarray, window_years: int, period_length: int, est) -> list[float]:
    """Out-of-sample reconstruction error over rolling blocks.

    The series is scored in consecutive blocks of ``period_length`` slices.
    For each block, loadings are fit on the ``window_years * period_length``
    slices immediately before it, held fixed, and the block's factors and
    reconstruction are computed with them; the block's relative MSE is
    returned.  A trailing partial block is dropped.
    """
    from .estimation import common_components, extract_factors, fit

    x = np.asarray(x, dtype=float)
    t_len = x.shape[0]
    window = int(window_years) * int(period_length)
    if window < 1 or period_length < 1:
        raise ValueError("window and period length must be positive")
    if window + period_length > t_len:
        raise ValueError(f"window of {window} slices plus one block exceeds T={t_len}")
    out = []
    for start in range(window, t_len - period_length + 1, period_length):
        result = fit(x[start - window:start], est)
        block = x[start:start + period_length]
        factors = extract_factors(block, result.loadings)
        s_hat = common_components(result.loadings, factors)
        out.append(relative_mse(block, s_hat))
    return out


def loading_distance_matrix(a: np.ndarray) -> np.ndarray:
    """Pairwise distances between the p entities' loading vectors.

    Each of the r coordinates is standardized by its sample variance across
    entities; zero-variance coordinates are dropped with a warning.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a p x r loading matrix")
    var = a.var(axis=0, ddof=1)
    keep = var > 0
    if not keep.any():
        raise ValueError("all loading coordinates have zero variance")
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance coordinate(s)")
    z = a[:, keep] / np.sqrt(var[keep])
    diff = z[:, None, :] - z[None, :, :]
    return np.sqrt(np.sum(np.square(diff), axis=-1))


@dataclass
class ClusterTree:
    """Agglomerative merge history: (cluster_a, cluster_b, height) triples.

    Leaves are labelled 0..n-1; the cluster created by merge i gets label n+i.
    """

    merges: list[tuple[int, int, float]]
    labels: list[int] = field(default_factory=list)


def complete_linkage(d: np.ndarray) -> ClusterTree:
    """Agglomerative clustering with max-pairwise (complete) linkage."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    if float(np.max(np.abs(d - d.T), initial=0.0)) > 1e-12 * scale:
        raise ValueError("distance matrix must be symmetric")
    n = d.shape[0]
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    merges: list[tuple[int, int, float]] = []
    next_id = n
    while len(members) > 1:
        ids = sorted(members)
        best = None
        for ai in range(len(ids) - 1):
            for bi in range(ai + 1, len(ids)):
                u, v = ids[ai], ids[bi]
                h = max(d[i, j] for i in members[u] for j in members[v])
                if best is None or h < best[0]:
                    best = (h, u, v)
        h, u, v = best
        merges.append((u, v, float(h)))
        members[next_id] = members.pop(u) + members.pop(v)
        next_id += 1
    return ClusterTree(merges, labels=list(range(n)))
