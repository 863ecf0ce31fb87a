"""Loading and factor estimation for tensor factor models.

Model: X_t = F_t x_1 A_1 ... x_K A_K + E_t with loadings normalized so
A_k.T @ A_k / p_k = I.  Estimation alternates over modes: project the series
onto the other modes' current loadings, form the projected covariance, and
take its leading eigenvectors.  The robust variant down-weights slices whose
residual scale exceeds a threshold tau before averaging the covariance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .eig import sym_eig
from .metrics import subspace_distance
from .tensor import series_mode_product, series_multi_mode_product, series_unfold

_METHODS = {"ls", "least_squares", "huber"}


class NumericalError(ValueError):
    """Non-finite values encountered in data or intermediate results."""


@dataclass(frozen=True)
class LoadingSet:
    """One loading matrix per mode, each satisfying A_k.T @ A_k / p_k = I."""

    mats: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.asarray(a, dtype=float) for a in self.mats)
        object.__setattr__(self, "mats", mats)
        for k, a in enumerate(mats):
            if a.ndim != 2:
                raise ValueError(f"loading {k} is not a matrix")
            p_k = a.shape[0]
            gram = a.T @ a / p_k
            if np.max(np.abs(gram - np.eye(a.shape[1]))) > 1e-8:
                raise ValueError(f"loading {k} violates the normalization A.T A / p = I")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.mats)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(a.shape[1] for a in self.mats)


@dataclass(frozen=True)
class EstimationConfig:
    """Settings for :func:`fit`.

    method: "ls" (least squares) or "huber" (robust weighting).
    tau: "median" resolves the robust threshold from the initial estimator's
    residual scales; a positive float fixes it.
    """

    ranks: tuple[int, ...]
    method: str = "ls"
    tau: float | str = "median"
    max_iter: int = 100
    tol: float = 1e-6
    record_diagnostics: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if not isinstance(self.tau, str):
            if not self.tau > 0:
                raise ValueError("fixed tau must be > 0")
        elif self.tau != "median":
            raise ValueError(f"tau must be 'median' or a positive number, got {self.tau!r}")

    @property
    def robust(self) -> bool:
        return self.method == "huber"


@dataclass
class EstimationResult:
    loadings: LoadingSet
    factors: np.ndarray
    iterations_run: int
    per_iteration_subspace_change: list[float]
    converged: bool
    tau_used: float | None
    diagnostics: dict | None = None


def _check_series(x: np.ndarray) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if xs.ndim < 2:
        raise ValueError("expected a series of tensors with time on the leading axis")
    if xs.shape[0] < 1:
        raise ValueError("series must contain at least one slice")
    if not np.isfinite(xs).all():
        raise NumericalError("non-finite values in input series")
    return xs


def initial_estimator(x: np.ndarray, ranks) -> LoadingSet:
    """Per-mode loadings from the unprojected sample covariances.

    A_k = sqrt(p_k) x leading r_k eigenvectors of
    sum_t unfold(X_t, k) @ unfold(X_t, k).T / (T p).
    """
    xs = _check_series(x)
    dims = xs.shape[1:]
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims):
        raise ValueError(f"got {len(ranks)} ranks for an order-{len(dims)} series")
    for k, (r, p_k) in enumerate(zip(ranks, dims)):
        if not 1 <= r <= p_k:
            raise ValueError(f"rank {r} invalid for mode {k} of size {p_k}")
    t_len = xs.shape[0]
    p = math.prod(dims)
    mats = []
    for k, r in enumerate(ranks):
        u = series_unfold(xs, k)
        m = np.einsum("tij,tkj->ik", u, u, optimize=True) / (t_len * p)
        pair = sym_eig(m, count=r)
        mats.append(math.sqrt(dims[k]) * pair.vectors)
    return LoadingSet(tuple(mats))


def projection_cov(x: np.ndarray, k: int, b: np.ndarray, weights=None) -> np.ndarray:
    """Projected mode-k covariance sum_t w_t X_{k,t} b b.T X_{k,t}.T / (T p p_{-k}).

    ``b`` is the (p_{-k} x r_{-k}) projection factor; w_t = 1 when ``weights``
    is None.
    """
    xs = _check_series(x)
    dims = xs.shape[1:]
    t_len = xs.shape[0]
    p = math.prod(dims)
    p_rest = p // dims[k]
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != p_rest or b.shape[1] < 1:
        raise ValueError(f"b must be {p_rest} x r, got {b.shape}")
    g = series_unfold(xs, k) @ b
    if weights is None:
        m = np.einsum("tij,tkj->ik", g, g, optimize=True)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (t_len,):
            raise ValueError(f"weights must have length {t_len}")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        m = np.einsum("t,tij,tkj->ik", w, g, g, optimize=True)
    return m / (t_len * p * p_rest)


def huber_loss(x, tau: float):
    """x^2/2 below the threshold, tau*|x| - tau^2/2 above it."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    x = np.abs(np.asarray(x, dtype=float))
    out = np.where(x <= tau, 0.5 * x * x, tau * x - 0.5 * tau * tau)
    return float(out) if out.ndim == 0 else out


def residual_scales(x: np.ndarray, loadings: LoadingSet) -> np.ndarray:
    """Per-slice residual scale ||X_t - X_t projected onto the loadings||_F / sqrt(p).

    Computed through the trace identity (no residual tensor materialized);
    cancellation below zero is clamped before the square root.
    """
    xs = _check_series(x)
    p = math.prod(xs.shape[1:])
    core = series_multi_mode_product(xs, loadings.mats, transpose=True)
    xnorm2 = np.einsum("ti,ti->t", xs.reshape(xs.shape[0], -1), xs.reshape(xs.shape[0], -1))
    cnorm2 = np.einsum("ti,ti->t", core.reshape(core.shape[0], -1), core.reshape(core.shape[0], -1))
    s2 = np.maximum(xnorm2 - cnorm2 / p, 0.0) / p
    s = np.sqrt(s2)
    if not np.isfinite(s).all():
        raise NumericalError("non-finite residual scale")
    return s


def _weights_from_scales(s: np.ndarray, tau: float) -> np.ndarray:
    """1/2 on slices within the threshold, (tau/2)/s_t beyond it."""
    with np.errstate(divide="ignore"):
        return np.where(s <= tau, 0.5, 0.5 * tau / s)


def huber_weights(x: np.ndarray, loadings: LoadingSet, tau: float) -> np.ndarray:
    """Per-slice robust weights in (0, 1/2]."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return _weights_from_scales(residual_scales(x, loadings), tau)


def default_tau(x: np.ndarray, loadings: LoadingSet) -> float:
    """Median of the per-slice residual scales (the median rule).

    Exactly low-rank data have all-zero scales; the threshold then falls back
    to a tiny positive floor and a RuntimeWarning is emitted.
    """
    med = float(np.median(residual_scales(x, loadings)))
    if med <= 0.0:
        warnings.warn("all residual scales are zero; tau floored at 1e-12", RuntimeWarning)
        return 1e-12
    return med


def extract_factors(x: np.ndarray, loadings: LoadingSet) -> np.ndarray:
    """Factor cores F_t = X_t x_1 A_1.T ... x_K A_K.T / p."""
    xs = _check_series(x)
    p = math.prod(xs.shape[1:])
    return series_multi_mode_product(xs, loadings.mats, transpose=True) / p


def common_components(loadings: LoadingSet, factors: np.ndarray) -> np.ndarray:
    """Reconstruction S_t = F_t x_1 A_1 ... x_K A_K."""
    return series_multi_mode_product(np.asarray(factors, dtype=float), loadings.mats)


def _sweep_gram(xs: np.ndarray, mats: list[np.ndarray], k: int) -> np.ndarray:
    """X_{k,t} B_k for all t, via sequential mode products: (T, p_k, r_{-k})."""
    proj = xs
    for j in range(len(mats)):
        if j != k:
            proj = series_mode_product(proj, j, mats[j].T)
    return series_unfold(proj, k)


def fit(x: np.ndarray, config: EstimationConfig) -> EstimationResult:
    """Alternating projection estimation of loadings and factors.

    Starting from :func:`initial_estimator`, each sweep updates the modes in
    order: mode k's projection factor is built from the current sweep's
    loadings for modes before k and the previous sweep's for modes after k.
    Under method "huber" the slice weights are recomputed from the previous
    mode-k loading and that mixed projection factor before each update.
    Convergence is declared when the largest per-mode subspace change between
    sweeps drops below ``config.tol``.

    Returns
    -------
    EstimationResult
        With factors F_t = X_t x_1 A_1.T ... x_K A_K.T / p from the final
        loadings, and the resolved robust threshold in ``tau_used``.
    """
    xs = _check_series(x)
    dims = xs.shape[1:]
    n_modes = len(dims)
    t_len = xs.shape[0]
    p = math.prod(dims)

    ie = initial_estimator(xs, config.ranks)
    mats = list(ie.mats)

    tau = None
    xnorm2 = None
    if config.robust:
        tau = default_tau(xs, ie) if config.tau == "median" else float(config.tau)
        flat = xs.reshape(t_len, -1)
        xnorm2 = np.einsum("ti,ti->t", flat, flat)

    rank_warnings: list[str] = []
    eigenvalues: list[np.ndarray] = [np.empty(0)] * n_modes
    last_weights: list[np.ndarray] = [np.empty(0)] * n_modes

    changes: list[float] = []
    converged = False
    iterations = 0
    for _ in range(config.max_iter):
        prev = list(mats)
        for k in range(n_modes):
            g = _sweep_gram(xs, mats, k)
            if config.robust:
                core = np.matmul(mats[k].T, g)
                cnorm2 = np.einsum("tij,tij->t", core, core)
                s = np.sqrt(np.maximum(xnorm2 - cnorm2 / p, 0.0) / p)
                w = _weights_from_scales(s, tau)
                m = np.einsum("t,tij,tkj->ik", w, g, g, optimize=True)
                last_weights[k] = w
            else:
                m = np.einsum("tij,tkj->ik", g, g, optimize=True)
            m /= t_len * p * (p // dims[k])
            pair = sym_eig(m, count=config.ranks[k])
            if pair.values[-1] <= 1e-14 * max(pair.values[0], 1e-300):
                msg = f"rank-deficient projected covariance at mode {k}"
                if msg not in rank_warnings:
                    rank_warnings.append(msg)
                    warnings.warn(msg, RuntimeWarning)
            mats[k] = math.sqrt(dims[k]) * pair.vectors
            eigenvalues[k] = pair.values
        iterations += 1
        change = max(subspace_distance(mats[k], prev[k]) for k in range(n_modes))
        changes.append(change)
        if change < config.tol:
            converged = True
            break

    loadings = LoadingSet(tuple(mats))
    factors = extract_factors(xs, loadings)
    diagnostics = None
    if config.record_diagnostics:
        diagnostics = {"warnings": rank_warnings, "eigenvalues": eigenvalues}
        if config.robust:
            diagnostics["weights"] = last_weights
    return EstimationResult(
        loadings=loadings,
        factors=factors,
        iterations_run=iterations,
        per_iteration_subspace_change=changes,
        converged=converged,
        tau_used=tau,
        diagnostics=diagnostics,
    )
