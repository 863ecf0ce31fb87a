"""Rank selection via penalized eigenvalue ratios along the alternating
projection path (least-squares or robustly weighted)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eig import sym_eig
from .estimation import (
    _check_series,
    _sweep_gram,
    _weights_from_scales,
    default_tau,
    initial_estimator,
)

_METHODS = {"ls", "least_squares", "huber"}
_REGIMES = {"ge2", "lt2"}


@dataclass(frozen=True)
class RankConfig:
    """Settings for :func:`estimate_ranks`.

    epsilon_regime picks the rate constant entering the robust-path penalty:
    "ge2" uses L_star, "lt2" uses L_star_star (the noise-tail regime is not
    identifiable from data, so it is a user choice).
    """

    r_max: int = 8
    c: float = 0.0
    method: str = "ls"
    epsilon_regime: str = "ge2"
    max_iter: int = 20
    tau: float | str = "median"

    def __post_init__(self):
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.epsilon_regime not in _REGIMES:
            raise ValueError(f"unknown epsilon_regime {self.epsilon_regime!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def robust(self) -> bool:
        return self.method == "huber"


@dataclass(frozen=True)
class RateConstants:
    """Sample-size rate minima used in the selection penalties."""

    L: int
    L_star: int
    L_star_star: int
    omega: tuple[int, ...]


def rate_constants(dims, T: int) -> RateConstants:
    """Exact integer minima for the given dimensions and series length."""
    dims = tuple(int(d) for d in dims)
    T = int(T)
    if T < 1 or any(d < 1 for d in dims):
        raise ValueError("dims and T must be positive")
    p = math.prod(dims)
    p_rest = [p // d for d in dims]
    L = min(p, *(T * q for q in p_rest))
    L_star = min(p, *(q * q for q in p_rest), *(T * q for q in p_rest))
    L_star_star = min(p_rest)
    omega = tuple(min(d * T, q * q, L) for d, q in zip(dims, p_rest))
    return RateConstants(L=L, L_star=L_star, L_star_star=L_star_star, omega=omega)


def eigenvalue_ratio_pick(values, penalty: float, r_max: int) -> int:
    """argmax over j <= r_max of values[j] / (values[j+1] + penalty), 1-based.

    Ties break toward the smallest j.  ``values`` must be non-increasing,
    nonnegative, and supply at least r_max + 1 entries.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < r_max + 1:
        raise ValueError(f"need at least {r_max + 1} eigenvalues, got {v.size}")
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    scale = max(v[0], 1.0)
    if (v < -1e-12 * scale).any() or (np.diff(v) > 1e-12 * scale).any():
        raise ValueError("values must be non-increasing and nonnegative")
    num = v[:r_max]
    den = v[1:r_max + 1] + penalty
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = num / den
    ratios = np.where(np.isnan(ratios), -np.inf, ratios)
    return int(np.argmax(ratios)) + 1


@dataclass
class RankResult:
    """Selected ranks plus the iteration trace."""

    ranks: tuple[int, ...]
    iterations: list[tuple[int, ...]]
    converged: bool
    eigenvalues: tuple[np.ndarray, ...]
    warnings: list[str] = field(default_factory=list)


def estimate_ranks(x: np.ndarray, config: RankConfig) -> RankResult:
    """Iterative penalized eigenvalue-ratio selection of (r_1, ..., r_K).

    Starts from the initial estimator at r_max columns per mode and repeats:
    for each mode, form the projected covariance from the other modes' current
    loadings (robust path: recompute slice weights first), select the rank by
    :func:`eigenvalue_ratio_pick`, then renew the mode's loading with the
    first r_hat + 2 eigenvectors (clamped at p_k).  Stops when the integer
    rank vector repeats or after ``max_iter`` sweeps.

    The penalty is c * omega_k^(-1/2) on the least-squares path and
    c * L~^(-1/2) on the robust path, with L~ chosen by epsilon_regime.
    """
    xs = _check_series(x)
    dims = xs.shape[1:]
    n_modes = len(dims)
    t_len = xs.shape[0]
    p = math.prod(dims)

    notes: list[str] = []
    r_cap = []
    for k, p_k in enumerate(dims):
        cap = min(config.r_max, p_k - 1)
        if cap < 1:
            raise ValueError(f"mode {k} has size {p_k}; cannot form an eigenvalue ratio")
        if cap < config.r_max:
            notes.append(f"mode {k}: ratio search capped at {cap} (p_k={p_k})")
        r_cap.append(cap)

    rc = rate_constants(dims, t_len)
    if config.robust:
        l_tilde = rc.L_star if config.epsilon_regime == "ge2" else rc.L_star_star
        penalties = [config.c / math.sqrt(l_tilde)] * n_modes
    else:
        penalties = [config.c / math.sqrt(w) for w in rc.omega]

    ie = initial_estimator(xs, tuple(min(config.r_max, d) for d in dims))
    mats = list(ie.mats)

    tau = None
    xnorm2 = None
    if config.robust:
        tau = default_tau(xs, ie) if config.tau == "median" else float(config.tau)
        if not tau > 0:
            raise ValueError("fixed tau must be > 0")
        flat = xs.reshape(t_len, -1)
        xnorm2 = np.einsum("ti,ti->t", flat, flat)

    history: list[tuple[int, ...]] = [(config.r_max,) * n_modes]
    spectra: list[np.ndarray] = [np.empty(0)] * n_modes
    converged = False
    for _ in range(config.max_iter):
        current = []
        for k in range(n_modes):
            g = _sweep_gram(xs, mats, k)
            if config.robust:
                core = np.matmul(mats[k].T, g)
                cnorm2 = np.einsum("tij,tij->t", core, core)
                s = np.sqrt(np.maximum(xnorm2 - cnorm2 / p, 0.0) / p)
                w = _weights_from_scales(s, tau)
                m = np.einsum("t,tij,tkj->ik", w, g, g, optimize=True)
            else:
                m = np.einsum("tij,tkj->ik", g, g, optimize=True)
            m /= t_len * p * (p // dims[k])
            pair = sym_eig(m)
            r_hat = eigenvalue_ratio_pick(pair.values, penalties[k], r_cap[k])
            current.append(r_hat)
            n_cols = min(r_hat + 2, dims[k])
            if n_cols < r_hat + 2:
                note = f"mode {k}: eigenvector inflation clamped at p_k={dims[k]}"
                if note not in notes:
                    notes.append(note)
            mats[k] = math.sqrt(dims[k]) * pair.vectors[:, :n_cols]
            spectra[k] = pair.values
        history.append(tuple(current))
        if history[-1] == history[-2]:
            converged = True
            break
    return RankResult(
        ranks=history[-1],
        iterations=history,
        converged=converged,
        eigenvalues=tuple(spectra),
        warnings=notes,
    )
