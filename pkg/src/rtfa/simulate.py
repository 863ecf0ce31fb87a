"""Data-generating process and the Monte-Carlo replication engine.

Factors and noise both follow stationary AR(1) recursions on the vectorized
slices; the noise innovation has a Kronecker-structured covariance (ones on
the diagonal, 1/p_k off-diagonal per mode) and is optionally heavy-tailed via
a per-slice t mixing variable.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .estimation import (
    EstimationConfig,
    LoadingSet,
    common_components,
    fit,
)
from .metrics import mse_common, orthonormal_basis, subspace_distance
from .ranks import RankConfig, estimate_ranks
from .tensor import series_multi_mode_product

_NOISE_LAWS = {"tensor_normal", "tensor_t"}


@dataclass(frozen=True)
class DgpConfig:
    """Simulation design.

    zero_noise is a test-only switch producing noiseless observations (the
    noise draws are skipped entirely).
    """

    dims: tuple[int, ...]
    T: int
    ranks: tuple[int, ...] = (3, 3, 3)
    phi: float = 0.1
    psi: float = 0.1
    noise_law: str = "tensor_normal"
    t_dof: float = 3.0
    seed: int = 0
    burn_in: int = 100
    zero_noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if len(self.ranks) != len(self.dims):
            raise ValueError("ranks and dims must have the same length")
        if any(d < 1 for d in self.dims) or self.T < 1:
            raise ValueError("dims and T must be positive")
        if any(not 1 <= r <= d for r, d in zip(self.ranks, self.dims)):
            raise ValueError("each rank must satisfy 1 <= r_k <= p_k")
        if not abs(self.phi) < 1 or not abs(self.psi) < 1:
            raise ValueError("|phi| and |psi| must be < 1")
        if self.noise_law not in _NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.noise_law!r}")
        if self.noise_law == "tensor_t" and not self.t_dof > 2:
            raise ValueError("t_dof must exceed 2 so the noise variance exists")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")


@dataclass(frozen=True)
class SimulatedDataset:
    observations: np.ndarray
    true_loadings: LoadingSet
    true_factors: np.ndarray
    true_common: np.ndarray
    raw_loadings: tuple[np.ndarray, ...]
    noise: np.ndarray


def replication_rng(seed: int, rep: int | None = None) -> np.random.Generator:
    """Deterministic stream derivation: rep i uses SeedSequence(seed, spawn_key=(i,))."""
    if rep is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(rep),)))


def gen_loadings(dims, ranks, rng: np.random.Generator):
    """Raw uniform(-1, 1) loadings plus a normalized representative.

    The raw matrices drive data generation; the normalized LoadingSet spans
    the same column spaces and satisfies A.T A / p = I for use wherever the
    normalization invariant is required.
    """
    raw = tuple(rng.uniform(-1.0, 1.0, size=(int(d), int(r))) for d, r in zip(dims, ranks))
    normalized = LoadingSet(
        tuple(math.sqrt(a.shape[0]) * orthonormal_basis(a) for a in raw)
    )
    return raw, normalized


def gen_factors(ranks, T: int, phi: float, rng: np.random.Generator, burn_in: int = 100) -> np.ndarray:
    """Stationary AR(1) factor cores with unit per-coordinate variance."""
    if not abs(phi) < 1:
        raise ValueError("|phi| must be < 1")
    shape = tuple(int(r) for r in ranks)
    n = int(burn_in) + int(T)
    eps = rng.standard_normal(size=(n + 1, *shape))
    out = np.empty_like(eps)
    out[0] = eps[0]
    scale = math.sqrt(1.0 - phi * phi)
    for i in range(1, n + 1):
        out[i] = phi * out[i - 1] + scale * eps[i]
    return out[n - T + 1:]


def _kron_factor_chols(dims) -> list[np.ndarray]:
    """Cholesky factor of each per-mode covariance (1 diagonal, 1/p_k off)."""
    chols = []
    for p_k in dims:
        sigma = np.full((p_k, p_k), 1.0 / p_k)
        np.fill_diagonal(sigma, 1.0)
        chols.append(np.linalg.cholesky(sigma))
    return chols


def gen_noise(
    dims,
    T: int,
    psi: float,
    rng: np.random.Generator,
    law: str = "tensor_normal",
    dof: float = 3.0,
    burn_in: int = 100,
) -> np.ndarray:
    """Stationary AR(1) noise with Kronecker-structured innovation covariance.

    Innovations are tensor-normal (mode-wise Cholesky of the per-mode
    covariances); under law "tensor_t" each innovation slice is additionally
    divided by sqrt(chi2(dof)/dof), one mixing draw per slice.
    """
    if law not in _NOISE_LAWS:
        raise ValueError(f"unknown noise law {law!r}")
    if not abs(psi) < 1:
        raise ValueError("|psi| must be < 1")
    if law == "tensor_t" and not dof > 2:
        raise ValueError("dof must exceed 2")
    dims = tuple(int(d) for d in dims)
    n = int(burn_in) + int(T)
    z = rng.standard_normal(size=(n + 1, *dims))
    u = series_multi_mode_product(z, _kron_factor_chols(dims))
    if law == "tensor_t":
        mix = np.sqrt(rng.chisquare(dof, size=n + 1) / dof)
        u /= mix.reshape((n + 1,) + (1,) * len(dims))
    out = np.empty_like(u)
    out[0] = u[0]
    scale = math.sqrt(1.0 - psi * psi)
    for i in range(1, n + 1):
        out[i] = psi * out[i - 1] + scale * u[i]
    return out[n - T + 1:]


def gen_dataset(config: DgpConfig, rng: np.random.Generator | None = None) -> SimulatedDataset:
    """Draw one dataset. Draw order is fixed: loadings, factors, noise.

    Observations are common components plus noise, where the common component
    uses the raw loadings; the stored loading/factor truth is the normalized
    representative of the same fit (identical column spaces and identical
    common components).
    """
    if rng is None:
        rng = replication_rng(config.seed)
    raw, normalized = gen_loadings(config.dims, config.ranks, rng)
    cores = gen_factors(config.ranks, config.T, config.phi, rng, config.burn_in)
    common = series_multi_mode_product(cores, raw)
    if config.zero_noise:
        noise = np.zeros_like(common)
    else:
        noise = gen_noise(
            config.dims,
            config.T,
            config.psi,
            rng,
            law=config.noise_law,
            dof=config.t_dof,
            burn_in=config.burn_in,
        )
    transforms = [n.T @ a / n.shape[0] for n, a in zip(normalized.mats, raw)]
    true_factors = series_multi_mode_product(cores, transforms)
    return SimulatedDataset(
        observations=common + noise,
        true_loadings=normalized,
        true_factors=true_factors,
        true_common=common,
        raw_loadings=raw,
        noise=noise,
    )


# --- Monte-Carlo engine -------------------------------------------------------

Row = tuple[int, Union[int, None], str, float]


@dataclass
class MonteCarloResult:
    """Per-replication rows (rep, mode, metric, value) and (metric, mean, sd) aggregates."""

    rows: list[Row]
    aggregate: list[tuple[str, float, float]]


def _replication_rows(task) -> list[Row]:
    dgp, est, rep = task
    ds = gen_dataset(dgp, rng=replication_rng(dgp.seed, rep))
    rows: list[Row] = []
    if isinstance(est, RankConfig):
        result = estimate_ranks(ds.observations, est)
        for k, r in enumerate(result.ranks):
            rows.append((rep, k + 1, "rank", float(r)))
        rows.append((rep, None, "exact", 1.0 if result.ranks == dgp.ranks else 0.0))
    else:
        result = fit(ds.observations, est)
        for k, a_hat in enumerate(result.loadings.mats):
            d = subspace_distance(a_hat, ds.true_loadings.mats[k])
            rows.append((rep, k + 1, "distance", d))
        s_hat = common_components(result.loadings, result.factors)
        rows.append((rep, None, "mse", mse_common(s_hat, ds.true_common)))
    return rows


def run_monte_carlo(
    dgp: DgpConfig,
    est: EstimationConfig | RankConfig,
    reps: int,
    workers: int = 1,
) -> MonteCarloResult:
    """Replicated simulation and estimation with per-replication RNG streams.

    Replication i draws its dataset from replication_rng(dgp.seed, i), so the
    result is bit-identical for any ``workers`` count; records are reduced in
    replication order.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    tasks = [(dgp, est, rep) for rep in range(reps)]
    if workers <= 1:
        per_rep = [_replication_rows(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_replication_rows, tasks))
    rows = [row for rep_rows in per_rep for row in rep_rows]
    order: list[tuple[str, int | None]] = []
    grouped: dict[tuple[str, int | None], list[float]] = {}
    for rep, mode, metric, value in rows:
        key = (metric, mode)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(value)
    aggregate = []
    for metric, mode in order:
        vals = np.asarray(grouped[(metric, mode)])
        name = metric if mode is None else f"{metric}_mode{mode}"
        sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
        aggregate.append((name, float(vals.mean()), sd))
    return MonteCarloResult(rows=rows, aggregate=aggregate)


def write_replication_csv(result: MonteCarloResult, path) -> None:
    """Long-format per-replication records: rep, mode, metric, value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "mode", "metric", "value"])
        for rep, mode, metric, value in result.rows:
            writer.writerow([rep, "" if mode is None else mode, metric, f"{value:.17g}"])


def write_aggregate_csv(result: MonteCarloResult, path) -> None:
    """Aggregated records: metric, mean, sd."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean", "sd"])
        for name, mean, sd in result.aggregate:
            writer.writerow([name, f"{mean:.17g}", f"{sd:.17g}"])
