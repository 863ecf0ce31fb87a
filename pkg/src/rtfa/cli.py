"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 I/O or file-format error,
4 numerical failure.  The environment variable ``RTFA_WORKERS`` overrides the
``--workers`` flag where one exists.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .eig import varimax
from .estimation import (
    EstimationConfig,
    LoadingSet,
    NumericalError,
    common_components,
    fit,
)
from .io import FileFormatError, read_matrix, read_series, write_matrix, write_series
from .metrics import (
    complete_linkage,
    loading_distance_matrix,
    mse_common,
    relative_mse,
    subspace_distance,
)
from .ranks import RankConfig, estimate_ranks
from .simulate import DgpConfig, gen_dataset, replication_rng, run_monte_carlo

_SETTINGS = {
    "A": (10, 10, 10),
    "B": (100, 10, 10),
    "C": (20, 20, 20),
    "D": (30, 30, 30),
}
_T_GRID = (20, 50, 100, 200)
_SERIES_EXTS = (".tsrb", ".tsr")


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _parse_tau(text: str):
    if text == "median":
        return "median"
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tau must be 'median' or a number, got {text!r}")
    if not val > 0:
        raise argparse.ArgumentTypeError("fixed tau must be > 0")
    return val


def _resolve_workers(flag_value: int) -> int:
    env = os.environ.get("RTFA_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RTFA_WORKERS must be an integer, got {env!r}")
    return max(1, flag_value)


def _loading_paths(prefix: str):
    paths = []
    k = 1
    while True:
        path = Path(f"{prefix}_loading{k}.mtx")
        if not path.exists():
            break
        paths.append(path)
        k += 1
    if not paths:
        raise FileNotFoundError(f"no loading files found at {prefix}_loading1.mtx")
    return paths


def _find_series(prefix: str, stem: str) -> Path:
    for ext in _SERIES_EXTS:
        path = Path(f"{prefix}_{stem}{ext}")
        if path.exists():
            return path
    raise FileNotFoundError(f"no {stem} series found for prefix {prefix}")


def _write_truth(prefix: str, dataset, encoding: str) -> None:
    for k, a in enumerate(dataset.true_loadings.mats):
        write_matrix(a, f"{prefix}_loading{k + 1}.mtx")
    ext = ".tsrb" if encoding == "binary" else ".tsr"
    write_series(dataset.true_factors, f"{prefix}_factors{ext}", encoding)
    write_series(dataset.true_common, f"{prefix}_common{ext}", encoding)


def _cmd_simulate(args) -> int:
    noise_law = "tensor_normal" if args.noise == "normal" else "tensor_t"
    config = DgpConfig(
        dims=args.dims,
        T=args.T,
        ranks=args.ranks,
        phi=args.phi,
        psi=args.psi,
        noise_law=noise_law,
        t_dof=3.0,
        seed=args.seed,
        burn_in=args.burn_in,
    )
    dataset = gen_dataset(config, rng=replication_rng(config.seed))
    write_series(dataset.observations, args.out, args.format)
    if args.truth_out:
        _write_truth(args.truth_out, dataset, args.format)
    return 0


def _cmd_estimate(args) -> int:
    x = read_series(args.infile)
    config = EstimationConfig(
        ranks=args.ranks,
        method=args.method,
        tau=args.tau,
        max_iter=args.max_iter,
        tol=args.tol,
    )
    result = fit(x, config)
    for k, a in enumerate(result.loadings.mats):
        write_matrix(a, f"{args.out}_loading{k + 1}.mtx")
    write_series(result.factors, f"{args.out}_factors.tsrb", "binary")
    with open(f"{args.out}_diagnostics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        writer.writerow(["iterations_run", result.iterations_run])
        writer.writerow(["converged", int(result.converged)])
        writer.writerow(["tau_used", "" if result.tau_used is None else f"{result.tau_used:.17g}"])
        for i, change in enumerate(result.per_iteration_subspace_change, start=1):
            writer.writerow([f"subspace_change_{i}", f"{change:.17g}"])
    return 0


def _cmd_rank(args) -> int:
    x = read_series(args.infile)
    config = RankConfig(
        r_max=args.rmax,
        c=args.c,
        method=args.method,
        epsilon_regime=args.regime,
        tau=args.tau,
    )
    result = estimate_ranks(x, config)
    traces = args.traces_out or str(Path(args.infile).with_suffix("")) + "_eigs.csv"
    with open(traces, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "index", "value"])
        for k, values in enumerate(result.eigenvalues, start=1):
            for j, v in enumerate(values, start=1):
                writer.writerow([k, j, f"{v:.17g}"])
    print(" ".join(str(r) for r in result.ranks))
    return 0


def _cmd_evaluate(args) -> int:
    if args.metric in ("distance", "mse") and not args.truth:
        raise ValueError(f"--metric {args.metric} requires --truth")
    est_mats = [read_matrix(p) for p in _loading_paths(args.est)]
    writer = csv.writer(sys.stdout)
    writer.writerow(["metric", "mode", "value"])
    if args.metric == "distance":
        truth_mats = [read_matrix(p) for p in _loading_paths(args.truth)]
        if len(truth_mats) != len(est_mats):
            raise ValueError("estimate and truth have different mode counts")
        for k, (a_hat, a_true) in enumerate(zip(est_mats, truth_mats), start=1):
            writer.writerow(["distance", k, f"{subspace_distance(a_hat, a_true):.17g}"])
        return 0
    loadings = LoadingSet(tuple(est_mats))
    factors = read_series(_find_series(args.est, "factors"))
    s_hat = common_components(loadings, factors)
    if args.metric == "mse":
        truth_common = read_series(_find_series(args.truth, "common"))
        writer.writerow(["mse", "", f"{mse_common(s_hat, truth_common):.17g}"])
    else:  # relmse
        if not args.infile:
            raise ValueError("--metric relmse requires --in (the observation series)")
        x = read_series(args.infile)
        writer.writerow(["relmse", "", f"{relative_mse(x, s_hat):.17g}"])
    return 0


def _replicate_cells(table: int):
    """(noise_law, method) pairs per table, plus whether cells estimate or rank."""
    if table in (1, 3):
        return [("tensor_normal", m) for m in ("ls", "huber")], "estimate"
    if table == 2:
        return [("tensor_t", m) for m in ("ls", "huber")], "estimate"
    return (
        [(law, m) for law in ("tensor_normal", "tensor_t") for m in ("ls", "huber")],
        "rank",
    )


def _cmd_replicate(args) -> int:
    workers = _resolve_workers(args.workers)
    dims = _SETTINGS[args.setting]
    ranks = (3, 3, 3)
    cells, kind = _replicate_cells(args.table)
    out_rows = []
    for t_len in _T_GRID:
        for law, method in cells:
            dgp = DgpConfig(
                dims=dims, T=t_len, ranks=ranks, phi=0.1, psi=0.1,
                noise_law=law, t_dof=3.0, seed=args.seed,
            )
            if kind == "estimate":
                est = EstimationConfig(ranks=ranks, method=method)
            else:
                est = RankConfig(r_max=8, c=0.0, method=method)
            result = run_monte_carlo(dgp, est, reps=args.reps, workers=workers)
            wanted = {
                1: lambda name: name.startswith("distance"),
                2: lambda name: name.startswith("distance"),
                3: lambda name: name == "mse",
                4: lambda name: name == "exact",
            }[args.table]
            noise_label = "normal" if law == "tensor_normal" else "t3"
            for name, mean, sd in result.aggregate:
                if wanted(name):
                    out_rows.append(
                        [args.table, args.setting, noise_label, t_len, method,
                         name, f"{mean:.17g}", f"{sd:.17g}"]
                    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["table", "setting", "noise", "T", "method", "metric", "mean", "sd"])
        writer.writerows(out_rows)
    return 0


def _cmd_analyze(args) -> int:
    if not args.varimax and not args.cluster:
        raise ValueError("nothing to do: pass --varimax and/or --cluster")
    a = read_matrix(args.loadings)
    prefix = args.out or str(Path(args.loadings).with_suffix(""))
    display_source = a
    if args.varimax:
        rotated, _ = varimax(a)
        for j in range(rotated.shape[1]):
            i = int(np.argmax(np.abs(rotated[:, j])))
            if rotated[i, j] < 0:
                rotated[:, j] = -rotated[:, j]
        display = np.trunc(30.0 * rotated).astype(int)
        with open(f"{prefix}_varimax.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            r = rotated.shape[1]
            writer.writerow(
                ["entity"]
                + [f"col{j + 1}" for j in range(r)]
                + [f"display{j + 1}" for j in range(r)]
            )
            for i in range(rotated.shape[0]):
                writer.writerow(
                    [i + 1]
                    + [f"{v:.17g}" for v in rotated[i]]
                    + [str(int(v)) for v in display[i]]
                )
        display_source = rotated
    if args.cluster:
        tree = complete_linkage(loading_distance_matrix(display_source))
        with open(f"{prefix}_clusters.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster_a", "cluster_b", "height"])
            for ca, cb, height in tree.merges:
                writer.writerow([ca, cb, f"{height:.17g}"])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtfa",
        description="Tensor factor models: simulation, estimation, rank selection, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic tensor series")
    p.add_argument("--dims", type=_parse_int_list, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--ranks", type=_parse_int_list, default=(3, 3, 3))
    p.add_argument("--phi", type=float, default=0.1)
    p.add_argument("--psi", type=float, default=0.1)
    p.add_argument("--noise", choices=("normal", "t3"), default="normal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None)
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="fit loadings and factors")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ranks", type=_parse_int_list, required=True)
    p.add_argument("--method", choices=("ls", "huber"), default="ls")
    p.add_argument("--tau", type=_parse_tau, default="median")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("rank", help="select the number of factors per mode")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rmax", type=int, default=8)
    p.add_argument("--method", choices=("ls", "huber"), default="ls")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--regime", choices=("ge2", "lt2"), default="ge2")
    p.add_argument("--tau", type=_parse_tau, default="median")
    p.add_argument("--traces-out", default=None)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("evaluate", help="score an estimate against the truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--metric", choices=("distance", "mse", "relmse"), required=True)
    p.add_argument("--in", dest="infile", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("replicate", help="run a preset simulation study")
    p.add_argument("--table", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--setting", choices=tuple(_SETTINGS), required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_replicate)

    p = sub.add_parser("analyze", help="rotate and/or cluster a loading matrix")
    p.add_argument("--loadings", required=True)
    p.add_argument("--varimax", action="store_true")
    p.add_argument("--cluster", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
