"""Command-line driver.

Exit codes: 0 success, 1 runtime failure, 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, resolve
from .disposition import (bucket_histogram, extreme_ratio_histogram, profile_users, rating_histogram,
                          write_profiles_csv, Optimism)
from .experiment import METRICS, run_cross_validation, run_partition_experiment
from .ratings import (Dataset, DatasetError, dataset_stats, load_dataset, min_ratings_filter,
                      parse_ratings_csv, save_dataset, write_ratings_csv)
from .synthetic import (SyntheticConfig, dump_synthetic_config, generate_synthetic, load_synthetic_config,
                        two_population_config)

log = logging.getLogger("dispocf")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2
DEFAULT_CACHE = ".dispocf-cache"


class InputError(Exception):
    pass


# -- helpers ---------------------------------------------------------------

def _provenance_line(meta: dict) -> str:
    return f"# {json.dumps(meta, sort_keys=True)}\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_input(path: str | None) -> Dataset:
    if not path:
        raise InputError("no input given (--input or [run] input)")
    p = Path(path)
    if not p.exists():
        raise InputError(f"input file {path} does not exist")
    if p.suffix == ".npz":
        return load_dataset(p)
    with open(p, encoding="utf-8") as fh:
        return parse_ratings_csv(fh)


def _dataset(rc: RunConfig) -> Dataset:
    ds = _read_input(rc.input)
    if rc.min_ratings:
        ds = min_ratings_filter(ds, rc.min_ratings)
        if len(ds) == 0:
            raise InputError(f"no users with at least {rc.min_ratings} ratings")
    return ds


def _out_dir(rc: RunConfig, default: str = ".") -> Path:
    out = Path(rc.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------

def cmd_ingest(args, rc: RunConfig) -> int:
    if not rc.input:
        raise InputError("no input given (--input or [run] input)")
    src = Path(rc.input)
    if not src.exists():
        raise InputError(f"input file {src} does not exist")
    digest = hashlib.sha256(src.read_bytes()).hexdigest()[:16]
    cache = _out_dir(rc, DEFAULT_CACHE) / f"dataset-{digest}.npz"
    if cache.exists():
        ds = load_dataset(cache)
        print(f"cache hit: {cache}", file=sys.stderr)
    else:
        ds = _read_input(str(src))
        save_dataset(ds, cache)
        print(f"cache written: {cache}", file=sys.stderr)
    if rc.min_ratings:
        ds = min_ratings_filter(ds, rc.min_ratings)
    print(dataset_stats(ds).describe())
    return EXIT_OK


def cmd_profile(args, rc: RunConfig) -> int:
    ds = _dataset(rc)
    out = _out_dir(rc)
    meta = {"command": "profile", "input": rc.input, "threshold": rc.threshold,
            "min_ratings": rc.min_ratings}
    profiles = profile_users(ds, rc.threshold)

    buf = io.StringIO()
    buf.write(_provenance_line(meta))
    write_profiles_csv(profiles, buf)
    _write(out / "profiles.csv", buf.getvalue())

    def table(name: str, header: tuple, rows) -> None:
        b = io.StringIO()
        b.write(_provenance_line(meta))
        w = csv.writer(b, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        _write(out / name, b.getvalue())

    table("bucket_histogram.csv", ("bucket", "users"), bucket_histogram(profiles))
    table("extreme_positive_histogram.csv", ("optimism", "ratioBin", "users"),
          extreme_ratio_histogram(profiles))
    table("rating_histogram.csv", ("rating", "count"), rating_histogram(ds))

    n_opt = sum(p.optimism is Optimism.OPTIMISTIC for p in profiles)
    print(f"{len(profiles)} users profiled")
    print(f"optimistic: {n_opt} ({100 * n_opt / len(profiles):.1f}%), "
          f"pessimistic: {len(profiles) - n_opt} ({100 * (len(profiles) - n_opt) / len(profiles):.1f}%)")
    print("negative-share buckets: " + ", ".join(f"{b} {n}" for b, n in bucket_histogram(profiles)))
    return EXIT_OK


def cmd_synth(args, rc: RunConfig) -> int:
    cp = rc.parser
    if cp is not None and cp.has_section("synthetic"):
        scfg = load_synthetic_config(cp)
        if args.seed is not None or not cp.has_option("synthetic", "seed"):
            scfg = SyntheticConfig(scfg.populations, scfg.n_items, rc.seed)
    else:
        scfg = two_population_config(seed=rc.seed)
    ds = generate_synthetic(scfg)
    out = _out_dir(rc)
    _write(out / "synthetic.ini", dump_synthetic_config(scfg))
    buf = io.StringIO()
    buf.write(_provenance_line({"command": "synth", "seed": scfg.seed,
                                "config": dump_synthetic_config(scfg)}))
    write_ratings_csv(ds, buf)
    _write(out / "ratings.csv", buf.getvalue())
    print(dataset_stats(ds).describe())
    return EXIT_OK


def cmd_evaluate(args, rc: RunConfig) -> int:
    ds = _dataset(rc)
    cfg = rc.experiment_config()
    reports = run_cross_validation(ds, cfg)
    resolved = rc.resolved()
    resolved.pop("scheme", None)
    resolved.pop("pairing", None)
    out = _out_dir(rc)
    stem = f"evaluate-{rc.algo}"
    summary = {
        "config": resolved,
        "folds": [r.to_dict() for r in reports],
        "mean": {m: float(np.mean([getattr(r, m) for r in reports])) for m in METRICS},
    }
    _write(out / f"{stem}.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    b = io.StringIO()
    b.write(_provenance_line({"config": resolved}))
    w = csv.writer(b, lineterminator="\n")
    w.writerow(("fold", "users", "pairs", *METRICS))
    for f, r in enumerate(reports):
        w.writerow((f, r.n_users, r.n_pairs, *(repr(getattr(r, m)) for m in METRICS)))
    w.writerow(("mean", "", "", *(repr(summary["mean"][m]) for m in METRICS)))
    _write(out / f"{stem}.csv", b.getvalue())
    k = cfg.eval.k
    print(f"{rc.algo}, {cfg.folds}-fold: ndcg@{k} {summary['mean']['ndcg']:.4f}, "
          f"precision@{k} {summary['mean']['precision']:.4f}, rmse {summary['mean']['rmse']:.4f}")
    return EXIT_OK


def cmd_experiment(args, rc: RunConfig) -> int:
    ds = _dataset(rc)
    report = run_partition_experiment(ds, rc.experiment_config())
    report.config = rc.resolved()
    out = _out_dir(rc)
    stem = f"experiment-{rc.scheme}-{rc.algo}"
    table = report.to_table()
    _write(out / f"{stem}.txt", table)
    _write(out / f"{stem}.csv", report.to_csv())
    _write(out / f"{stem}.json", report.to_json())
    print(table.split("\n", 1)[1], end="")
    return EXIT_OK


COMMANDS = {
    "ingest": (cmd_ingest, "parse a ratings CSV, print a summary, cache it", False),
    "profile": (cmd_profile, "per-user disposition profiles and histograms", False),
    "synth": (cmd_synth, "generate a synthetic ratings file", True),
    "evaluate": (cmd_evaluate, "cross-validate one algorithm on the whole dataset", True),
    "experiment": (cmd_experiment, "pooled vs partitioned comparison", True),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispocf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_, _) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--input", help="ratings CSV (or cached .npz)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--min-ratings", type=int, dest="min_ratings",
                       help="drop users with fewer ratings")
        p.add_argument("-v", "--verbose", action="count", default=0)
        if name in ("profile", "experiment"):
            p.add_argument("--threshold", type=float,
                           help="negative-share cut between optimistic and pessimistic (default 0.30)")
        if name in ("evaluate", "experiment"):
            p.add_argument("--algo", choices=["user-knn", "item-knn", "svd"])
            p.add_argument("--folds", type=int)
            p.add_argument("--k", type=int, help="top-k cutoff for ndcg / precision")
            p.add_argument("--n-jobs", type=int, dest="n_jobs")
        if name == "experiment":
            p.add_argument("--scheme", choices=["binary", "neg-bucket", "pos-peak", "identity"])
            p.add_argument("--pairing", choices=["fold", "user"])
    return parser


_OVERRIDE_KEYS = ("input", "out", "seed", "min_ratings", "threshold", "algo", "folds", "k", "n_jobs",
                  "scheme", "pairing")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    func, _, needs_seed = COMMANDS[args.command]
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    try:
        rc = resolve(args.config, overrides, require_seed=needs_seed)
        return func(args, rc)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
