"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 data error (too few rows
or singular scatter), 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from . import __version__, _jsonfmt
from .cone_probe import Region, exit_radius_sweep, null_subspace_directions, random_directions
from .errors import ConfigError, MeanCovError, SingularScatterError, TooFewRowsError
from .invariant_tests import compute_statistics, sufficient_stats
from .lemma_lab import LemmaId, VerifierConfig, run_verifier
from .matrix_core import PartitionedSpdMatrix
from .power_lab import SimConfig, format_tsv, power_table
from .streams import random_spd, substream, tag

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_VERIFY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 as well; keep its message format
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fmt6(x: float) -> str:
    return format(float(x), ".6g")


# ---------------------------------------------------------------- stats


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv_matrix(text: str) -> np.ndarray:
    """Parse numeric CSV text, skipping a header row if its cells are not all numeric."""
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise UsageError("input is empty")
    if not all(_is_number(c.strip()) for c in rows[0]):
        rows = rows[1:]
        if not rows:
            raise UsageError("input has a header but no data rows")
    width = len(rows[0])
    data = []
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise UsageError(f"data row {i} has {len(row)} fields, expected {width}")
        try:
            data.append([float(c.strip()) for c in row])
        except ValueError as exc:
            raise UsageError(f"data row {i}: {exc}") from exc
    return np.array(data, dtype=np.float64)


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        if args.input == "-":
            text = sys.stdin.read()
        else:
            with open(args.input, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from exc
    data = read_csv_matrix(text)
    try:
        st = sufficient_stats(data, args.p1)
    except TooFewRowsError as exc:
        print(f"error: TOO_FEW_ROWS: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SingularScatterError as exc:
        print(f"error: SINGULAR_SCATTER: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MeanCovError as exc:
        raise UsageError(f"{exc.code}: {exc}") from exc
    ts = compute_statistics(st)
    n, p = data.shape
    if args.format == "json":
        print(_jsonfmt.dumps({
            "n": n, "p": p, "p1": args.p1, "xbar": st.xbar,
            "t2": ts.t2, "u": ts.u, "w": ts.w, "m": ts.m,
        }))
    elif args.format == "tsv":
        cols = ["n", "p", "p1"] + [f"xbar{i + 1}" for i in range(p)] + ["t2", "u", "w", "m"]
        vals = [str(n), str(p), str(args.p1)] + [_jsonfmt.fmt17(v) for v in st.xbar]
        vals += [_jsonfmt.fmt17(v) for v in (ts.t2, ts.u, ts.w, ts.m)]
        print("\t".join(cols))
        print("\t".join(vals))
    else:
        print(f"n={n} p={p} p1={args.p1}")
        print("xbar=" + " ".join(_fmt6(v) for v in st.xbar))
        print(f"T2={_fmt6(ts.t2)} U={_fmt6(ts.u)} W={_fmt6(ts.w)} M={_fmt6(ts.m)}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _lemma_list(name: str) -> list[LemmaId]:
    if name.lower() == "all":
        return list(LemmaId)
    try:
        return [LemmaId(name.upper())]
    except ValueError as exc:
        choices = ", ".join(m.value for m in LemmaId)
        raise UsageError(f"unknown lemma {name!r}; choose all or one of: {choices}") from exc


def cmd_verify(args: argparse.Namespace) -> int:
    lemmas = _lemma_list(args.lemma)
    try:
        cfg = VerifierConfig(
            seed=args.seed, trials=args.trials, dim=args.dim, split=args.split,
            tol=args.tol, n=args.n, k=args.k, workers=args.workers,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    status = EXIT_OK
    for lemma in lemmas:
        report = run_verifier(lemma, cfg)
        print(report.to_json_line(), flush=True)
        if not report.ok:
            status = EXIT_VERIFY
    return status


# ---------------------------------------------------------------- power


POWER_FLAGS = ("n", "p", "p1", "alpha", "reps", "seed", "theta_grid")


def parse_theta_grid(text: str) -> list[list[float]]:
    """``"a,b,c;d,e,f"`` to a list of parameter vectors."""
    try:
        return [[float(v) for v in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --theta-grid: {exc}") from exc


def config_hash(cfg: SimConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _power_config(args: argparse.Namespace) -> SimConfig:
    given = [f for f in POWER_FLAGS if getattr(args, f) is not None]
    if args.config is not None:
        if given:
            flags = ", ".join("--" + f.replace("_", "-") for f in given)
            raise UsageError(f"--config conflicts with {flags}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    else:
        missing = [f for f in ("n", "p", "p1", "reps") if getattr(args, f) is None]
        if missing:
            raise UsageError("missing " + ", ".join("--" + f for f in missing) + " (or use --config)")
        raw = {"n": args.n, "p": args.p, "p1": args.p1, "reps": args.reps}
        if args.alpha is not None:
            raw["alpha"] = args.alpha
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.theta_grid is not None:
            raw["theta_grid"] = parse_theta_grid(args.theta_grid)
    try:
        return SimConfig.from_dict(raw)
    except MeanCovError as exc:
        raise UsageError(str(exc)) from exc


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def cmd_power(args: argparse.Namespace) -> int:
    cfg = _power_config(args)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    started = _now()
    tsv = format_tsv(power_table(cfg, workers=args.workers))
    finished = _now()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(tsv)
    else:
        sys.stdout.write(tsv)
    manifest = json.dumps({
        "command": "power",
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "tool_version": __version__,
        "started": started,
        "finished": finished,
    }, sort_keys=True)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(manifest + "\n")
    else:
        print(manifest, file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- geometry


def cmd_geometry(args: argparse.Namespace) -> int:
    if not args.k > 0:
        raise UsageError(f"k must be > 0, got {args.k}")
    if args.directions < 1:
        raise UsageError("--directions must be >= 1")
    if not 0 < args.split < args.dim:
        raise UsageError(f"--split must satisfy 0 < split < dim={args.dim}")
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    s = PartitionedSpdMatrix(random_spd(substream(args.seed, tag("geometry_scatter")), args.dim), args.split)
    if args.null_subspace:
        dirs = null_subspace_directions(s, args.directions, args.seed)
    else:
        dirs = random_directions(args.directions, args.dim, args.seed)
    region = Region(args.region.upper())
    results = exit_radius_sweep(region, s, args.n, args.k, dirs)
    for r in results:
        print(r.to_json_line())
    n_inf = sum(r.infinite for r in results)
    print(_jsonfmt.dumps({
        "summary": True, "region": region.value, "directions": len(results),
        "infinite": n_inf, "any_infinite": n_inf > 0,
    }))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meancov", description="Tests of a mean vector under a restricted alternative.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="compute T2, U, W and M for a CSV sample")
    p.add_argument("input", help="CSV file with n rows and p numeric columns ('-' for stdin)")
    p.add_argument("--p1", type=int, required=True, help="size of the first block")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--tsv", dest="format", action="store_const", const="tsv")
    p.set_defaults(func=cmd_stats, format="text")

    p = sub.add_parser("verify", help="run randomized matrix-inequality verifiers")
    p.add_argument("--lemma", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--split", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("power", help="Monte Carlo size and power table")
    p.add_argument("--config", default=None, help="JSON config file (exclusive with the flags below)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--p1", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--theta-grid", dest="theta_grid", default=None, help='e.g. "0,0,0;0.5,0,0"')
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("geometry", help="exit radii of acceptance-region slices")
    p.add_argument("--region", choices=("t2", "u", "T2", "U"), default="t2")
    p.add_argument("--directions", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--split", type=int, default=2)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--null-subspace", action="store_true", help="sample directions with zero adjusted first block")
    p.set_defaults(func=cmd_geometry)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
