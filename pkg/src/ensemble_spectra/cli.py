"""Command-line entry point: ``ensemble-spectra <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 I/O error.  ``ENSEMBLE_SPECTRA_OUT`` overrides ``--out-dir``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import enumeration, experiments
from .ensembles import CalibrationError, SamplerError, calibrate, sample_canonical, sample_mic
from .entropy import (
    entropy_scaling_scan,
    relative_entropy_edge_count,
    relative_entropy_enumerated,
    scan_to_csv,
)
from .experiments import ConfigError, ExperimentConfig
from .graph import DEGREE_SEQUENCE, EDGE_COUNT, ConstraintSpec, GraphFormatError, format_edge_list, read_edge_list
from .reporting import RunManifest, format_value, rows_to_csv, write_text
from .spectral import ConvergenceWarning, spectral_summary

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4
OUT_ENV = "ENSEMBLE_SPECTRA_OUT"


class NonConvergence(RuntimeError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="64-bit seed")
    p.add_argument("--out-dir", default="results", help="output directory (env %s overrides)" % OUT_ENV)
    p.add_argument("--n", type=_int_list, help="vertex count(s), comma-separated")
    p.add_argument("--p", type=float, help="edge density")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all CPUs)")


def _add_experiment(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--kind", choices=(DEGREE_SEQUENCE, EDGE_COUNT))
    p.add_argument("--samples", type=int, help="samples per n")


def _add_constraint(p: argparse.ArgumentParser) -> None:
    p.add_argument("--constraint", help="constraint file (JSON)")
    p.add_argument("--kind", choices=(DEGREE_SEQUENCE, EDGE_COUNT))
    p.add_argument("--L", type=int, help="edge count")
    p.add_argument("--d", type=int, help="constant degree")
    p.add_argument("--degrees", type=_int_list, help="degree sequence, comma-separated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensemble-spectra",
        description="Canonical and microcanonical random-graph ensembles, largest eigenvalues "
        "and relative entropies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw one graph and write it as an edge list")
    _add_common(p)
    _add_constraint(p)
    p.add_argument("--ensemble", choices=("can", "mic"), default="mic")
    p.add_argument("--out", help="edge-list file (default: stdout)")

    p = sub.add_parser("lambda", help="spectral summary of an edge-list graph")
    p.add_argument("--edges", required=True, help="edge-list file")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("delta", help="E_can[λ1] - E_mic[λ1] per n")
    _add_experiment(p)
    p.add_argument("--variance", action="store_true", help="also run the λ1 variance check")

    p = sub.add_parser("entropy", help="relative entropy S_n or a scaling scan")
    _add_common(p)
    _add_constraint(p)
    p.add_argument("--scan", action="store_true", help="write an S_n scaling table over --n")

    p = sub.add_parser("enumerate", help="exact ensemble table for small n")
    _add_common(p)
    _add_constraint(p)
    p.add_argument("--functionals", default="lambda1,lambda2,degree_ratio,edge_count")

    p = sub.add_parser("concentration", help="tail statistics of degree and eigenvalue concentration")
    _add_experiment(p)
    p.add_argument("--statistic", choices=("degree", "ratio", "lambda_gap", "lambda2"), default="ratio")

    p = sub.add_parser("transfer", help="canonical bad-event probability against e^{-S_n}")
    _add_experiment(p)
    p.add_argument("--event", choices=experiments.TRANSFER_EVENTS, default="ratio_deviation")

    p = sub.add_parser("golden-regen", help="regenerate the enumeration golden-value file")
    p.add_argument("--out", default=None, help="destination (default: packaged data file)")
    p.add_argument("--workers", type=int, default=1)
    return parser


# helpers -----------------------------------------------------------------------------

def _out_dir(args) -> Path:
    return Path(os.environ.get(OUT_ENV) or args.out_dir)


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    return max(1, w if w is not None else (os.cpu_count() or 1))


def _experiment_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return experiments.with_overrides(
        config, seed=args.seed, n_list=args.n, p=args.p, workers=_workers(args),
        kind=args.kind, samples_per_n=args.samples,
    )


def _constraint(args) -> ConstraintSpec:
    if args.constraint:
        try:
            return ConstraintSpec.load(args.constraint)
        except FileNotFoundError:
            raise ConfigError(f"constraint file not found: {args.constraint}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"constraint file is not valid JSON: {exc}") from None
    if args.degrees:
        return ConstraintSpec.degree_sequence(args.degrees)
    if not args.n or len(args.n) != 1:
        raise ConfigError("give --constraint, --degrees or a single --n with --L/--d/--p")
    n = args.n[0]
    kind = args.kind or (DEGREE_SEQUENCE if args.d is not None else EDGE_COUNT)
    if kind == EDGE_COUNT:
        if args.L is not None:
            return ConstraintSpec.edge_count(n, args.L)
        if args.p is not None:
            return experiments.schedule_constraint(EDGE_COUNT, n, args.p).spec
    else:
        if args.d is not None:
            return ConstraintSpec.constant_degree(n, args.d)
        if args.p is not None:
            return experiments.schedule_constraint(DEGREE_SEQUENCE, n, args.p).spec
    raise ConfigError("constraint target missing: use --L, --d or --p")


def _finish(manifest: RunManifest, out_dir: Path, stem: str, paths) -> None:
    for path in paths:
        manifest.add_output(path)
    manifest.write(out_dir / f"{stem}.manifest.json")


def _emit_report(report, args, command: str) -> Path:
    out_dir = _out_dir(args)
    manifest = RunManifest(command, report.config.to_dict(), report.config.seed, summary=report.summary)
    path = report.write(out_dir)
    _finish(manifest, out_dir, path.stem, [path])
    sys.stdout.write(report.to_csv())
    print(f"wrote {path}", file=sys.stderr)
    if report.nonconverged:
        raise NonConvergence(f"{report.nonconverged} eigenvalue computations did not converge")
    return path


# subcommands -------------------------------------------------------------------------------

def cmd_sample(args) -> int:
    spec = _constraint(args)
    seed = 0 if args.seed is None else args.seed
    if args.ensemble == "can":
        g = sample_canonical(calibrate(spec), seed)
    else:
        g = sample_mic(spec, seed)
    text = format_edge_list(g)
    if args.out:
        write_text(args.out, text)
        manifest = RunManifest("sample", {"constraint": spec.to_dict(), "ensemble": args.ensemble}, seed)
        _finish(manifest, Path(args.out).parent, Path(args.out).stem, [args.out])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_lambda(args) -> int:
    g = read_edge_list(args.edges)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        s = spectral_summary(g, tol=args.tol)
    for name in ("lambda1", "lambda2", "degree_ratio", "fk_prediction", "residual", "iterations", "tol_achieved"):
        print(f"{name} = {format_value(getattr(s, name))}")
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        raise NonConvergence("power iteration did not converge")
    return EXIT_OK


def cmd_delta(args) -> int:
    config = _experiment_config(args)
    _emit_report(experiments.delta_experiment(config), args, "delta")
    if args.variance:
        _emit_report(experiments.variance_check(config), args, "delta --variance")
    return EXIT_OK


def cmd_entropy(args) -> int:
    if args.scan:
        if not args.n:
            raise ConfigError("--scan needs --n with a list of sizes")
        kind = args.kind or EDGE_COUNT
        rows = entropy_scaling_scan(kind, args.n, density=args.p, degree=args.d)
        text = scan_to_csv(rows)
        out_dir = _out_dir(args)
        stem = f"entropy_scan_{kind}"
        path = write_text(out_dir / f"{stem}.csv", text)
        manifest = RunManifest("entropy --scan", {"kind": kind, "n_list": list(args.n), "p": args.p,
                                                  "d": args.d}, None)
        _finish(manifest, out_dir, stem, [path])
        sys.stdout.write(text)
        return EXIT_OK
    spec = _constraint(args)
    if spec.is_degree:
        report = relative_entropy_enumerated(spec)
    else:
        report = relative_entropy_edge_count(spec.n, spec.target)
    print(f"s_n = {format_value(report.s_n)}")
    print(report.to_json())
    return EXIT_OK


def cmd_enumerate(args) -> int:
    spec = _constraint(args)
    names = [f for f in args.functionals.split(",") if f]
    for name in names:
        if name not in enumeration.FUNCTIONALS:
            raise ConfigError(f"unknown functional {name!r}")
    table = enumeration.ensemble_table(spec, names, workers=_workers(args))
    header = ("spec_hash", "functional", "mic_value", "can_value", "gamma_size")
    rows = [(spec.digest, f, table.mic[f], table.can[f], table.gamma_size) for f in names]
    text = rows_to_csv(header, rows)
    out_dir = _out_dir(args)
    stem = f"enumerate_{spec.digest}"
    path = write_text(out_dir / f"{stem}.csv", text)
    _finish(RunManifest("enumerate", {"constraint": spec.to_dict(), "functionals": names}, None),
            out_dir, stem, [path])
    print(f"gamma_size = {table.gamma_size}")
    print(f"p_can_gamma = {format_value(table.p_can_gamma)}")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_concentration(args) -> int:
    config = _experiment_config(args)
    fn = {
        "degree": experiments.degree_concentration_stat,
        "ratio": experiments.ratio_concentration,
        "lambda_gap": experiments.lambda_ratio_gap,
        "lambda2": experiments.lambda2_tail,
    }[args.statistic]
    _emit_report(fn(config), args, f"concentration --statistic {args.statistic}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    config = _experiment_config(args)
    _emit_report(experiments.transfer_check(config, args.event), args, f"transfer --event {args.event}")
    return EXIT_OK


def cmd_golden_regen(args) -> int:
    path = args.out or enumeration.GOLDEN_PATH
    rows = enumeration.golden_rows(workers=args.workers)
    written = enumeration.write_golden(path, rows)
    print(f"wrote {written} ({len(rows)} rows)")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "lambda": cmd_lambda,
    "delta": cmd_delta,
    "entropy": cmd_entropy,
    "enumerate": cmd_enumerate,
    "concentration": cmd_concentration,
    "transfer": cmd_transfer,
    "golden-regen": cmd_golden_regen,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.residual is None else EXIT_NONCONVERGENCE
    except (OSError, GraphFormatError) as exc:
        # a malformed edge list is an input problem, as is an unreadable path
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, GraphFormatError) else EXIT_IO
    except (ConfigError, SamplerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
