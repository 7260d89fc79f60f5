"""Command-line front end.

Three subcommands: `calibrate` solves the marginal-to-conditional
mapping fresh and emits the five-column table, `simulate` runs the
Monte Carlo study for a list of marginal HR targets (published
calibration entries are used when a target is on the standard grid,
unless --recalibrate forces a fresh solve), and `generate` dumps one
raw cohort for cross-checking against other software.

Every emitted file carries the full run manifest as comment lines (or
a metadata object in JSON), and nothing volatile like timestamps, so
re-running a file's recorded command reproduces it byte for byte.

Summary CSV rows are one per (target, event), event 1 before event 2;
the event number itself is not a column, to keep the pinned 15-column
schema. Rows with a null true effect report absolute log-HR bias in
the bias_pct column, marked in md and JSON, noted in CSV comments.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .calibrate import (
    DEFAULT_ORACLE_N,
    DEFAULT_ORACLE_SEED,
    calibrate_beta_c,
    lookup_calibration,
)
from .harness import run_simulation
from .simgen import (
    ALPHA0_BY_PREVALENCE,
    GAMMA0_BY_PREVALENCE,
    DATASET_CSV_HEADER,
    config_for,
    gen_dataset,
)
from .statcore import RngStream

SCENARIO_BY_NAME = {"independent": 1, "tv-covariates": 2, "tv-treatment": 3}

SUMMARY_COLUMNS = (
    "scenario",
    "prevalence",
    "tau",
    "true_log_hr",
    "true_hr",
    "est_log_hr",
    "est_hr",
    "bias_pct",
    "ase",
    "ese",
    "rse",
    "n",
    "reps",
    "seed",
    "failed",
)

CALIBRATION_COLUMNS = ("beta_m1", "hr1", "beta_c", "beta_m2", "hr2")

DEFAULT_MASTER_SEED = 1234


@dataclass
class RunManifest:
    """Everything needed to reproduce one invocation."""

    command: str
    scenario: int = 1
    n_subjects: int = 10_000
    alpha0: float = ALPHA0_BY_PREVALENCE[0.25]
    alpha1: float = float(np.log(1.5))
    gamma0: float = GAMMA0_BY_PREVALENCE[0.25]
    gamma1: float = float(np.log(1.5))
    gamma2: float = float(np.log(1.5))
    beta1: float = float(np.log(1.5))
    baseline_rate: float = 1.0
    drift_sd: float = 4.0
    tau: float = None
    prevalence: float = 0.25
    target_hrs: tuple = (1.5, 2.0, 2.5, 3.0)
    n_reps: int = 1_000
    master_seed: int = DEFAULT_MASTER_SEED
    output_format: str = "csv"
    output_path: str = None
    recalibrate: bool = False
    oracle_n: int = DEFAULT_ORACLE_N
    beta_c_values: tuple = field(default_factory=tuple)


def _parse_targets(text, parser):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        parser.error(f"cannot parse target list {text!r}")
    if not values or any(v < 1.0 for v in values):
        parser.error("target hazard ratios must be >= 1")
    return values


def _positive(kind, name):
    def convert(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return value

    return convert


def _add_common(sub, with_tau=True):
    sub.add_argument(
        "--scenario", choices=sorted(SCENARIO_BY_NAME), default=None
    )
    sub.add_argument("--n", type=_positive(int, "--n"), default=10_000)
    sub.add_argument(
        "--prevalence", type=float, choices=[0.25, 0.5], default=0.25
    )
    sub.add_argument("--target-hr", default=None)
    if with_tau:
        sub.add_argument("--tau", type=_positive(float, "--tau"), default=None)
    sub.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    sub.add_argument("--out", default=None)


def parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="recurweight",
        description="Weighted-Cox simulation engine for two-gap-time data",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    cal = commands.add_parser("calibrate", help="solve the effect mapping")
    cal.add_argument("--targets", default="1,1.5,2,2.5,3")
    cal.add_argument("--oracle-n", type=_positive(int, "--oracle-n"),
                     default=DEFAULT_ORACLE_N)
    cal.add_argument("--seed", type=int, default=DEFAULT_ORACLE_SEED)
    cal.add_argument("--format", choices=["csv", "md", "json"], default="csv")
    cal.add_argument("--out", default=None)

    sim = commands.add_parser("simulate", help="run the Monte Carlo study")
    _add_common(sim)
    sim.add_argument("--reps", type=_positive(int, "--reps"), default=1_000)
    sim.add_argument("--format", choices=["csv", "md", "json"], default="csv")
    sim.add_argument("--recalibrate", action="store_true")
    sim.add_argument("--oracle-n", type=_positive(int, "--oracle-n"),
                     default=DEFAULT_ORACLE_N)

    gen = commands.add_parser("generate", help="dump one raw cohort as CSV")
    _add_common(gen)

    args = parser.parse_args(argv)

    if args.command == "calibrate":
        return RunManifest(
            command="calibrate",
            target_hrs=_parse_targets(args.targets, parser),
            oracle_n=args.oracle_n,
            master_seed=args.seed,
            output_format=args.format,
            output_path=args.out,
        )

    if args.tau is not None and args.scenario is None:
        parser.error("--tau requires an explicit --scenario")
    scenario = SCENARIO_BY_NAME[args.scenario or "independent"]
    if args.target_hr is None:
        targets = (1.5,) if args.command == "generate" else (1.5, 2.0, 2.5, 3.0)
    else:
        targets = _parse_targets(args.target_hr, parser)
    if args.command == "generate" and len(targets) != 1:
        parser.error("generate takes exactly one --target-hr value")

    manifest = RunManifest(
        command=args.command,
        scenario=scenario,
        n_subjects=args.n,
        alpha0=ALPHA0_BY_PREVALENCE[args.prevalence],
        gamma0=GAMMA0_BY_PREVALENCE[args.prevalence],
        tau=args.tau,
        prevalence=args.prevalence,
        target_hrs=targets,
        master_seed=args.seed,
        output_path=args.out,
    )
    if args.command == "simulate":
        manifest.n_reps = args.reps
        manifest.output_format = args.format
        manifest.recalibrate = args.recalibrate
        manifest.oracle_n = args.oracle_n
    else:
        manifest.n_reps = 0
        manifest.output_format = "csv"
    return manifest


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _manifest_lines(manifest, comment):
    lines = [f"{comment} recurweight {__version__} {manifest.command}"]
    for key, value in asdict(manifest).items():
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{comment} {key}: {value}")
    return lines


def _write_text(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _rows_to_csv(rows, columns, manifest, notes=()):
    lines = _manifest_lines(manifest, "#")
    lines.extend(f"# {note}" for note in notes)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _rows_to_json(rows, manifest, extra=()):
    payload = {
        "package": f"recurweight {__version__}",
        "manifest": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in asdict(manifest).items()
        },
        "rows": [dict(r) for r in rows],
    }
    for row in payload["rows"]:
        for key in list(row):
            if isinstance(row[key], float) and not np.isfinite(row[key]):
                row[key] = None
    return json.dumps(payload, indent=2) + "\n"


def _md_table(header, body_rows):
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in body_rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def emit_table(rows, output_format, path, manifest):
    """Write summary rows in the pinned schema; see module docstring."""
    if not rows:
        raise ValueError("no rows to emit")
    if output_format == "csv":
        notes = ["rows: per target, event-1 row precedes event-2 row"]
        if any(r["bias_is_absolute"] for r in rows):
            notes.append(
                "rows with true_log_hr 0.0000 report absolute log-HR bias "
                "in bias_pct"
            )
        text = _rows_to_csv(
            [{c: r[c] for c in SUMMARY_COLUMNS} for r in rows],
            SUMMARY_COLUMNS,
            manifest,
            notes,
        )
    elif output_format == "json":
        text = _rows_to_json(rows, manifest)
    elif output_format == "md":
        header = ["Event", "True log HR", "True HR", "Est log HR", "Est HR",
                  "Bias", "ASE", "ESE", "RSE"]
        body = []
        flagged = False
        for r in rows:
            if r["bias_is_absolute"]:
                bias, flagged = f"{r['bias_pct']:.4f}*", True
            else:
                bias = f"{r['bias_pct']:.2f}%"
            body.append([
                str(r["event"]),
                _fmt(r["true_log_hr"]), _fmt(r["true_hr"]),
                _fmt(r["est_log_hr"]), _fmt(r["est_hr"]),
                bias, _fmt(r["ase"]), _fmt(r["ese"]), _fmt(r["rse"]),
            ])
        lines = _manifest_lines(manifest, ">")
        lines.append("")
        lines.extend(_md_table(header, body))
        if flagged:
            lines.append("")
            lines.append("\\* absolute log-HR bias (null true effect)")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {output_format!r}")
    _write_text(text, path)


def emit_calibration(entries, target_hrs, output_format, path, manifest):
    """Five-column mapping table; hr1 is the requested target verbatim."""
    rows = []
    for hr, entry in zip(target_hrs, entries):
        rows.append({
            "beta_m1": entry.beta_m1,
            "hr1": hr,
            "beta_c": entry.beta_c,
            "beta_m2": entry.beta_m2,
            "hr2": float(np.exp(entry.beta_m2)),
            "achieved_beta_m1": entry.achieved_beta_m1,
            "oracle_n": entry.oracle_n,
            "tolerance": entry.tolerance,
        })
    if output_format == "csv":
        text = _rows_to_csv(
            [{c: r[c] for c in CALIBRATION_COLUMNS} for r in rows],
            CALIBRATION_COLUMNS,
            manifest,
        )
    elif output_format == "json":
        text = _rows_to_json(rows, manifest)
    else:
        header = ["True log marginal HR", "True HR", "True log conditional HR",
                  "True log marginal HR (event 2)", "True HR (event 2)"]
        body = [
            [_fmt(r["beta_m1"]), f"{r['hr1']:g}", _fmt(r["beta_c"]),
             _fmt(r["beta_m2"]), _fmt(r["hr2"])]
            for r in rows
        ]
        lines = _manifest_lines(manifest, ">")
        lines.append("")
        lines.extend(_md_table(header, body))
        text = "\n".join(lines) + "\n"
    _write_text(text, path)


def _resolve_entry(hr, manifest):
    cached = None if manifest.recalibrate else lookup_calibration(hr)
    if cached is not None:
        return cached
    return calibrate_beta_c(
        float(np.log(hr)), oracle_n=manifest.oracle_n
    )


def _cmd_calibrate(manifest):
    entries = tuple(
        calibrate_beta_c(
            float(np.log(hr)),
            oracle_n=manifest.oracle_n,
            seed=manifest.master_seed,
        )
        for hr in manifest.target_hrs
    )
    manifest.beta_c_values = tuple(e.beta_c for e in entries)
    emit_calibration(
        entries,
        manifest.target_hrs,
        manifest.output_format,
        manifest.output_path,
        manifest,
    )
    return 0


def _config_from(manifest, beta_c):
    return config_for(
        manifest.scenario,
        prevalence=manifest.prevalence,
        n_subjects=manifest.n_subjects,
        beta_c=beta_c,
        tau=manifest.tau,
    )


def _cmd_simulate(manifest):
    entries = [(hr, _resolve_entry(hr, manifest)) for hr in manifest.target_hrs]
    manifest.beta_c_values = tuple(e.beta_c for _, e in entries)
    rows = []
    for hr, entry in entries:
        config = _config_from(manifest, entry.beta_c)
        for event, summary in enumerate(
            run_simulation(config, entry, manifest.n_reps, manifest.master_seed),
            start=1,
        ):
            rows.append({
                "event": event,
                "scenario": manifest.scenario,
                "prevalence": manifest.prevalence,
                "tau": manifest.tau,
                "true_log_hr": summary.true_beta_m,
                "true_hr": summary.true_hr,
                "est_log_hr": summary.mean_beta_hat,
                "est_hr": summary.mean_hr,
                "bias_pct": summary.bias_pct,
                "ase": summary.ase,
                "ese": summary.ese,
                "rse": summary.rse,
                "n": summary.n_subjects,
                "reps": summary.n_reps,
                "seed": manifest.master_seed,
                "failed": summary.n_failed,
                "bias_is_absolute": summary.bias_is_absolute,
                "ese_centered": summary.ese_centered,
            })
    emit_table(rows, manifest.output_format, manifest.output_path, manifest)
    return 0


def _cmd_generate(manifest):
    entry = _resolve_entry(manifest.target_hrs[0], manifest)
    manifest.beta_c_values = (entry.beta_c,)
    config = _config_from(manifest, entry.beta_c)
    dataset = gen_dataset(config, RngStream(manifest.master_seed))
    lines = _manifest_lines(manifest, "#")
    lines.append(DATASET_CSV_HEADER)
    for row in dataset:
        lines.append(
            f"{float(row['x1'])!r},{float(row['x2'])!r},"
            f"{int(row['z1'])},{int(row['z2'])},"
            f"{float(row['w1'])!r},{float(row['w2'])!r},"
            f"{int(row['delta1'])},{int(row['delta2'])}"
        )
    _write_text("\n".join(lines) + "\n", manifest.output_path)
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "generate": _cmd_generate,
}


def main(argv=None):
    try:
        manifest = parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return _COMMANDS[manifest.command](manifest)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
