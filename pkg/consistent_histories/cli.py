"""Command line interface ``vch``

Every command except ``verify`` reads a TOML run file. Tables go to CSV, reports to JSON with sorted keys and
non-finite numbers written as null. Output goes to ``--out`` or to stdout.
"""
# Standard
import argparse
import csv
import io
import json
import logging
import math
from pathlib import Path
import sys
from typing import Any, List, Optional, Sequence, TextIO
# Installed
import numpy as np
# Local
from consistent_histories import verification
from consistent_histories.branchstate import build_branched_state
from consistent_histories.config import ElementConfig, ReadoutConfig, RunConfig
from consistent_histories.estimators import element_readout
from consistent_histories.exceptions import (
    ConfigError, FamilyDefinitionError, HermiticityError, HistoryLabelError, InvalidStateError, VerificationError)
from consistent_histories.histories import HistoryLabel
from consistent_histories.models import SphereMesh
from consistent_histories.report import partial_trace_handoff
from consistent_histories.vchloop import landscape_scan, optimize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def format_float(value: float) -> str:
    """Seventeen significant digits, enough to round-trip any double"""
    return format(float(value), ".17g")


def json_ready(value: Any) -> Any:
    """Recursively convert numpy values to plain Python and non-finite floats to None"""
    if isinstance(value, dict):
        return {str(key): json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_ready(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def dumps_report(document: dict) -> str:
    """JSON text of a report document"""
    return json.dumps(json_ready(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(text)
        return
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {out}.")


def _report_plan(cfg: RunConfig, *keys: int):
    return cfg.plan if cfg.plan.exact else cfg.plan.derive(*keys)


def cmd_landscape(cfg: RunConfig) -> str:
    """CSV of the selected cost over the grid, one row per point in grid order"""
    cfg.require("landscape", "ansatz", "grid")
    rows = landscape_scan(cfg.model, cfg.ansatz, cfg.grid, cfg.cost_mode, cfg.plan, cfg.workers)
    with_axes = isinstance(cfg.grid, SphereMesh)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = [f"param_{i + 1}" for i in range(cfg.ansatz.n_params)]
    header += ["x", "y", "z"] if with_axes else []
    writer.writerow(header + ["cost", "cost_stderr"])
    for index, row in enumerate(rows):
        value, stderr = row.cost.objective(cfg.cost_mode)
        fields = list(row.params)
        fields += list(cfg.grid.vertices[index]) if with_axes else []
        writer.writerow([format_float(v) for v in fields + [value, stderr]])
    return buffer.getvalue()


def cmd_optimize(cfg: RunConfig) -> str:
    """JSON report of the restarted optimization with a consistency report at every accepted minimum"""
    cfg.require("optimize", "ansatz", "optimizer")
    readout = cfg.readout or ReadoutConfig()
    result = optimize(cfg.model, cfg.ansatz, cfg.cost_mode, cfg.plan, cfg.optimizer, cfg.workers)

    minima = []
    for minimum in result.minima:
        family = cfg.ansatz.with_params(minimum.params).family()
        report = partial_trace_handoff(cfg.model, family, readout.n_readout, readout.eps_max,
                                       _report_plan(cfg, 2, minimum.restart), readout.threshold,
                                       readout.initial_outcome)
        value, stderr = minimum.cost.objective(cfg.cost_mode)
        minima.append({"params": minimum.params, "cost": value, "cost_stderr": stderr, "restart": minimum.restart,
                       "report": report.to_dict()})
    restarts = [{"index": r.index, "start": r.start, "params": r.params, "cost": r.value, "cost_stderr": r.stderr,
                 "evaluations": r.evaluations, "converged": r.converged, "budget_exhausted": r.budget_exhausted,
                 "accepted": r.accepted}
                for r in result.restarts]
    return dumps_report({
        "seed": cfg.seed,
        "cost_mode": cfg.cost_mode.value,
        "shots": cfg.plan.shots if cfg.plan.shots is not None else "exact",
        "evaluations": result.evaluations,
        "restarts": restarts,
        "minima": minima,
    })


def cmd_probabilities(cfg: RunConfig) -> str:
    """JSON consistency report of the family at the ansatz parameters"""
    cfg.require("probabilities", "ansatz")
    readout = cfg.readout or ReadoutConfig()
    report = partial_trace_handoff(cfg.model, cfg.ansatz.family(), readout.n_readout, readout.eps_max,
                                   _report_plan(cfg, 1), readout.threshold, readout.initial_outcome)
    return dumps_report({
        "seed": cfg.seed,
        "shots": cfg.plan.shots if cfg.plan.shots is not None else "exact",
        "params": cfg.ansatz.params,
        "report": report.to_dict(),
    })


def cmd_element(cfg: RunConfig, labels: Optional[Sequence[str]] = None, part: Optional[str] = None) -> str:
    """Value and standard error of one part of one decoherence functional element, on one line"""
    cfg.require("element", "ansatz")
    element = cfg.element or ElementConfig()
    a, b = labels if labels else (element.a, element.b)
    if a is None or b is None:
        raise ConfigError("The element command needs labels a and b in [element] or from --labels.")
    part = part or element.part
    if part not in ("real", "imaginary"):
        raise ConfigError(f"Element part must be 'real' or 'imaginary', got '{part}'.")
    family = cfg.ansatz.family()
    a, b = HistoryLabel.parse(str(a)), HistoryLabel.parse(str(b))
    a.validate(family.outcome_counts)
    b.validate(family.outcome_counts)
    estimate = element_readout(build_branched_state(cfg.model, family), a, b, part, cfg.plan)
    return f"{format_float(estimate.value)} {format_float(estimate.stderr)}\n"


def cmd_verify(n_models: int, seed: int, tol: float) -> str:
    """One summary line per suite. Raises VerificationError on the first failing suite."""
    results = verification.verify(n_models, seed, tol)
    return "".join(f"{r.name}: pass, max violation {r.max_violation:.3e} over {r.cases} models\n"
                   for r in results)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation"""
    parser = argparse.ArgumentParser(prog="vch", description="Variational consistent histories simulator.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="INFO once, DEBUG twice")
    commands = parser.add_subparsers(dest="command", required=True)

    def run_command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, required=True, help="TOML run file")
        sub.add_argument("--seed", type=int, default=None, help="overrides the file's seed")
        sub.add_argument("--shots", default=None, help="shots per estimate, or 'exact'")
        sub.add_argument("--workers", type=int, default=None, help="worker processes")
        sub.add_argument("--out", type=Path, default=None, help="output file, stdout when omitted")
        return sub

    run_command("landscape", "cost landscape over a grid, as CSV")
    run_command("optimize", "restarted optimization with consistency reports, as JSON")
    run_command("probabilities", "readout and epsilon bounds at the ansatz parameters, as JSON")
    element = run_command("element", "one part of one decoherence functional element")
    element.add_argument("--labels", nargs=2, metavar=("A", "B"), default=None, help="history labels, e.g. 01 10")
    element.add_argument("--part", choices=("real", "imaginary"), default=None)

    verify = commands.add_parser("verify", help="run the property suites")
    verify.add_argument("--models", type=int, default=100, help="random models per suite")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--tol", type=float, default=verification.DEFAULT_TOLERANCE)
    verify.add_argument("--out", type=Path, default=None)
    return parser


def _run(args: argparse.Namespace) -> str:
    if args.command == "verify":
        return cmd_verify(args.models, args.seed, args.tol)
    cfg = RunConfig.load(args.config, seed=args.seed, shots=args.shots, workers=args.workers)
    if args.command == "landscape":
        return cmd_landscape(cfg)
    if args.command == "optimize":
        return cmd_optimize(cfg)
    if args.command == "probabilities":
        return cmd_probabilities(cfg)
    return cmd_element(cfg, args.labels, args.part)


def main(argv: Optional[List[str]] = None, stderr: TextIO = None) -> int:
    """Entry point of ``vch``.

    Parameters
    ----------
    argv : List[str], Optional
        Arguments without the program name. Defaults to sys.argv[1:].
    stderr : TextIO, Optional
        Stream for error messages. Defaults to sys.stderr.

    Returns
    -------
    : int
        0 on success, 1 when verification fails, 2 for configuration and I/O errors, 3 for numerical failures
    """
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        _write(_run(args), args.out)
    except VerificationError as e:
        print(f"vch: verification failed in {e.invariant}: {e}", file=stderr)
        return EXIT_VERIFICATION
    except (ConfigError, HistoryLabelError, OSError) as e:
        print(f"vch: {e}", file=stderr)
        return EXIT_CONFIG
    except (InvalidStateError, HermiticityError, FamilyDefinitionError) as e:
        print(f"vch: numerical failure: {e}", file=stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
