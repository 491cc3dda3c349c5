"""Command line: ``bbmnet run|sweep|verify``.

Exit codes: 0 success, 1 configuration error, 2 numerical instability,
3 verification inconclusive (oracle did not converge).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import report
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .experiment import RunResult, oracle_grid, run_experiment, verify_experiment
from .picard import QuadratureGrid

log = logging.getLogger("bbmnet")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2
EXIT_INCONCLUSIVE = 3


def _apply_flags(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    out = config.outputs
    if getattr(args, "out", None):
        out = replace(out, directory=Path(args.out))
    if getattr(args, "stride", None) is not None:
        if args.stride < 1:
            raise ConfigError("--stride must be >= 1")
        out = replace(out, stride=args.stride)
    if getattr(args, "fields", None) is not None:
        out = replace(out, fields=args.fields)
    if getattr(args, "figures", None) is not None:
        out = replace(out, figures=args.figures)
    return replace(config, outputs=out)


def write_run_outputs(result: RunResult, directory: Path) -> list[Path]:
    """Write CSVs, schema, resolved config and (optionally) figures."""
    cfg = result.config
    directory.mkdir(parents=True, exist_ok=True)
    written = [
        report.write_diagnostics(directory / "diagnostics.csv", result.records),
        report.write_key_values(directory / "summary.csv", result.summary()),
    ]
    files = ["diagnostics.csv", "summary.csv"]
    if cfg.outputs.fields and result.states:
        written += report.write_fields(directory, result.layout, result.states)
        files += ["fields.csv", "grid.csv"]
    written.append(report.write_schema(directory, files))
    (directory / "config.ini").write_text(dump_config(cfg))
    written.append(directory / "config.ini")
    if cfg.outputs.figures and len(result.states) >= 2:
        written.append(report.plot_fields(directory / "fields.png", result.layout, result.states))
        written.append(report.plot_mass_error(directory / "mass_error.png", result.mass_series))
    return written


def cmd_run(config: ExperimentConfig) -> int:
    result = run_experiment(config)
    directory = config.outputs.directory
    write_run_outputs(result, directory)
    s = result.summary()
    kind = "%" if result.mass_series.relative else " (absolute)"
    log.info(
        "run %s: max dM %.4g%s at t=%.3g, final energy %.6g, reflected %s",
        s["status"],
        s["max_delta_mass"],
        kind,
        s["max_delta_mass_time"],
        s["final_energy"],
        s["reflected"],
    )
    if not result.completed:
        log.error(
            "instability at step %d; last stable time %.6g",
            result.instability.step,
            result.instability.last_stable_time,
        )
        return EXIT_UNSTABLE
    return EXIT_OK


def _value_label(parameter: str, value: float) -> str:
    return f"{parameter}={value!r}"


def _sweep_job(
    text: str, base_dir: Path, overrides: list[str], flags: argparse.Namespace, directory: Path
) -> dict[str, object]:
    try:
        cfg = parse_config(text, base_dir=base_dir, overrides=overrides)
        cfg = _apply_flags(cfg, flags)
        cfg = cfg.with_output_dir(directory)
        result = run_experiment(cfg)
        write_run_outputs(result, directory)
    except ConfigError as exc:
        return {"status": "error", "code": EXIT_CONFIG, "message": str(exc)}
    except Exception as exc:  # keep siblings alive; report the failure in the table
        return {"status": "error", "code": EXIT_UNSTABLE, "message": f"{type(exc).__name__}: {exc}"}
    s = result.summary()
    return {
        "status": s["status"],
        "code": EXIT_OK if result.completed else EXIT_UNSTABLE,
        "max_delta_mass": s["max_delta_mass"],
        "reflected": s["reflected"],
        "min_excursion": s["min_excursion"],
        "message": "",
    }


def cmd_sweep(
    config_path: Path,
    overrides: Sequence[str],
    parameter: str,
    values: Sequence[float],
    flags: argparse.Namespace,
    out: Path,
    jobs: int | None = None,
) -> int:
    text = config_path.read_text()
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            text,
            config_path.parent,
            [*overrides, f"{parameter}={v!r}"],
            flags,
            out / _value_label(parameter, v),
        )
        for v in values
    ]
    outcomes: list[dict[str, object]] = []
    if tasks:
        workers = jobs or min(len(tasks), 4)
        if workers == 1:
            outcomes = [_sweep_job(*t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_sweep_job, *t) for t in tasks]
                outcomes = [f.result() for f in futures]
    rows = [
        (
            v,
            o["status"],
            o.get("max_delta_mass", math.nan),
            o.get("reflected", "n/a"),
            o.get("min_excursion", math.nan),
            o.get("message", ""),
        )
        for v, o in zip(values, outcomes)
    ]
    report.write_rows(out / "sweep.csv", [c for c, _ in report.SCHEMA["sweep.csv"]], rows)
    report.write_schema(out, ["sweep.csv"])
    for v, o in zip(values, outcomes):
        log.info("%s: %s reflected=%s %s", _value_label(parameter, v), o["status"], o.get("reflected", "n/a"), o.get("message", ""))
    return max((int(o["code"]) for o in outcomes), default=EXIT_OK)


def cmd_verify(config: ExperimentConfig, q: QuadratureGrid, t_final: float, tol: float = 1e-8, max_iters: int = 200) -> int:
    try:
        result = verify_experiment(config, q, t_final, tol=tol, max_iters=max_iters)
    except ValueError as exc:
        raise ConfigError(f"verify: {exc}") from None
    directory = config.outputs.directory
    report.write_key_values(directory / "verify.csv", result.report())
    report.write_rows(
        directory / "residuals.csv", ("iteration", "residual"), enumerate(result.residuals, start=1)
    )
    report.write_schema(directory, ["verify.csv", "residuals.csv"])
    if not result.converged:
        log.error("oracle did not converge after %d iterations", result.iterations)
        return EXIT_INCONCLUSIVE
    log.info(
        "verify: sup difference %.3e, h picard %.8g, h fd %.8g, %d iterations",
        result.sup_difference,
        result.h_picard,
        result.h_fd,
        result.iterations,
    )
    return EXIT_OK


def _parse_values(items: Sequence[str]) -> list[float]:
    out = []
    for item in items:
        for part in item.split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError:
                    raise ConfigError(f"--values: {part!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbmnet", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="experiment INI file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override, e.g. edge.1.mu=1.5")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")

    outputs = argparse.ArgumentParser(add_help=False)
    outputs.add_argument("--stride", type=int, help="snapshot stride in steps")
    outputs.add_argument("--fields", action=argparse.BooleanOptionalAction, default=None, help="write field snapshots")
    outputs.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None, help="render PNG figures")

    sub.add_parser("run", parents=[common, outputs], help="run one experiment")

    sw = sub.add_parser("sweep", parents=[common, outputs], help="run one experiment per parameter value")
    sw.add_argument("--param", required=True, help="section.key to vary, e.g. edge.1.mu")
    sw.add_argument("--values", nargs="*", default=[], help="values (space or comma separated)")
    sw.add_argument("--jobs", type=int, help="parallel workers (default min(n, 4))")

    ver = sub.add_parser("verify", parents=[common], help="compare the stepper against the Picard oracle")
    ver.add_argument("--t-final", type=float, default=0.25)
    ver.add_argument("--y-step", type=float, default=0.05)
    ver.add_argument("--t-step", type=float, default=0.0125)
    ver.add_argument("--y-max", type=float, help="spatial truncation (default from the network)")
    ver.add_argument("--tol", type=float, default=1e-8)
    ver.add_argument("--max-iters", type=int, default=200)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.verb == "sweep":
            values = _parse_values(args.values)
            cfg = load_config(args.config, args.set)
            cfg = _apply_flags(cfg, args)
            flags = argparse.Namespace(
                stride=args.stride, fields=args.fields, figures=args.figures
            )
            return cmd_sweep(args.config, args.set, args.param, values, flags, cfg.outputs.directory, args.jobs)
        cfg = _apply_flags(load_config(args.config, args.set), args)
        if args.verb == "run":
            return cmd_run(cfg)
        try:
            q = oracle_grid(cfg, args.y_step, args.t_step, args.y_max)
        except ValueError as exc:
            raise ConfigError(f"oracle grid: {exc}") from None
        return cmd_verify(cfg, q, args.t_final, args.tol, args.max_iters)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
