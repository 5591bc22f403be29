from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from laps_sim.config import ExperimentConfig, dump_config, load_config
from laps_sim.cost_model import (
    fit_params,
    generate_samples,
    load_samples,
    prefill_boundary,
    reprefill_boundary,
    roofline_crossover,
)
from laps_sim.cost_model.fitting import samples_to_frame
from laps_sim.errors import LapsSimError
from laps_sim.experiments import build_workload, run_experiment, sweep
from laps_sim.metrics import MetricsReport, write_metrics, write_sweep
from laps_sim.queueing import ServiceMix, hol_penalty, mix_wait, normalized_latency
from laps_sim.sim.engine import DisaggMode, Policy, Router
from laps_sim.validation import CHECKS, run_suite
from laps_sim.workload import save_trace

logger = logging.getLogger("laps_sim")

console = Console()

# CLI flag -> config key; only flags the user actually passed are applied.
FLAG_KEYS = {
    "policy": "sim.policy",
    "disagg": "sim.disagg",
    "router": "sim.router",
    "instances": "sim.n_instances",
    "seed": "sim.seed",
    "duration_ms": "sim.duration",
    "slo_ms": "sim.slo",
}


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _parse_set(items: Sequence[str] | None) -> dict[str, str]:
    values = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise argparse.ArgumentTypeError(f"--set expects KEY=VALUE, got '{item}'")
        values[key.strip()] = value.strip()
    return values


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then ``--config``, then explicit flags and ``--set`` values."""
    overrides: dict[str, Any] = {}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "workload", None):
        overrides["workload.kind"] = "trace"
        overrides["workload.trace"] = args.workload
    overrides.update(_parse_set(getattr(args, "set", None)))
    return load_config(args.config, overrides)


def _report_table(report: MetricsReport, title: str) -> Table:
    table = Table(title=title)
    table.add_column("class", style="cyan")
    for column in ("count", "mean", "p50", "p90", "p99", "rps", "slo viol."):
        table.add_column(column, justify="right")
    for name in ("short", "long", "all"):
        m = report.by_class(name)
        table.add_row(
            name,
            str(m.count),
            f"{m.ttft_mean:.2f}",
            f"{m.ttft_p50:.2f}",
            f"{m.ttft_p90:.2f}",
            f"{m.ttft_p99:.2f}",
            f"{m.rps:.1f}",
            f"{m.slo_violation_rate:.3f}",
        )
    b = report.batches
    table.caption = (
        f"batches={b.batches} mean depth={b.mean_depth:.2f} "
        f"graph hits={b.graph_hit_rate:.2f} padding={b.padding_overhead:.3f} "
        f"migrations={report.migrations}"
    )
    return table


# -- subcommands ------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result.report, out / "metrics.json")
    result.log.save(out / "events.log")
    (out / "config.json").write_text(
        json.dumps(dump_config(cfg), indent=2) + "\n", encoding="utf-8"
    )
    console.print(_report_table(result.report, f"TTFT (ms), {cfg.sim.policy.value}"))
    logger.info("wrote metrics.json, events.log and config.json to %s", out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    rows = sweep(cfg, args.param, values, n_jobs=args.n_jobs)
    target = write_sweep(rows, args.param, Path(args.out) / "sweep.csv")

    table = Table(title=f"sweep over {args.param}")
    columns = [args.param, "short_ttft_p90", "long_ttft_p90", "all_rps"]
    for column in columns:
        table.add_column(column, justify="right")
    for row in rows:
        cells = [row[c] for c in columns]
        table.add_row(*(f"{v:.2f}" if isinstance(v, float) else str(v) for v in cells))
    console.print(table)
    logger.info("wrote %d rows to %s", len(rows), target)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    mix = ServiceMix(
        lam=args.lam, p_short=args.p_short, s_short=args.s_short, s_long=args.s_long
    )
    wait = mix_wait(mix)
    table = Table(title="M/G/1 FCFS oracle")
    table.add_column("quantity", style="cyan")
    table.add_column("value", justify="right")
    table.add_row("rho", f"{mix.rho:.4f}")
    table.add_row("E[S]", f"{mix.mean_service:.4f}")
    table.add_row("E[S^2]", f"{mix.second_moment:.4f}")
    table.add_row("W (P-K)", f"{wait:.4f}")
    table.add_row("HoL penalty", f"{hol_penalty(mix):.4f}")
    table.add_row("R/S short", f"{normalized_latency(mix.s_short, wait):.4f}")
    table.add_row("R/S long", f"{normalized_latency(mix.s_long, wait):.4f}")
    console.print(table)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    params = fit_params(load_samples(args.samples))
    table = Table(title=f"fitted from {args.samples}")
    table.add_column("parameter", style="cyan")
    table.add_column("value", justify="right")
    for name in ("alpha", "beta", "gamma_w", "gamma_r"):
        table.add_row(name, f"{getattr(params, name):.6g}")
    table.add_row("prefill boundary", f"{prefill_boundary(params):.1f}")
    for history in (1024, 8192):
        table.add_row(
            f"re-prefill boundary (H={history})",
            f"{reprefill_boundary(params, history):.1f}",
        )
    crossover = roofline_crossover(load_config(args.config).roofline)
    table.add_row("roofline crossover", f"{crossover:.1f}")
    console.print(table)
    if args.out:
        target = Path(args.out)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(
            "".join(
                f"cost.{name}={getattr(params, name)!r}\n"
                for name in ("alpha", "beta", "gamma_w", "gamma_r")
            ),
            encoding="utf-8",
        )
        logger.info("wrote fitted parameters to %s", target)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    target = Path(args.out)
    if args.kind == "samples":
        samples = generate_samples(
            cfg.cost, n_samples=args.n, noise=args.noise, seed=cfg.sim.seed
        )
        target.parent.mkdir(parents=True, exist_ok=True)
        samples_to_frame(samples).to_csv(target, index=False, lineterminator="\n")
        logger.info("wrote %d latency samples to %s", len(samples), target)
        return 0

    requests, source = build_workload(cfg)
    if source is not None:
        raise LapsSimError("closed-loop workloads have no fixed trace to write")
    save_trace(requests, target)
    logger.info("wrote %d requests to %s", len(requests), target)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    names = [n.strip() for n in args.checks.split(",")] if args.checks else None
    results = run_suite(names)

    table = Table(title="acceptance checks")
    table.add_column("check", style="cyan")
    table.add_column("result")
    table.add_column("seconds", justify="right")
    for result in results:
        seconds = f"{result.elapsed_s:.2f}"
        if not result.within_budget:
            seconds = f"[yellow]{seconds} > {result.budget_s:g}[/yellow]"
        table.add_row(
            result.name,
            "[green]pass[/green]" if result.passed else "[red]FAIL[/red]",
            seconds,
        )
    console.print(table)

    if args.out:
        target = Path(args.out) / "validation.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        payload = [
            {
                "name": r.name,
                "passed": r.passed,
                "elapsed_s": r.elapsed_s,
                "budget_s": r.budget_s,
                "details": r.details,
            }
            for r in results
        ]
        target.write_text(
            json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8"
        )
    return 0 if all(r.passed for r in results) else 1


# -- parser -------------------------------------------------------------------


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="Flat key=value config file")
    parser.add_argument(
        "--workload", default=None, help="JSONL trace to replay instead of synthesis"
    )
    parser.add_argument("--policy", choices=[p.value for p in Policy], default=None)
    parser.add_argument("--disagg", choices=[m.value for m in DisaggMode])
    parser.add_argument(
        "--router",
        choices=[r.value for r in Router],
        help="Arrival routing for unified policies (shared)",
    )
    parser.add_argument("--instances", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--duration-ms", type=float, default=None)
    parser.add_argument("--slo-ms", type=float, default=None, help="TTFT SLO (400)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override any config key, e.g. sched.w_max=25 (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laps-sim",
        description="Discrete-event simulator of a length-aware prefill tier",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run one scenario")
    _add_scenario_flags(simulate)
    simulate.add_argument("--out", required=True, help="Output directory")
    simulate.set_defaults(handler=cmd_simulate)

    sweep_p = sub.add_parser("sweep", help="Vary one parameter, one CSV row per value")
    _add_scenario_flags(sweep_p)
    sweep_p.add_argument(
        "--param", required=True, help="section.key or an alias like short_concurrency"
    )
    sweep_p.add_argument("--values", required=True, help="Comma-separated values")
    sweep_p.add_argument("--n-jobs", type=int, default=1, help="Parallel points")
    sweep_p.add_argument("--out", required=True, help="Output directory")
    sweep_p.set_defaults(handler=cmd_sweep)

    oracle = sub.add_parser("oracle", help="Print P-K wait and head-of-line penalty")
    oracle.add_argument("--lam", type=float, required=True, help="Arrivals per ms")
    oracle.add_argument("--p-short", type=float, default=0.5)
    oracle.add_argument("--s-short", type=float, default=1.0)
    oracle.add_argument("--s-long", type=float, default=3.0)
    oracle.set_defaults(handler=cmd_oracle)

    fit = sub.add_parser(
        "fit", help="Fit cost coefficients from an L,H,t_comp,t_mem CSV"
    )
    fit.add_argument("samples", help="Sample CSV")
    fit.add_argument("--config", default=None)
    fit.add_argument("--out", default=None, help="Write cost.* keys to this file")
    fit.set_defaults(handler=cmd_fit)

    synth = sub.add_parser("synth", help="Write a synthetic trace or latency samples")
    _add_scenario_flags(synth)
    synth.add_argument("--kind", choices=["trace", "samples"], default="trace")
    synth.add_argument("--n", type=int, default=200, help="Sample count")
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--out", required=True, help="Output file")
    synth.set_defaults(handler=cmd_synth)

    validate = sub.add_parser("validate", help="Run the acceptance checks")
    validate.add_argument(
        "--checks", default=None, help=f"Comma-separated subset of {', '.join(CHECKS)}"
    )
    validate.add_argument("--out", default=None, help="Write validation.json here")
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.handler(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except (LapsSimError, OSError) as exc:
        print(f"laps-sim: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
