"""Command line entry point: ``capsule run|bench|compare|serve|calibrate``."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path

from .errors import BindFailure, CapsuleError, InvalidScenario
from .harness import BASELINE, CAPSULE, MODES, capacity_search, ratio_table, read_samples_csv, run, steady_from_samples
from .scenario import Scenario, load

log = logging.getLogger("capsule")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _configure_logging() -> None:
    name = os.environ.get("CAPSULE_LOG", "warn").lower()
    if name not in LOG_LEVELS:
        raise UsageError(f"CAPSULE_LOG must be one of {', '.join(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


def _seed(text: str) -> int:
    value = _non_negative(text)
    if value >= 1 << 64:
        raise argparse.ArgumentTypeError(f"{text} does not fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capsule", description="Shared-engine multiplayer cost model and benchmarks.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file (.scn) or built-in profile name")
        p.add_argument("--seed", type=_seed, help="override the scenario seed")
        p.add_argument("--out", type=Path, help="output directory")

    p = sub.add_parser("run", help="run one mode and write its samples CSV")
    common(p)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--players", type=_non_negative, help="replace the schedule with this many joins")
    p.add_argument("--ticks", type=_non_negative, help="override duration_ticks")

    p = sub.add_parser("bench", help="sweep player counts in both modes")
    common(p)
    p.add_argument("--players", type=_non_negative, help="largest player count attempted")
    p.add_argument("--ticks", type=_non_negative, help="ticks between joins (default 2)")

    p = sub.add_parser("compare", help="ratio table of two samples CSVs")
    p.add_argument("csv", nargs=2, type=Path)
    p.add_argument("--out", type=Path, help="output directory for comparison.csv")

    p = sub.add_parser("serve", help="run the TCP gateway")
    common(p)
    p.add_argument("--listen", default="127.0.0.1:0", help="host:port")
    p.add_argument("--bots", type=_non_negative, default=0, help="in-process bot clients to attach")
    p.add_argument("--ticks", type=_non_negative, help="stop after this many ticks")

    p = sub.add_parser("calibrate", help="fit cost constants to the built-in targets")
    common(p, scenario_required=False)
    return parser


def _load_scenario(arg: str, seed: int | None) -> Scenario:
    path = Path(arg)
    if path.exists():
        scenario = load(path)
    else:
        from .apps import builtin_profiles

        names = {p.name: p for p in builtin_profiles()}
        if arg not in names:
            raise UsageError(f"no scenario file or built-in profile named {arg!r}")
        scenario = names[arg].scenario
    if seed is not None:
        scenario = scenario.replace(seed=seed)
    return scenario


def _out_dir(path: Path | None) -> Path:
    out = path or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


# -- verbs -------------------------------------------------------------------


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    if args.players is not None:
        scenario = scenario.with_players(args.players)
    if args.ticks is not None:
        last = max((e.tick for e in scenario.join_schedule), default=-1)
        if args.ticks <= last:
            raise UsageError(f"--ticks {args.ticks} ends before the last scheduled join at tick {last}")
        scenario = scenario.replace(duration_ticks=args.ticks)
    result = run(scenario, args.mode)
    _write(_out_dir(args.out) / f"{args.mode}.csv", result.to_csv())
    print(f"{scenario.name} {args.mode}: {len(result.samples)} ticks, peak players {result.max_players_admitted}, "
          f"{len(result.rejections)} rejected")
    return 0


def cmd_bench(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    spacing = 2 if args.ticks is None else args.ticks
    if spacing < 1:
        raise UsageError("--ticks must be >= 1 for bench")
    caps = {mode: capacity_search(scenario, mode) for mode in MODES}
    attempts = args.players if args.players is not None else max(caps.values()) + 1
    sweep = scenario.with_players(attempts, start=0, spacing=spacing, settle=spacing)
    sweep = sweep.replace(global_events=(), inputs=())
    out = _out_dir(args.out)
    results = {mode: run(sweep, mode) for mode in MODES}
    for mode in MODES:
        _write(out / f"{mode}.csv", results[mode].to_csv())
    report = ratio_table(
        steady_from_samples(results[CAPSULE].samples), steady_from_samples(results[BASELINE].samples)
    )
    _write(out / "comparison.csv", report.to_csv())
    print(report.format_table())
    ratio = caps[CAPSULE] / caps[BASELINE] if caps[BASELINE] else float("inf")
    print(f"capacity: capsule {caps[CAPSULE]}, baseline {caps[BASELINE]} ({ratio:.2f}x)")
    return 0


def cmd_compare(args) -> int:
    (mode_a, a), (mode_b, b) = (read_samples_csv(p) for p in args.csv)
    a_side, b_side = steady_from_samples(a), steady_from_samples(b)
    if (mode_a, mode_b) == (BASELINE, CAPSULE):
        report = ratio_table(b_side, a_side, CAPSULE, BASELINE)
    else:
        report = ratio_table(a_side, b_side, mode_a or "a", mode_b or "b")
    print(report.format_table())
    if args.out is not None:
        _write(_out_dir(args.out) / "comparison.csv", report.to_csv())
    return 0


def _parse_listen(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit() or int(port) > 65535:
        raise UsageError(f"--listen must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def cmd_serve(args) -> int:
    from .gateway import Gateway, GatewayConfig, run_bots

    scenario = _load_scenario(args.scenario, args.seed)
    host, port = _parse_listen(args.listen)
    gateway = Gateway.from_scenario(scenario, GatewayConfig(host=host, port=port))

    async def main():
        address = await gateway.start()
        print(f"listening on {address[0]}:{address[1]}", flush=True)
        try:
            if args.bots:
                bots = await run_bots(gateway, args.bots, 100 if args.ticks is None else args.ticks)
                admitted = sum(1 for b in bots if b.player is not None)
                frames = sum(len(b.frames) for b in bots)
                print(f"bots: {admitted}/{len(bots)} admitted, {frames} frames received")
            elif args.ticks is None:
                while True:
                    await gateway.run(1, interval=scenario.budget_ms / 1000)
            else:
                await gateway.run(args.ticks, interval=scenario.budget_ms / 1000)
        finally:
            await gateway.close()
        print(json.dumps(gateway.stats.__dict__, sort_keys=True))

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_calibrate(args) -> int:
    from .apps import templates
    from .calibrate import calibrate_scenario, calibration_summary

    known = {name: (template, targets) for name, _, template, targets in templates()}
    if args.scenario is None or args.scenario in known:
        template, targets = known[args.scenario or "exhibition"]
    else:
        template, targets = load(args.scenario), known["exhibition"][1]
    if args.seed is not None:
        template = template.replace(seed=args.seed)
    scenario = calibrate_scenario(template, targets)
    out = _out_dir(args.out)
    _write(out / f"{scenario.name}.scn", scenario.dumps())
    summary = {"cost_model": scenario.cost_model.to_dict(), **calibration_summary(scenario, targets.baseline_players)}
    _write(out / f"{scenario.name}.costmodel.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary["ratios_at_peak"], sort_keys=True))
    return 0


VERBS = {"run": cmd_run, "bench": cmd_bench, "compare": cmd_compare, "serve": cmd_serve, "calibrate": cmd_calibrate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _configure_logging()
        return VERBS[args.verb](args)
    except (UsageError, InvalidScenario, FileNotFoundError) as exc:
        print(f"capsule: error: {exc}", file=sys.stderr)
        return 2
    except (CapsuleError, BindFailure, OSError) as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"capsule: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
