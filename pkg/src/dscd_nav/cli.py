"""Command-line entry point: ``dscd-nav <command> ...``.

Exit codes: 0 success, 1 usage error (bad arguments, unreadable inputs), 2
runtime error while running episodes.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .metrics import with_baseline
from .runner import (
    EpisodeTrace,
    RunConfig,
    apply_variant,
    format_ablation,
    format_sweep,
    load_config,
    load_suite,
    report_for,
    run_ablation,
    run_suite,
    run_episode,
    sweep_beta,
    write_run,
)
from .scenario_io import load_scenario

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
DEFAULT_ABLATION = ("full", "tsu-only", "sib-only", "no-probe", "rounds=1", "rounds=2", "rounds=3", "rounds=4")

log = logging.getLogger("dscd_nav")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except FileNotFoundError as exc:
        raise UsageError(f"config not found: {exc.filename}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config {args.config}: {exc}") from None
    overrides = {}
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        overrides["rounds"] = args.rounds
    try:
        cfg = replace(cfg, **overrides)
        if getattr(args, "variant", None):
            cfg = apply_variant(cfg, args.variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _suite(directory):
    try:
        return load_suite(directory)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(f"bad scenario in {directory}: {exc}") from None


def _out(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def cmd_run(args) -> int:
    cfg = _config(args)
    try:
        scn = load_scenario(args.scenario)
    except FileNotFoundError:
        raise UsageError(f"scenario not found: {args.scenario}") from None
    except ValueError as exc:
        raise UsageError(f"bad scenario {args.scenario}: {exc}") from None
    trace = run_episode(cfg, scn)
    report = report_for([trace], cfg)
    out = _out(args, f"runs/{scn.name}")
    write_run(out, [trace], report)
    o = trace.outcome
    status = "success" if o.success else "failure"
    print(f"{scn.name}: {status} in {o.steps} steps, path {o.path_length:.2f} m, geodesic {o.geodesic:.2f} m")
    if trace.error:
        print(f"error: {trace.error}")
    print(f"trace: {out / (scn.name + '.jsonl')}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _config(args)
    suite = _suite(args.dir)
    out = _out(args, f"runs/{cfg.name}")
    rep = run_suite(cfg, suite, out)
    print(rep.to_table(), end="")
    print(f"traces and report: {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    suite = _suite(args.dir)
    for v in args.configs:
        try:
            apply_variant(cfg, v)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = _out(args, "runs/ablation")
    reports = run_ablation(cfg, suite, args.configs, out)
    table = format_ablation(reports)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _load_traces(paths: Sequence[str]) -> list[EpisodeTrace]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(p.glob("*.jsonl"))
        elif p.exists():
            files.append(p)
        else:
            raise UsageError(f"trace not found: {p}")
    if not files:
        raise UsageError("no trace files given")
    try:
        return [EpisodeTrace.load(f) for f in files]
    except (ValueError, KeyError) as exc:
        raise UsageError(f"unreadable trace: {exc}") from None


def cmd_eval(args) -> int:
    traces = _load_traces(args.traces)
    cfg = RunConfig.from_dict(traces[0].header["config"])
    if args.tau is not None:
        cfg = replace(cfg, metrics=replace(cfg.metrics, tau=args.tau))
    report = report_for(traces, replace(cfg, label=args.label or cfg.name))
    if args.baseline:
        base_traces = _load_traces(args.baseline)
        base_cfg = RunConfig.from_dict(base_traces[0].header["config"])
        base = report_for(base_traces, replace(base_cfg, metrics=cfg.metrics))
        try:
            report = with_baseline(report, base)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.json:
        print(report.to_json(), end="")
    else:
        print(report.to_table(), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    suite = _suite(args.dir)
    out = _out(args, "runs/sweep-beta")
    rows = sweep_beta(cfg, suite, step_cap=args.step_cap, out_dir=out)
    table = format_sweep(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_render(args) -> int:
    from .render import render_trajectory

    traces = _load_traces([args.trace])
    svg, ascii_map = render_trajectory(traces[0])
    svg_path = Path(args.svg) if args.svg else Path(args.trace).with_suffix(".svg")
    svg_path.write_text(svg, encoding="utf-8")
    print(ascii_map, end="")
    print(f"svg: {svg_path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .scenarios import FAMILIES, generate_suite, write_suite

    mix = tuple(args.families.split(",")) if args.families else None
    if mix and any(f not in FAMILIES for f in mix):
        raise UsageError(f"families must be drawn from {sorted(FAMILIES)}")
    suite = generate_suite(args.n, args.base_seed, mix) if mix else generate_suite(args.n, args.base_seed)
    paths = write_suite(suite, args.dir)
    print(f"wrote {len(paths)} scenarios to {args.dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dscd-nav", description="Dual-stance debate navigation in a 2D gridworld.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, workers=True):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="base seed (episode i uses seed + i)")
        sp.add_argument("--out", help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, help="parallel episodes")

    sp = sub.add_parser("run", help="run one scenario")
    sp.add_argument("scenario")
    common(sp, workers=False)
    sp.add_argument("--variant", help="ablation variant, e.g. tsu-only or rounds=2")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("batch", help="run every *.map scenario in a directory")
    sp.add_argument("dir")
    common(sp)
    sp.add_argument("--variant")
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("ablate", help="run a suite under several variants")
    sp.add_argument("dir")
    sp.add_argument("--configs", nargs="+", default=list(DEFAULT_ABLATION),
                    help="variants: full, tsu-only, sib-only, no-probe, no-nca, rounds=K")
    common(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("eval", help="compute metrics from saved traces")
    sp.add_argument("traces", nargs="+", help="trace files or directories of traces")
    sp.add_argument("--baseline", nargs="+", help="baseline traces for delta-SPL")
    sp.add_argument("--tau", type=float, help="AORI redundancy threshold in cells")
    sp.add_argument("--label")
    sp.add_argument("--json", action="store_true", help="print the full JSON report")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep-beta", help="micro-probe (beta_r, beta_theta) sensitivity sweep")
    sp.add_argument("dir")
    sp.add_argument("--step-cap", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("render", help="render a trace to SVG and ASCII")
    sp.add_argument("trace")
    sp.add_argument("--svg", help="SVG output path (default: next to the trace)")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("generate", help="write a seeded scenario suite")
    sp.add_argument("dir")
    sp.add_argument("-n", type=int, default=100)
    sp.add_argument("--base-seed", type=int, default=0)
    sp.add_argument("--families", help="comma-separated family cycle, e.g. dead_end,junction,clutter")
    sp.set_defaults(func=cmd_generate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dscd-nav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"dscd-nav: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
