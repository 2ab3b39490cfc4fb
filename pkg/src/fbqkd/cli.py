"""Command-line entry point.

Subcommands orchestrate the library end to end: analytic single-channel
evaluation, operating-point sweeps, attenuation range scans, comb channel
planning, basis tables, Monte Carlo timetag generation, timetag ingestion,
and synthetic fixture generation. Every run writes a fully-resolved config
echo next to its outputs, so any result can be reproduced exactly from the
files it ships with.

Unit conventions (also used in all output headers): rates in Hz, times and
windows in ps, powers in mW, losses in dB. Coincidence windows are
half-widths: two detections coincide when |t_A - t_B| <= window.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import keyrate, report, sweep, timetag
from .config import (
    ConfigError,
    OutputSettings,
    RunConfig,
    load_config,
    render_config,
)
from .qudit import Basis
from .spectrum import JsiParseError, JsiRecord, allocate_channels, load_jsi, write_jsi

__all__ = ["main", "synthetic_jsi"]

_USAGE_ERROR = 2
_DOMAIN_ERROR = 1


# --------------------------------------------------------------------------
# synthetic fixture
# --------------------------------------------------------------------------

# The synthetic joint-spectrum fixture spans comb modes 3..82 (80 usable
# mode pairs) in four deterministic rate tiers:
#   - dead modes 3..6 (< 0.5 kHz): below any usable floor,
#   - a mid-tier block 7..13 (0.5-1 kHz): usable only at a relaxed floor,
#   - seven strong runs of nine modes (>= 1 kHz), separated by
#   - single mid-tier "cutter" modes at 23, 33, ..., 73.
# At a 1 kHz floor the usable comb is exactly the seven nine-mode runs
# (21 width-3 channels); at a 0.5 kHz floor modes 7..82 form one contiguous
# 76-mode run (38 width-2 channels).
_DEAD_MODES = range(3, 7)
_MID_BLOCK = range(7, 14)
_CUTTER_MODES = frozenset(range(23, 74, 10))
_LAST_MODE = 82


def synthetic_jsi(jitter: float = 0.0, seed: int | None = None) -> list[JsiRecord]:
    """The canonical synthetic per-mode rate table.

    ``jitter`` (fraction, at most 0.05) adds seeded multiplicative noise
    small enough to keep every mode inside its rate tier, so channel counts
    are invariant; jitter 0 gives the byte-stable packaged fixture.
    """
    if not 0.0 <= jitter <= 0.05:
        raise ValueError(f"jitter must lie in [0, 0.05], got {jitter}")
    rng = np.random.default_rng(seed)
    records = []
    for n in range(_DEAD_MODES.start, _LAST_MODE + 1):
        if n in _DEAD_MODES:
            rate = 140.0 + 90.0 * (n - _DEAD_MODES.start)
        elif n in _MID_BLOCK:
            rate = 560.0 + (380.0 / 6.0) * (n - _MID_BLOCK.start)
        elif n in _CUTTER_MODES:
            rate = 590.0
        else:
            rate = max(8500.0 * math.exp(-((n - 15) ** 2) / (2.0 * 34.0**2)), 1050.0)
        if jitter > 0.0:
            rate *= 1.0 + jitter * (2.0 * rng.random() - 1.0)
        records.append(
            JsiRecord(
                mode_index=n,
                coincidence_rate_hz=rate,
                background_rate_hz=round(0.002 * rate, 1),
            )
        )
    return records


def _packaged_jsi() -> list[JsiRecord]:
    ref = resources.files("fbqkd").joinpath("data/jsi_synthetic.tsv")
    return load_jsi(ref.read_text().splitlines())


# --------------------------------------------------------------------------
# plumbing
# --------------------------------------------------------------------------


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    output = cfg.output
    if args.output is not None:
        output = replace(output, directory=args.output)
    if args.format is not None:
        output = replace(output, format=args.format)
    if getattr(args, "no_figures", False):
        output = replace(output, figures=False)
    cfg = replace(cfg, output=output)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_echo(cfg: RunConfig, outdir: Path, stem: str) -> Path:
    path = outdir / f"{stem}_config.ini"
    path.write_text(render_config(cfg))
    return path


def _print_report(rep: keyrate.KeyRateReport, g2: float | None = None) -> None:
    print(f"dimension        : {rep.dimension}")
    print(f"QBER Z / X       : {rep.qber_z:.4f} / {rep.qber_x:.4f}")
    print(f"raw rate         : {rep.raw_rate:.1f} Hz")
    print(f"secure key rate  : {rep.skr:.1f} bit/s")
    print(f"secure           : {'yes' if rep.secure else 'no'}")
    if g2 is not None:
        print(f"heralded g2      : {g2:.4f}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    outcome = sweep.simulate_channel(
        cfg.source, cfg.apparatus, cfg.temporal, cfg.link
    )
    _print_report(outcome.report, outcome.heralded_g2)
    files = report.emit_simulate(outcome, outdir, "simulate", cfg.output.format)
    files.append(_write_echo(cfg, outdir, "simulate"))
    print("wrote:", ", ".join(str(p) for p in files))
    return 0 if outcome.report.secure else _DOMAIN_ERROR


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    result = sweep.cartography(
        cfg.source, cfg.apparatus, cfg.temporal, cfg.sweep,
        dimension=cfg.link.dimension,
        attenuation_db=cfg.link.applied_attenuation_db,
        workers=cfg.workers,
    )
    print(
        f"d={result.dimension} optimum: P = {result.optimum_power_mw:g} mW, "
        f"window = {result.optimum_window_ps:g} ps, "
        f"SKR = {result.optimum_skr:.1f} bit/s"
    )
    files = report.emit_sweep(result, outdir, "sweep", cfg.output.format)
    if cfg.output.figures:
        files.append(report.figure_sweep(result, outdir / "sweep_map.png"))
    files.append(_write_echo(cfg, outdir, "sweep"))
    print("wrote:", ", ".join(str(p) for p in files))
    return 0 if result.optimum_skr > 0.0 else _DOMAIN_ERROR


def _cmd_range(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    result = sweep.range_scan(
        cfg.source, cfg.apparatus, cfg.temporal,
        dimensions=cfg.range.dimensions,
        alphas_db=cfg.range.alphas(),
        grid=cfg.sweep,
        reoptimize=cfg.range.reoptimize,
        workers=cfg.workers,
    )
    for d, curve in sorted(result.curves.items()):
        tag = " (grid end, not reached)" if curve.censored else ""
        print(f"d={d} extinction: {float(curve.max_attenuation_db):.2f} dB{tag}")
    if result.crossover_db is not None:
        print(f"crossover: {float(result.crossover_db):.2f} dB")
    files = report.emit_range(result, outdir, "range", cfg.output.format)
    if cfg.output.figures:
        files.append(report.figure_range(result, outdir / "range_curves.png"))
    files.append(_write_echo(cfg, outdir, "range"))
    print("wrote:", ", ".join(str(p) for p in files))
    any_key = any(np.any(np.asarray(c.skr) > 0.0) for c in result.curves.values())
    return 0 if any_key else _DOMAIN_ERROR


def _cmd_plan(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    try:
        records = load_jsi(args.jsi) if args.jsi else _packaged_jsi()
    except (JsiParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    channels = allocate_channels(
        records, width_resonances=args.width, rate_floor_hz=args.floor
    )
    print(
        f"{len(channels)} channels of width {args.width} above "
        f"{args.floor:g} Hz"
    )
    for i, ch in enumerate(channels):
        print(
            f"  channel {i:2d}: modes {ch.first_mode}..{ch.last_mode} "
            f"(center {ch.center_mode}, max d = {ch.max_dimension})"
        )
    files = report.emit_plan(
        records, channels, args.width, args.floor, outdir, "plan",
        cfg.output.format,
    )
    if cfg.output.figures:
        files.append(
            report.figure_plan(records, channels, args.floor,
                               outdir / "plan_channels.png")
        )
    files.append(_write_echo(cfg, outdir, "plan"))
    print("wrote:", ", ".join(str(p) for p in files))
    return 0 if channels else _DOMAIN_ERROR


def _cmd_mubs(args: argparse.Namespace) -> int:
    rows = report.mub_table_rows(args.dimension)
    header = ["basis", "outcome"] + [
        f"amplitude_{j}" for j in range(args.dimension)
    ]
    widths = [
        max(len(header[c]), max(len(r[c]) for r in rows))
        for c in range(len(header))
    ]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    if args.output is not None:
        cfg = _resolve_config(args)
        outdir = _outdir(cfg)
        if cfg.output.format == "json":
            path = report.write_json(
                outdir / "mubs.json",
                {
                    "dimension": args.dimension,
                    "columns": header,
                    "rows": rows,
                },
            )
        else:
            path = report.write_csv(outdir / "mubs.csv", header, rows)
        echo = _write_echo(cfg, outdir, "mubs")
        print("wrote:", f"{path}, {echo}")
    return 0


def _cmd_gen_timetags(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    duration = args.duration if args.duration is not None else cfg.link.integration_time_s
    stream = timetag.generate_stream(
        cfg.source, cfg.apparatus, cfg.temporal, cfg.link,
        duration_s=duration, seed=cfg.seed, dwell_s=cfg.dwell_s,
    )
    suffix = "bin" if args.timetag_format == "binary" else "txt"
    path = outdir / f"timetags.{suffix}"
    timetag.write_timetags(stream, path, fmt=args.timetag_format)
    echo = _write_echo(cfg, outdir, "timetags")
    print(
        f"{stream.n_events} events over {duration:g} s "
        f"(d = {stream.dimension}, seed {cfg.seed})"
    )
    print("wrote:", f"{path}, {echo}")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    window = args.window if args.window is not None else cfg.link.coincidence_window_ps
    try:
        matrices = timetag.count_coincidences(
            args.timetags, window_ps=window, policy=args.policy
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    mz, mx = matrices[Basis.Z], matrices[Basis.X]
    d = mz.dimension
    files = []
    for name, m in (("z", mz), ("x", mx)):
        files.append(
            report.write_csv(
                outdir / f"ingest_matrix_{name}.csv",
                ["alice_outcome"] + [f"bob_{b}_counts" for b in range(d)],
                ([a] + [float(v) for v in m.counts[a]] for a in range(d)),
            )
        )
    if mz.total() == 0.0 or mx.total() == 0.0:
        print(
            "error: no coincidences in "
            + ("both bases" if mz.total() == mx.total() == 0.0 else
               ("Z basis" if mz.total() == 0.0 else "X basis")),
            file=sys.stderr,
        )
        return _DOMAIN_ERROR
    rep = keyrate.skr(
        d,
        keyrate.raw_rate(mz, mx),
        keyrate.qber(mz),
        keyrate.qber(mx),
    )
    _print_report(rep)
    files.append(
        report.write_csv(
            outdir / "ingest_report.csv",
            [
                "dimension", "window_ps", "qber_z_fraction", "qber_x_fraction",
                "raw_rate_hz", "skr_bits_per_s", "secure",
            ],
            [[d, window, rep.qber_z, rep.qber_x, rep.raw_rate, rep.skr,
              rep.secure]],
        )
    )
    if args.fit_histogram:
        stream = timetag.read_timetags(args.timetags)
        hist = timetag.delay_histogram(
            stream, bin_width_ps=args.bin_width, span_ps=args.span
        )
        try:
            fit = timetag.fit_voigt(hist)
        except timetag.FitRejectedError as exc:
            print(f"histogram fit rejected: {exc}", file=sys.stderr)
            fit = None
        files.extend(
            report.emit_histogram(hist, fit, outdir, "ingest",
                                  cfg.output.format)
        )
        if cfg.output.figures:
            files.append(
                report.figure_histogram(hist, fit,
                                        outdir / "ingest_histogram.png")
            )
    files.append(_write_echo(cfg, outdir, "ingest"))
    print("wrote:", ", ".join(str(p) for p in files))
    return 0 if rep.secure else _DOMAIN_ERROR


def _cmd_gen_jsi(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    outdir = _outdir(cfg)
    try:
        records = synthetic_jsi(jitter=args.jitter, seed=cfg.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    path = outdir / "jsi.tsv"
    write_jsi(
        records, path,
        header=(
            "synthetic joint-spectrum fixture (not measured data)\n"
            f"jitter={args.jitter!r} seed={cfg.seed if args.jitter else None}"
        ),
    )
    echo = _write_echo(cfg, outdir, "jsi")
    print(f"{len(records)} modes -> {path}")
    print("wrote:", f"{path}, {echo}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("-c", "--config", metavar="INI",
                     help="run configuration file (key = value sections)")
    sub.add_argument("--seed", type=int, help="override the RNG seed")
    sub.add_argument("--output", metavar="DIR",
                     help="output directory (default from config)")
    sub.add_argument("--format", choices=("csv", "json"),
                     help="delimited output format (default from config)")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbqkd",
        description=(
            "Frequency-bin entanglement QKD link toolkit. Units: rates Hz, "
            "times ps, powers mW, losses dB. Coincidence windows are "
            "half-widths (|t_A - t_B| <= window)."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate",
                        help="analytic single-channel evaluation")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("sweep", help="(power, window) key-rate cartography")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("range", help="attenuation range scan")
    _add_common(p)
    p.set_defaults(func=_cmd_range)

    p = subs.add_parser("plan", help="comb channel allocation from a rate table")
    _add_common(p)
    p.add_argument("jsi", nargs="?",
                   help="per-mode rate table (default: packaged synthetic fixture)")
    p.add_argument("--width", type=int, default=3,
                   help="channel width in resonances (default 3)")
    p.add_argument("--floor", type=float, default=1000.0,
                   help="usable-mode rate floor in Hz (default 1000)")
    p.set_defaults(func=_cmd_plan)

    p = subs.add_parser("mubs", help="measurement-basis amplitude table")
    _add_common(p)
    p.add_argument("-d", "--dimension", type=int, default=3,
                   help="qudit dimension (default 3)")
    p.set_defaults(func=_cmd_mubs)

    p = subs.add_parser("gen-timetags",
                        help="Monte Carlo detection-event stream")
    _add_common(p)
    p.add_argument("--duration", type=float,
                   help="acquisition length in s (default: link integration time)")
    p.add_argument("--timetag-format", choices=("binary", "text"),
                   default="binary", help="stream file format")
    p.set_defaults(func=_cmd_gen_timetags)

    p = subs.add_parser("ingest",
                        help="count a timetag stream into matrices and a key report")
    _add_common(p)
    p.add_argument("timetags", help="timetag file (binary or text)")
    p.add_argument("--window", type=float,
                   help="coincidence window half-width in ps "
                        "(default: link window)")
    p.add_argument("--policy", choices=("exclusive", "all-pairs"),
                   default="exclusive", help="pairing policy")
    p.add_argument("--fit-histogram", action="store_true",
                   help="also emit a delay histogram with a Voigt peak fit")
    p.add_argument("--bin-width", type=float, default=10.0,
                   help="histogram bin width in ps (default 10)")
    p.add_argument("--span", type=float, default=1500.0,
                   help="histogram half-span in ps (default 1500)")
    p.set_defaults(func=_cmd_ingest)

    p = subs.add_parser("gen-jsi", help="emit the synthetic rate-table fixture")
    _add_common(p)
    p.add_argument("--jitter", type=float, default=0.0,
                   help="multiplicative rate jitter fraction, <= 0.05 "
                        "(tier structure is preserved)")
    p.set_defaults(func=_cmd_gen_jsi)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
