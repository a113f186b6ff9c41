"""Command line interface: model building, runs, benchmarks and wave analysis."""

import argparse
import csv
import sys

from . import analysis, builder, engine, modelio, snapshots
from .parallel import resolve_threads
from .structures import DriveSignal

PRESETS = {"desk": builder.desk_spec, "paper-scale": builder.paper_scale_spec}


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def cmd_build(args) -> int:
    base = PRESETS[args.preset]()
    if args.config:
        with open(args.config) as fh:
            spec = builder.parse_config(fh.read(), base=base)
    else:
        spec = base
    model = builder.build_channel(spec, check_separation=not args.no_separation_check)
    modelio.write_model(args.out, model)
    print(
        f"wrote {args.out}: fluid {spec.dims[0]}x{spec.dims[1]}x{spec.dims[2]}, "
        f"{len(model.grids)} grids, {model.total_points} material points"
    )
    return 0


def _make_drive(args, model) -> DriveSignal:
    if not args.frequency:
        return None
    if args.amplitude is None:
        raise SystemExit(_fail("--frequency needs --amplitude"))
    return DriveSignal(args.amplitude, args.frequency, model.drive_direction)


def cmd_run(args) -> int:
    threads = resolve_threads(args.threads)
    if args.resume:
        state = engine.read_checkpoint(args.resume)
        if args.dt is not None and args.dt != state.dt:
            return _fail(f"--dt {args.dt} conflicts with checkpoint dt {state.dt}")
    else:
        if not args.model or args.dt is None:
            return _fail("run needs --model and --dt (or --resume)")
        model = modelio.read_model(args.model)
        drive = _make_drive(args, model)
        if args.drive_grid:
            model.drive_grid = args.drive_grid
        state = engine.make_state(model, args.dt, drive)
    written = engine.run(
        state,
        args.steps,
        snapshot_every=args.snapshot_every,
        out_dir=args.out,
        threads=threads,
        include_velocity=args.save_velocity,
    )
    print(f"ran {args.steps} steps to n={state.n}; wrote {len(written)} snapshots to {args.out}")
    return 0


def cmd_bench(args) -> int:
    model = modelio.read_model(args.model)
    drive = _make_drive(args, model)
    counts = [int(t) for t in args.threads.split(",")]
    rows = engine.bench(
        model, args.dt, args.steps, counts, warmup=args.warmup, repeats=args.repeats, drive=drive
    )
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["threads", "seconds_per_step"])
    for t, sec in rows:
        w.writerow([t, repr(sec)])
    if args.out:
        out.close()
        print(f"wrote {args.out}")
    return 0


def _load_grid(args):
    model = modelio.read_model(args.model)
    return model.grid(args.grid)


def _window(args):
    return tuple(args.window) if args.window else None


def cmd_centerline(args) -> int:
    grid = _load_grid(args)
    series = snapshots.list_snapshots(args.snapshots)
    if not series:
        return _fail(f"no snapshots in {args.snapshots}")
    if args.step is not None:
        matches = [p for s, p in series if s == args.step]
        if not matches:
            return _fail(f"no snapshot at step {args.step}")
        path = matches[0]
    else:
        path = series[-1][1]
    prof = analysis.centerline(snapshots.read_snapshot(path), grid)
    analysis.write_profile_csv(args.out, prof)
    if args.svg:
        analysis.plot_profile_svg(args.svg, prof)
    print(f"wrote {args.out} (step {prof.step})")
    return 0


def _envelope(args, grid):
    snaps = snapshots.load_window(args.snapshots, _window(args))
    if not snaps:
        raise SystemExit(_fail(f"no snapshots in window under {args.snapshots}"))
    return analysis.envelope(snaps, grid, _window(args))


def cmd_envelope(args) -> int:
    grid = _load_grid(args)
    env = _envelope(args, grid)
    analysis.write_envelope_csv(args.out, env)
    if args.svg:
        analysis.plot_envelope_svg(args.svg, env)
    print(f"wrote {args.out} (window {env.window[0]}..{env.window[1]})")
    return 0


def cmd_peak(args) -> int:
    grid = _load_grid(args)
    env = _envelope(args, grid)
    peak = analysis.peak_location(env)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["peak_station_cm"])
            w.writerow([repr(peak)])
    print(f"peak_station_cm {peak!r}")
    return 0


def cmd_linearity(args) -> int:
    grid = _load_grid(args)
    win = _window(args)
    env_a = analysis.envelope(snapshots.load_window(args.snapshots_a, win), grid, win)
    env_b = analysis.envelope(snapshots.load_window(args.snapshots_b, win), grid, win)
    rep = analysis.linearity_report(env_a, env_b, args.scale, args.mask_fraction)
    analysis.write_linearity_csv(args.out, rep)
    print(f"max deviation from scale {args.scale:g}: {rep.max_deviation:.3e}")
    return 0


def cmd_sweep(args) -> int:
    grid = _load_grid(args)
    win = _window(args)
    runs = []
    for item in args.run:
        freq_s, _, d = item.partition("=")
        if not d:
            return _fail(f"--run wants FREQ=SNAPDIR, got {item!r}")
        snaps = snapshots.load_window(d, win)
        if not snaps:
            return _fail(f"no snapshots in window under {d}")
        runs.append((float(freq_s), analysis.envelope(snaps, grid, win)))
    rep = analysis.frequency_sweep_report(runs)
    analysis.write_sweep_csv(args.out, rep)
    if args.svg:
        analysis.plot_sweep_svg(args.svg, rep)
    for f, p in zip(rep.frequencies, rep.peaks):
        print(f"{f:g} Hz -> peak at {p:.4f} cm")
    print(f"monotone decrease with frequency: {rep.monotone}")
    return 0


def _add_analysis_common(p, snapshots_dir=True):
    if snapshots_dir:
        p.add_argument("--snapshots", required=True, help="snapshot directory")
    p.add_argument("--model", required=True, help="model file (rest geometry)")
    p.add_argument("--grid", default="membrane", help="grid name (default membrane)")
    p.add_argument("--out", required=True, help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ibcochlea", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="generate a channel model file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--config", help="key = value overrides (ChannelSpec fields)")
    p.add_argument("--no-separation-check", action="store_true",
                   help="skip the pairwise grid distance check (large models)")
    p.add_argument("-o", "--out", required=True, help="model file to write")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("run", help="run a simulation")
    p.add_argument("--model", help="model file")
    p.add_argument("--dt", type=float, help="time step [s]")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--snapshot-every", type=int, default=10)
    p.add_argument("--out", required=True, help="snapshot/checkpoint directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (IBCOCHLEA_THREADS honored, flag wins)")
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.add_argument("--frequency", type=float, default=0.0, help="drive frequency [Hz]")
    p.add_argument("--amplitude", type=float, default=None, help="total drive force [dyn]")
    p.add_argument("--drive-grid", help="override the driven grid name")
    p.add_argument("--save-velocity", action="store_true",
                   help="include the velocity field in snapshots")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="per-step wall time for several thread counts")
    p.add_argument("--model", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--threads", default="1,2,4,8", help="comma-separated counts")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--frequency", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("centerline", help="centerline displacement of one snapshot")
    _add_analysis_common(p)
    p.add_argument("--step", type=int, help="snapshot step (default: latest)")
    p.add_argument("--svg", help="also write an SVG plot")
    p.set_defaults(fn=cmd_centerline)

    p = sub.add_parser("envelope", help="pointwise-max wave envelope over a step window")
    _add_analysis_common(p)
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--svg", help="also write an SVG plot")
    p.set_defaults(fn=cmd_envelope)

    p = sub.add_parser("peak", help="station of the envelope maximum")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="membrane")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--out", help="optional CSV path")
    p.set_defaults(fn=cmd_peak)

    p = sub.add_parser("linearity", help="compare two runs against an amplitude scale")
    p.add_argument("--snapshots-a", required=True, help="baseline run snapshots")
    p.add_argument("--snapshots-b", required=True, help="scaled run snapshots")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="membrane")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--mask-fraction", type=float, default=0.01,
                   help="ignore stations below this fraction of the baseline peak")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_linearity)

    p = sub.add_parser("sweep", help="peak location per drive frequency")
    p.add_argument("--run", action="append", required=True, metavar="FREQ=SNAPDIR")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="membrane")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also write an SVG plot")
    p.set_defaults(fn=cmd_sweep)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
