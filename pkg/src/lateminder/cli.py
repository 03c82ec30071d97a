"""Command-line front end.

Every stage reads and writes plain files, so the pipeline can be run one
step at a time::

    lateminder synth --out-track track.csv --out-truth truth.csv
    lateminder learn --track track.csv --out-dir models
    lateminder replay --track track.csv --calendar calendar.csv --models-dir models
    lateminder render --schedule models/schedule.csv --svg schedule.svg

Flag defaults can also come from a sectioned config file (``--config``, one
``[command]`` section per subcommand, keys named like the flags with
underscores) and from the ``LATEMINDER_OUT_DIR`` / ``LATEMINDER_SEED``
environment variables. Command-line flags win over both.

Exit codes: 0 success, 1 usage error, 2 data error, 3 untrained model.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from importlib.resources import files
from pathlib import Path

from .alerts import LOOKAHEAD_SECONDS, TICK_SECONDS, CalendarError, alerts_to_csv, read_calendar, replay
from .clustering import locations_from_csv
from .ingest import TrackFormatError, emit_csv, read_track
from .pipeline import learn, load_models, write_models
from .schedule import schedule_from_csv, segment_averages
from .synth import InfeasibleRoutine, generate, parse_routine, truth_to_csv
from .travel import UntrainedModelError
from .viz import export_geojson, geojson_dumps, render_schedule_ascii, render_schedule_svg

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNTRAINED = 0, 1, 2, 3

ENV_OUT_DIR = "LATEMINDER_OUT_DIR"
ENV_SEED = "LATEMINDER_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_radii(text: str) -> tuple[float, ...]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected min:max:step, got {text!r}") from None
    if step <= 0 or hi < lo or lo <= 0:
        raise argparse.ArgumentTypeError(f"bad radius range {text!r}")
    n = int(round((hi - lo) / step))
    return tuple(lo + i * step for i in range(n + 1) if lo + i * step <= hi + 1e-9)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lateminder", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="sectioned config file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse an NMEA or CSV log into a canonical track CSV")
    p.add_argument("--input", required=True, help="NMEA-0183 or track CSV file")
    p.add_argument("--format", choices=["auto", "nmea", "csv"], default="auto", help="input format (default: auto)")
    p.add_argument("--out", required=True, help="canonical track CSV to write")

    p = sub.add_parser("learn", help="learn locations, travel times and the weekly schedule")
    p.add_argument("--track", required=True, help="track file (canonical CSV or NMEA)")
    p.add_argument("--format", choices=["auto", "nmea", "csv"], default="auto", help="track format (default: auto)")
    p.add_argument("--gap-minutes", type=float, default=10.0, help="minimum data gap that marks a place (default: 10)")
    p.add_argument("--speed-threshold", type=float, default=1.0, help="mph below which fixes are dropped (default: 1.0)")
    p.add_argument("--radii", type=parse_radii, default=parse_radii("50:1000:25"),
                   help="radius sweep in meters as min:max:step (default: 50:1000:25)")
    p.add_argument("--seed", type=int, default=0, help="clustering RNG seed (default: 0)")
    p.add_argument("--tz", default="UTC", help="timezone for weekday/minute bucketing (default: UTC)")
    p.add_argument("--workers", type=int, default=1, help="threads for the radius sweep (default: 1)")
    p.add_argument("--no-figures", dest="figures", action="store_false", help="skip sweep.png")
    p.add_argument("--out-dir", default="models", help="output directory (default: models)")

    p = sub.add_parser("replay", help="replay a track against a calendar and log lateness alerts")
    p.add_argument("--track", required=True, help="track file (canonical CSV or NMEA)")
    p.add_argument("--format", choices=["auto", "nmea", "csv"], default="auto", help="track format (default: auto)")
    p.add_argument("--calendar", required=True, help="calendar CSV")
    p.add_argument("--models-dir", default="models", help="directory written by learn (default: models)")
    p.add_argument("--tick", type=int, default=TICK_SECONDS, help=f"seconds between checks (default: {TICK_SECONDS})")
    p.add_argument("--lookahead", type=int, default=LOOKAHEAD_SECONDS,
                   help=f"seconds ahead to look for appointments (default: {LOOKAHEAD_SECONDS})")
    p.add_argument("--buffer", type=float, default=0.0, help="extra seconds of margin before alerting (default: 0)")
    p.add_argument("--out", default="alerts.csv", help="alert log CSV (default: alerts.csv)")

    p = sub.add_parser("render", help="draw the schedule and export locations for maps")
    p.add_argument("--schedule", required=True, help="schedule.csv written by learn")
    p.add_argument("--segment-minutes", type=int, default=30, help="length of a time segment (default: 30)")
    p.add_argument("--svg", help="SVG block chart to write")
    p.add_argument("--ascii", help="plain-text block chart to write")
    p.add_argument("--png", help="matplotlib rendering of the block chart")
    p.add_argument("--geojson", help="GeoJSON of the locations to write")
    p.add_argument("--locations", help="locations.csv (default: next to the schedule)")
    p.add_argument("--track", help="optional track to include in the GeoJSON")

    p = sub.add_parser("synth", help="generate a synthetic track from a weekly routine")
    p.add_argument("--spec", help="routine config file (default: bundled demo)")
    p.add_argument("--seed", type=int, default=None, help="override the routine's seed")
    p.add_argument("--out-track", required=True, help="track CSV to write")
    p.add_argument("--out-truth", required=True, help="ground-truth CSV to write")
    return parser


def _apply_defaults(parser: argparse.ArgumentParser, config_path: str | None) -> None:
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices
    if config_path:
        cfg = configparser.ConfigParser()
        if not cfg.read(config_path):
            parser.error(f"cannot read config file {config_path}")
        for name, sub in subparsers.items():
            if not cfg.has_section(name):
                continue
            actions = {a.dest: a for a in sub._actions}
            values = {}
            for key, raw in cfg.items(name):
                dest = key.replace("-", "_")
                if dest not in actions:
                    parser.error(f"unknown option {key!r} in [{name}]")
                action = actions[dest]
                if isinstance(action, argparse._StoreFalseAction):
                    values[dest] = cfg.getboolean(name, key)
                else:
                    values[dest] = action.type(raw) if action.type else raw
                action.required = False
            sub.set_defaults(**values)
    if os.environ.get(ENV_OUT_DIR):
        subparsers["learn"].set_defaults(out_dir=os.environ[ENV_OUT_DIR])
    if os.environ.get(ENV_SEED):
        seed = int(os.environ[ENV_SEED])
        subparsers["learn"].set_defaults(seed=seed)
        subparsers["synth"].set_defaults(seed=seed)


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_ingest(args) -> int:
    track = read_track(args.input, args.format)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(emit_csv(track))
    print(f"fixes: {len(track)} skipped: {track.skipped}")
    return EXIT_OK


def cmd_learn(args) -> int:
    track = read_track(args.track, args.format)
    learned = learn(
        track,
        gap_seconds=args.gap_minutes * 60,
        speed_threshold=args.speed_threshold,
        radii=args.radii,
        seed=args.seed,
        tz=args.tz,
        workers=args.workers,
    )
    write_models(learned, args.out_dir, figures=args.figures)
    print(
        f"places: {len(learned.places)} radius: {learned.sweep.chosen_radius:g} m"
        f"{'' if learned.sweep.knee_found else ' (no knee)'} locations: {len(learned.locations)} "
        f"edges: {len(learned.edges)} events: {len(learned.events)}"
    )
    return EXIT_OK


def cmd_replay(args) -> int:
    locations, edges = load_models(args.models_dir)
    if not edges:
        raise UntrainedModelError(f"no travel edges in {args.models_dir}")
    calendar = read_calendar(Path(args.calendar).read_text(encoding="utf-8"), locations)
    track = read_track(args.track, args.format)
    alerts = replay(track, calendar, edges, locations, args.tick, args.lookahead, args.buffer)
    _write(args.out, alerts_to_csv(alerts))
    print(f"alerts: {len(alerts)}")
    return EXIT_OK


def cmd_render(args) -> int:
    if not any([args.svg, args.ascii, args.png, args.geojson]):
        raise SystemExit(_usage("render: give at least one of --svg, --ascii, --png, --geojson"))
    model = schedule_from_csv(Path(args.schedule).read_text(encoding="utf-8"))
    grid = segment_averages(model, args.segment_minutes)
    if args.svg:
        _write(args.svg, render_schedule_svg(grid, args.segment_minutes))
    if args.ascii:
        _write(args.ascii, render_schedule_ascii(grid, args.segment_minutes))
    if args.png:
        from .plots import plot_schedule

        plot_schedule(grid, args.png, args.segment_minutes)
    if args.geojson:
        loc_path = Path(args.locations) if args.locations else Path(args.schedule).with_name("locations.csv")
        locations = locations_from_csv(loc_path.read_text(encoding="utf-8"))
        track = read_track(args.track) if args.track else None
        _write(args.geojson, geojson_dumps(export_geojson(locations, track)))
    return EXIT_OK


def cmd_synth(args) -> int:
    text = Path(args.spec).read_text(encoding="utf-8") if args.spec else demo_routine_text()
    spec = parse_routine(text)
    if args.seed is not None:
        spec.seed = args.seed
    track, truth = generate(spec)
    Path(args.out_track).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out_track).write_bytes(emit_csv(track))
    _write(args.out_truth, truth_to_csv(truth))
    print(f"fixes: {len(track)} stays: {len(truth.stays)} legs: {len(truth.legs)}")
    return EXIT_OK


def demo_routine_text() -> str:
    return files("lateminder").joinpath("data/demo_routine.ini").read_text(encoding="utf-8")


def _usage(msg: str) -> int:
    print(f"lateminder: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


COMMANDS = {
    "ingest": cmd_ingest,
    "learn": cmd_learn,
    "replay": cmd_replay,
    "render": cmd_render,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    _apply_defaults(parser, known.config)
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UntrainedModelError as exc:
        print(f"lateminder: untrained model: {exc}", file=sys.stderr)
        return EXIT_UNTRAINED
    except (TrackFormatError, CalendarError, InfeasibleRoutine, ValueError, KeyError) as exc:
        print(f"lateminder: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"lateminder: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
