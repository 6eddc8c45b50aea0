import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from .batch import BatchRunner
from .config import PipelineConfig
from .controller import GlobalState, StateTimeline
from .errors import InvalidInputError, JourneyDetectorError
from .noise import dynamic_noise_sweep, runs_from_pings, static_noise_stats
from .power import GpsMode, compare_savings, curve_to_csv, fit_discharge, get_profile, simulate_battery, \
    timeline_from_csv, timeline_to_csv
from .synthetic import PRESETS, generate_accel_corpus, generate_synthetic, preset_scenario, random_scenario
from .trace_io import load_accel_corpus, load_battery_samples, load_diary_csv, load_journeys, load_trace, \
    save_accel_corpus, save_journeys, save_trace
from .tuning import AnnealingConfig, anneal, default_grid, grid_search
from .validation import diary_from_pings, validate_detection


def setup_logging(debug: bool = False, log_file: Optional[Path] = None):
    """Configure logging settings."""
    level = logging.DEBUG if debug else logging.INFO
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--debug', action='store_true', help='Enable debug logging')
    common.add_argument('--log-file', type=Path, help='Also write the log to this file')
    common.add_argument(
        '--params',
        type=Path,
        help='Parameter file (key = value); defaults to $JOURNEY_DETECTOR_CONFIG'
    )
    common.add_argument('--seed', type=int, default=None, help='Random seed for reproducible runs')

    parser = argparse.ArgumentParser(
        prog='journey-detector',
        description='Journey detection, battery simulation and tuning over recorded sensor traces'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    segment = sub.add_parser('segment', parents=[common], help='Segment traces into journeys')
    segment.add_argument('traces', nargs='+', type=Path, help='Trace directories or GPS CSV files')
    segment.add_argument(
        '--output',
        type=Path,
        required=True,
        help='Journey JSON file (a directory when several traces are given)'
    )
    segment.add_argument(
        '--battery-aware',
        action=argparse.BooleanOptionalAction,
        default=None,
        help='Switch the GPS off after the idle timeout (default: from parameters)'
    )
    segment.add_argument('--idle-timeout', type=float, help='Seconds without a journey before GPS -> ACC')
    segment.add_argument('--timeline-out', type=Path, help='Write the sensor-state timeline CSV here')
    segment.add_argument('--session-start', type=int, help='Session start, ms')
    segment.add_argument('--session-stop', type=int, help='Session stop, ms')
    segment.add_argument('--max-concurrency', type=int, default=4, help='Traces processed at once (default: 4)')

    battery = sub.add_parser('simulate-battery', parents=[common], help='Timeline CSV -> discharge curve CSV')
    battery.add_argument('timeline', type=Path, help='Timeline CSV (t_seconds,state)')
    battery.add_argument('--output', type=Path, required=True, help='Curve CSV (t_seconds,level_pct)')
    battery.add_argument('--device', help='Device preset (T1, T2, S1, S2); default from parameters')
    battery.add_argument('--gps-mode', choices=[m.value for m in GpsMode], default=GpsMode.OUTDOOR.value)
    battery.add_argument('--start-level', type=float, default=100.0, help='Initial battery level in percent')
    battery.add_argument('--step', type=float, default=60.0, help='Curve sampling step in seconds')
    battery.add_argument(
        '--compare-base',
        action='store_true',
        help='Also report savings against an always-on GPS timeline over the same span'
    )

    fit = sub.add_parser('fit-discharge', parents=[common], help='Fit a quadratic to measured battery levels')
    fit.add_argument('samples', type=Path, help='Battery CSV (t_ms,level_pct[,voltage_mv])')
    fit.add_argument('--output', type=Path, help='Fit result JSON')

    tune = sub.add_parser('tune', parents=[common], help='Tune motion parameters on a labeled corpus')
    tune.add_argument('corpus', type=Path, help='Directory with labels.csv and accelerometer CSVs')
    tune.add_argument('--output', type=Path, required=True, help='Best parameters and outcome as JSON')
    tune.add_argument('--mode', choices=['anneal', 'random', 'grid'], default='anneal')
    tune.add_argument('--epochs', type=int, default=10000)
    tune.add_argument('--temperature', type=float, default=1.0, help='Initial annealing temperature')
    tune.add_argument('--cooling', type=float, default=0.995, help='Geometric cooling factor per epoch')
    tune.add_argument('--grid-points', type=int, default=5, help='Grid points per parameter axis')

    noise = sub.add_parser('noise', parents=[common], help='GPS noise analyses')
    noise.add_argument('analysis', choices=['static', 'dynamic'])
    noise.add_argument('trace', type=Path, help='Trace directory or GPS CSV file')
    noise.add_argument('--output', type=Path, required=True, help='Result CSV')
    noise.add_argument('--w-max', type=int, default=10, help='Largest window size for the dynamic sweep')

    synth = sub.add_parser('synth', parents=[common], help='Write synthetic traces')
    source = synth.add_mutually_exclusive_group(required=True)
    source.add_argument('--preset', choices=PRESETS)
    source.add_argument('--random', action='store_true', help='Random itinerary drawn from --seed')
    source.add_argument('--accel-corpus', type=int, metavar='N', help='Labeled accelerometer corpus of N runs')
    synth.add_argument('--output', type=Path, required=True, help='Output directory')

    validate = sub.add_parser('validate', parents=[common], help='Score journeys against a truth diary')
    validate.add_argument('journeys', type=Path, help='Journey JSON')
    validate.add_argument('diary', type=Path, help='Diary CSV (start_ms,end_ms) or a trace directory')
    validate.add_argument('--tolerance', type=float, help='Endpoint tolerance in seconds')
    validate.add_argument('--output', type=Path, help='Report JSON')
    return parser


def load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.params)
    overrides = {}
    if getattr(args, 'battery_aware', None) is not None:
        overrides.setdefault('controller', {})['battery_aware'] = args.battery_aware
    if getattr(args, 'idle_timeout', None) is not None:
        overrides.setdefault('controller', {})['idle_timeout'] = args.idle_timeout
    if getattr(args, 'tolerance', None) is not None:
        overrides['validation'] = {'tolerance': args.tolerance}
    return config.with_overrides(overrides) if overrides else config


def _write_json(data, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2)


def cmd_segment(args, config: PipelineConfig, logger: logging.Logger) -> int:
    session = None
    if args.session_start is not None or args.session_stop is not None:
        if args.session_start is None or args.session_stop is None:
            raise InvalidInputError("--session-start and --session-stop must be given together")
        session = (args.session_start, args.session_stop)

    runner = BatchRunner(config, max_concurrency=args.max_concurrency, session=session)
    results = asyncio.run(runner.run(args.traces))
    several = len(results) > 1
    for result in results:
        if not result.ok:
            continue
        name = result.path.stem if result.path.is_file() else result.path.name
        out = args.output / f"{name}.journeys.json" if several else args.output
        save_journeys(result.journeys, out)
        if args.timeline_out:
            timeline_out = args.timeline_out / f"{name}.timeline.csv" if several else args.timeline_out
            timeline_out.parent.mkdir(parents=True, exist_ok=True)
            timeline_to_csv(result.timeline, timeline_out)
        hours_gps = result.timeline.time_in(GlobalState.GPS) / 3600
        print(f"{result.path}: {len(result.journeys)} journeys, GPS on for {hours_gps:.2f} h -> {out}")

    failed = [r for r in results if not r.ok]
    for result in failed:
        logger.error(f"{result.path}: {result.error}")
    return 1 if failed else 0


def cmd_simulate_battery(args, config: PipelineConfig, logger: logging.Logger) -> int:
    timeline = timeline_from_csv(args.timeline)
    profile = get_profile(args.device or config.device).with_gps_mode(args.gps_mode)
    curve = simulate_battery(timeline, profile, args.start_level, args.step)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    curve_to_csv(curve, args.output)
    print(f"{profile.name}: {curve.start_level:.1f}% -> {curve.final_level:.1f}%")
    if curve.linear_rate is not None:
        print(f"Fitted rate {curve.linear_rate:.3f} %/h (quadratic {curve.quad_coeff:.3g})")
    if args.compare_base and timeline.intervals:
        base = StateTimeline.single(timeline.start_t, timeline.end_t, GlobalState.GPS)
        print(f"Savings against always-on GPS: {compare_savings(timeline, base, profile):.1%}")
    return 0


def cmd_fit_discharge(args, config: PipelineConfig, logger: logging.Logger) -> int:
    samples = load_battery_samples(args.samples)
    linear_rate, quad_coeff = fit_discharge(samples)
    hours = (samples[-1][0] - samples[0][0]) / 3_600_000
    if args.output:
        _write_json({'linear_rate': linear_rate, 'quad_coeff': quad_coeff, 'samples': len(samples),
                     'hours': hours}, args.output)
    print(f"{len(samples)} samples over {hours:.2f} h: {linear_rate:.3f} %/h (quadratic {quad_coeff:.3g})")
    return 0


def cmd_tune(args, config: PipelineConfig, logger: logging.Logger) -> int:
    runs = load_accel_corpus(args.corpus)
    if args.mode == 'grid':
        result = grid_search(runs, default_grid(args.grid_points)).best
    else:
        result = anneal(runs, AnnealingConfig(
            epochs=args.epochs,
            initial_temperature=args.temperature,
            cooling=args.cooling,
            seed=args.seed,
            mode=args.mode,
        ))
    _write_json(result.to_dict(), args.output)
    outcome = result.outcome
    print(
        f"Best cost {result.cost:.4f}: TP rate {outcome.tp_rate:.1%}, TN rate {outcome.tn_rate:.1%} "
        f"({', '.join(f'{k}={v}' for k, v in zip(('n1', 'th1', 'n2', 'th2', 'w2'), result.params.as_tuple()))})"
    )
    return 0


def cmd_noise(args, config: PipelineConfig, logger: logging.Logger) -> int:
    bundle = load_trace(args.trace)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    if args.analysis == 'static':
        stats = static_noise_stats(bundle.gps)
        pd.DataFrame([{
            'mean_lat': stats.mean_pos[0],
            'mean_lon': stats.mean_pos[1],
            'max_dev_lat': stats.max_dev_lat,
            'max_dev_lon': stats.max_dev_lon,
            'max_dev_lat_m': stats.max_dev_lat_m,
            'max_dev_lon_m': stats.max_dev_lon_m,
            'samples': stats.samples,
        }]).to_csv(args.output, index=False)
        print(f"Max deviation {stats.max_dev_lat_m:.2f} m (lat), {stats.max_dev_lon_m:.2f} m (lon)")
        return 0

    runs = runs_from_pings(bundle.gps, bundle.pings)
    if not runs:
        raise InvalidInputError(f"{args.trace} has no start/stop ping pairs to cut runs from")
    rows = dynamic_noise_sweep(runs, range(1, args.w_max + 1))
    pd.DataFrame([r.to_dict() for r in rows]).to_csv(args.output, index=False)
    for row in rows:
        print(f"w={row.w}: mean {row.mean_dev:.3f} m/s, p95 {row.p95_dev:.3f} m/s")
    return 0


def cmd_synth(args, config: PipelineConfig, logger: logging.Logger) -> int:
    if args.accel_corpus is not None:
        save_accel_corpus(generate_accel_corpus(args.accel_corpus, seed=args.seed), args.output)
        print(f"Wrote {args.accel_corpus} labeled accelerometer runs to {args.output}")
        return 0
    if args.random:
        scenario = random_scenario(np.random.default_rng(args.seed))
    else:
        scenario = preset_scenario(args.preset)
    bundle, diary = generate_synthetic(scenario, seed=args.seed)
    save_trace(bundle, args.output)
    print(f"Wrote '{scenario.name}' trace with {len(diary)} journeys to {args.output}")
    return 0


def cmd_validate(args, config: PipelineConfig, logger: logging.Logger) -> int:
    journeys = load_journeys(args.journeys)
    if args.diary.is_dir():
        bundle = load_trace(args.diary)
        diary = bundle.diary or diary_from_pings(bundle.pings)
    else:
        diary = load_diary_csv(args.diary)
    report = validate_detection(journeys, diary, config.validation_tolerance)
    if args.output:
        _write_json(report.to_dict(), args.output)
    full, clipped, missed = report.fractions
    print(f"{report.total} journeys: {full:.1%} full, {clipped:.1%} clipped, {missed:.1%} missed")
    return 0


COMMANDS = {
    'segment': cmd_segment,
    'simulate-battery': cmd_simulate_battery,
    'fit-discharge': cmd_fit_discharge,
    'tune': cmd_tune,
    'noise': cmd_noise,
    'synth': cmd_synth,
    'validate': cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.debug, args.log_file)
    logger = logging.getLogger(__name__)

    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config, logger)

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130

    except (JourneyDetectorError, OSError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return 1

    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {str(e)}", exc_info=True)
        return 1


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
