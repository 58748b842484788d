"""
Palm vein identification experiments - command line
Subcommands: run (one grid cell), grid (full ablation grid), synth (write a synthetic dataset),
features (build and cache feature matrices), preprocess (dump preprocessing stages of one image).
"""

import argparse
import logging
import sys
from typing import List, Optional

from config.settings import get_config, settings_manager
from utils.errors import PalmVeinError
from utils.scheduler import experiment_scheduler


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML experiment file')
    common.add_argument('--preset', choices=settings_manager.preset_names(), help='built-in experiment preset')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override a dotted configuration key (repeatable)')
    common.add_argument('--seed', type=int, help='base seed; run r uses seed + r')
    common.add_argument('--runs', type=int, help='repeated runs per cell')
    common.add_argument('--out', help='output directory')
    common.add_argument('--log-level', default=None, help='logging level (default: PALMVEIN_LOG_LEVEL or INFO)')

    parser = argparse.ArgumentParser(prog='palmvein', description='Palm vein DWT + PCA + PSO experiments')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('run', parents=[common], help='run one configured cell')
    sub.add_parser('grid', parents=[common], help='run the PCA x selection x classifier grid')
    sub.add_parser('synth', parents=[common], help='generate and write a synthetic dataset')
    sub.add_parser('features', parents=[common], help='build and cache feature matrices')
    pre = sub.add_parser('preprocess', parents=[common], help='write preprocessing stages and histograms')
    pre.add_argument('image', help='BMP or PGM palm image')
    return parser


def setup_logging(level: Optional[str]):
    name = (level or get_config('PALMVEIN_LOG_LEVEL', 'INFO')).upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', force=True)


def print_summary(report):
    print(f"{'cell':<28} {'mean':>8} {'std':>8} {'min':>8} {'max':>8} {'selected':>9}")
    for cell in report.cells:
        print(f"{cell.cell_id:<28} {cell.mean:8.4f} {cell.std:8.4f} {cell.minimum:8.4f} "
              f"{cell.maximum:8.4f} {cell.mean_selected:9.1f}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        cfg = settings_manager.load(args.config, args.preset, args.overrides,
                                    seed=args.seed, runs=args.runs, out=args.out)
    except PalmVeinError as e:
        print(f"❌ configuration error: {e}", file=sys.stderr)
        return 1

    if args.command in ('run', 'grid'):
        result = experiment_scheduler.execute(cfg, grid=args.command == 'grid')
        if result['success']:
            print_summary(result['report'])
            print(f"✅ Results written to {cfg.out}")
    elif args.command == 'synth':
        result = experiment_scheduler.generate_synthetic(cfg, cfg.out)
        if result['success']:
            print(f"✅ Wrote {result['images']} images of {result['classes']} classes to {result['root']}")
    elif args.command == 'features':
        result = experiment_scheduler.build_features(cfg, cfg.out)
        if result['success']:
            for path in result['files']:
                print(f"✅ Cached features at {path}")
    else:
        result = experiment_scheduler.preprocess_image(cfg, args.image, cfg.out)
        if result['success']:
            print(f"✅ Wrote stages {', '.join(result['stages'])} to {result['out']}")

    if not result['success']:
        print(f"❌ {result['error']}", file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
