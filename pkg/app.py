#!/usr/bin/env python3
"""
Multiscale flat norm toolkit - command line application

Subcommands:
    compute   flat norm of one shape boundary or 1-chain
    distance  flat distance between two shapes
    sweep     flat norm over a list of lambdas
    selftest  seeded invariant suites with a pass/fail table

Inputs are PGM rasters (P2/P5), chain JSON files (``*.json``, LP only), or
analytic shape specs ``disk:R[,cx,cy]``, ``square:a`` and ``rect:x0,y0,x1,y1``
rasterized at ``--resolution`` pixels per unit length.

Lambda lists (``--lambdas``) are either ``start:stop:step`` with the stop
value included when the steps hit it exactly, or comma lists ``a,b,c``.

Exit codes: 0 success, 2 invalid arguments or input files, 3 solver resource
limit hit, 1 any other failure.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from models.results import FlatNormResult
from models.run_config import RunConfig
from models.shapes import BinaryShape
from services.analysis import agreement, flat_distance, lambda_sweep, shape_flatnorm_lp
from services.flatnorm_graphcut import flatnorm_graphcut
from services.flatnorm_lp import flatnorm_lp
from services.selftest import format_report, run_selftest
from services.shape_io import (load_chain_json, load_pgm, parse_shape_spec, render_json, render_svg,
                               sweep_to_csv, sweep_to_json)
from utils.config import Config
from utils.errors import FlatNormError, InvalidArgumentError, ParseError, SolverResourceError
from utils.fileio import atomic_write, atomic_write_all
from utils.logger import setup_logging
from utils.validators import ValidationService, is_chain_json, is_shape_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_RESOURCE = 3


class FlatNormApp:
    def __init__(self):
        self.validator = ValidationService()
        self.parser = self.setup_commands()
        self.handlers = {
            'compute': self.cmd_compute,
            'distance': self.cmd_distance,
            'sweep': self.cmd_sweep,
            'selftest': self.cmd_selftest,
        }
        self.error_codes = self.setup_error_handlers()

    def setup_commands(self) -> argparse.ArgumentParser:
        """Setup all subcommands and their flags"""
        parser = argparse.ArgumentParser(
            prog='flatnorm',
            description=__doc__.split('\n\n')[0].strip(),
            epilog=__doc__.split('\n\n', 1)[1],
            formatter_class=argparse.RawDescriptionHelpFormatter)
        subparsers = parser.add_subparsers(dest='command', required=True)

        def common(sub, method_default='lp'):
            sub.add_argument('--method', default=method_default, help='lp, graphcut or both (compute only)')
            sub.add_argument('--stencil', default=Config.DEFAULT_STENCIL, help='N4, N8 or N16 (graph cut)')
            sub.add_argument('--topology', default='cubical', help='cubical or right-triangulated (LP)')
            sub.add_argument('--spacing', type=float, default=1.0, help='physical pixel size of PGM inputs')
            sub.add_argument('--threshold', type=int, default=Config.PGM_THRESHOLD,
                             help='PGM pixels >= threshold are foreground')
            sub.add_argument('--resolution', type=float, default=Config.DEFAULT_RESOLUTION,
                             help='pixels per unit length for shape specs')
            sub.add_argument('--out', default=None, help="JSON output path, '-' for stdout")
            sub.add_argument('--threads', type=int, default=Config.THREADS)
            sub.add_argument('--seed', type=int, default=0)
            sub.add_argument('--quiet', action='store_true', help='only warnings and errors on stderr')
            sub.add_argument('--log-level', default=Config.LOG_LEVEL)

        compute = subparsers.add_parser('compute', help='flat norm of one input')
        compute.add_argument('--input', required=True)
        compute.add_argument('--lambda', dest='lam', type=float)
        compute.add_argument('--svg', default=None, help='decomposition drawing')
        common(compute)

        distance = subparsers.add_parser('distance', help='flat distance between two shapes')
        distance.add_argument('inputs', nargs='*', metavar='SHAPE')
        distance.add_argument('--lambda', dest='lam', type=float)
        distance.add_argument('--svg', default=None)
        common(distance)

        sweep = subparsers.add_parser('sweep', help='flat norm over a lambda list')
        sweep.add_argument('--input', required=True)
        sweep.add_argument('--lambdas', dest='lambdas_text')
        sweep.add_argument('--csv', default=None, help='lambda,value,method,stencil table')
        common(sweep)

        selftest = subparsers.add_parser('selftest', help='run the invariant suites')
        common(selftest)
        return parser

    def setup_error_handlers(self) -> Dict[type, int]:
        """Exception type -> exit code, most specific first"""
        return {
            InvalidArgumentError: EXIT_INVALID,
            ParseError: EXIT_INVALID,
            SolverResourceError: EXIT_RESOURCE,
            FlatNormError: EXIT_FAILURE,
            OSError: EXIT_FAILURE,
        }

    def build_run_config(self, args: argparse.Namespace) -> RunConfig:
        inputs = getattr(args, 'inputs', None)
        if inputs is None:
            inputs = [args.input] if getattr(args, 'input', None) else []
        return RunConfig(
            command=args.command,
            inputs=list(inputs),
            lam=getattr(args, 'lam', None),
            lambdas_text=getattr(args, 'lambdas_text', None),
            method=args.method,
            stencil=str(args.stencil).upper(),
            topology=args.topology,
            spacing=args.spacing,
            threshold=args.threshold,
            resolution=args.resolution,
            out=args.out,
            svg=getattr(args, 'svg', None),
            csv=getattr(args, 'csv', None),
            seed=args.seed,
            threads=args.threads,
            quiet=args.quiet,
            log_level=args.log_level,
        )

    def load_shape(self, source: str, cfg: RunConfig) -> BinaryShape:
        if is_shape_spec(source):
            return parse_shape_spec(source, cfg.resolution)
        return load_pgm(source, spacing=cfg.spacing, threshold=cfg.threshold)

    # ------------------------------------------------------------ commands

    def cmd_compute(self, cfg: RunConfig) -> int:
        source = cfg.input
        extra = None
        if is_chain_json(source):
            chain = load_chain_json(source)
            logger.info(f"Computing LP flat norm of {source} ({len(chain)} cells), lambda={cfg.lam:g}")
            result = flatnorm_lp(chain.complex, chain, cfg.lam)
        else:
            shape = self.load_shape(source, cfg)
            logger.info(f"Computing {cfg.method} flat norm of {source} "
                        f"({shape.width}x{shape.height}, {shape.pixel_count} pixels), lambda={cfg.lam:g}")
            if cfg.method == 'graphcut':
                result = flatnorm_graphcut(shape, cfg.lam, cfg.stencil)
            else:
                result = shape_flatnorm_lp(shape, cfg.lam, cfg.topology)
                if cfg.method == 'both':
                    report = agreement(result, flatnorm_graphcut(shape, cfg.lam, cfg.stencil))
                    extra = {'agreement': report.to_dict()}
                    if not report.agree:
                        logger.warning(f"LP and graph cut differ by {report.delta:.3g} "
                                       f"(tolerance {report.tolerance:.3g})")

        logger.info(f"F_lambda = {result.value:.12g} ({result.method})")
        self.write_result(result, cfg, extra)
        return EXIT_OK

    def cmd_distance(self, cfg: RunConfig) -> int:
        a, b = (self.load_shape(source, cfg) for source in cfg.inputs)
        result = flat_distance(a, b, cfg.lam, method=cfg.method, stencil=cfg.stencil, topology=cfg.topology)
        logger.info(f"Flat distance = {result.value:.12g} ({result.method})")
        self.write_result(result, cfg)
        return EXIT_OK

    def write_result(self, result: FlatNormResult, cfg: RunConfig, extra: Optional[Dict] = None):
        """JSON and optional SVG, rendered up front and written together"""
        outputs = [(cfg.out or '-', render_json(result, extra))]
        if cfg.svg:
            outputs.append((cfg.svg, render_svg(result)))
        atomic_write_all(outputs)

    def cmd_sweep(self, cfg: RunConfig) -> int:
        source = cfg.input
        item = load_chain_json(source) if is_chain_json(source) else self.load_shape(source, cfg)
        curve = lambda_sweep(item, cfg.lambdas, method=cfg.method, stencil=cfg.stencil,
                             topology=cfg.topology, threads=cfg.threads)
        kink = curve.kink_location()
        logger.info(f"Swept {len(curve.lambdas)} lambdas; largest slope drop at "
                    f"{'n/a' if kink is None else f'{kink:.6g}'}")
        outputs = []
        if cfg.csv:
            outputs.append((cfg.csv, sweep_to_csv(curve)))
        if cfg.out:
            outputs.append((cfg.out, sweep_to_json(curve)))
        atomic_write_all(outputs or [('-', sweep_to_csv(curve))])
        return EXIT_OK

    def cmd_selftest(self, cfg: RunConfig) -> int:
        results = run_selftest(cfg.seed)
        atomic_write(cfg.out or '-', format_report(results, cfg.seed))
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE

    # ------------------------------------------------------------ driver

    def exit_code_for(self, error: BaseException) -> int:
        for error_type, code in self.error_codes.items():
            if isinstance(error, error_type):
                return code
        return EXIT_FAILURE

    def run(self, argv: Optional[List[str]] = None) -> int:
        args = self.parser.parse_args(argv)
        cfg = self.build_run_config(args)
        setup_logging(cfg.log_level, Config.LOG_FILE, cfg.quiet, Config.LOG_MAX_BYTES, Config.LOG_BACKUP_COUNT)

        validation = self.validator.validate_run_config(cfg)
        for warning in validation['warnings']:
            logger.warning(warning)
        if not validation['valid']:
            sys.stderr.write("flatnorm: invalid arguments: " + "; ".join(validation['errors']) + "\n")
            return EXIT_INVALID

        try:
            return self.handlers[cfg.command](cfg)
        except Exception as e:
            code = self.exit_code_for(e)
            if code == EXIT_FAILURE and not isinstance(e, (FlatNormError, OSError)):
                logger.exception(f"Unexpected error in {cfg.command}")
            sys.stderr.write(f"flatnorm: {e}\n")
            return code


def create_app() -> FlatNormApp:
    """Create application instance"""
    return FlatNormApp()


def main(argv: Optional[List[str]] = None) -> int:
    return create_app().run(argv)


if __name__ == '__main__':
    sys.exit(main())
