# utils/validators.py
import logging
import math
import os
from decimal import Decimal, InvalidOperation
from typing import Dict, List

from models.run_config import RunConfig
from utils.config import Config
from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SHAPE_SPEC_PREFIXES = ('disk:', 'square:', 'rect:')

COMMAND_METHODS = {
    'compute': ('lp', 'graphcut', 'both'),
    'distance': ('lp', 'graphcut'),
    'sweep': ('lp', 'graphcut'),
    'selftest': ('lp', 'graphcut', 'both'),
}


def _decimal(text: str, what: str) -> Decimal:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise InvalidArgumentError(f"Invalid number for {what}: {text!r}") from None
    if not value.is_finite():
        raise InvalidArgumentError(f"{what} must be finite, got {text!r}")
    return value


def parse_lambda_list(text: str) -> List[float]:
    """Parse ``start:stop:step`` (stop included when hit exactly) or ``a,b,c``"""
    if text is None or not text.strip():
        raise InvalidArgumentError("lambda list is empty")
    text = text.strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise InvalidArgumentError(f"Range must look like start:stop:step, got {text!r}")
        start, stop, step = (_decimal(p, name) for p, name in zip(parts, ('start', 'stop', 'step')))
        if step <= 0:
            raise InvalidArgumentError(f"Range step must be positive, got {step}")
        if stop < start:
            raise InvalidArgumentError(f"Range stop {stop} is below start {start}")
        count = int((stop - start) / step) + 1
        values = [start + k * step for k in range(count)]
    else:
        values = [_decimal(p, 'lambda') for p in text.split(',') if p.strip()]
    if not values:
        raise InvalidArgumentError("lambda list is empty")
    return [float(v) for v in values]


def is_shape_spec(text: str) -> bool:
    return bool(text) and text.startswith(SHAPE_SPEC_PREFIXES)


def is_chain_json(path: str) -> bool:
    return bool(path) and path.lower().endswith('.json')


class ValidationService:
    """Checks a RunConfig as a whole and reports every problem at once"""

    def validate_run_config(self, cfg: RunConfig) -> Dict:
        errors = []
        warnings = []

        if cfg.command not in COMMAND_METHODS:
            errors.append(f"Unknown command {cfg.command!r}")
            return {'valid': False, 'errors': errors, 'warnings': warnings}

        errors.extend(self._check_inputs(cfg))

        if cfg.command in ('compute', 'distance'):
            if cfg.lam is None:
                errors.append("--lambda is required")
            elif not (cfg.lam > 0 and math.isfinite(cfg.lam)):
                errors.append(f"--lambda must be positive and finite, got {cfg.lam}")

        if cfg.command == 'sweep':
            if cfg.lambdas_text is None:
                errors.append("--lambdas is required")
            else:
                try:
                    cfg.lambdas = parse_lambda_list(cfg.lambdas_text)
                except InvalidArgumentError as e:
                    errors.append(str(e))
                else:
                    if any(not (lam > 0) for lam in cfg.lambdas):
                        errors.append("--lambdas values must be positive")
                    if any(b <= a for a, b in zip(cfg.lambdas, cfg.lambdas[1:])):
                        errors.append("--lambdas must be strictly increasing")

        allowed = COMMAND_METHODS[cfg.command]
        if cfg.method not in allowed:
            errors.append(f"--method must be one of {', '.join(allowed)} for {cfg.command}")
        if cfg.stencil not in Config.SUPPORTED_STENCILS:
            errors.append(f"--stencil must be one of {', '.join(Config.SUPPORTED_STENCILS)}")
        if cfg.topology not in Config.SUPPORTED_TOPOLOGIES:
            errors.append(f"--topology must be one of {', '.join(Config.SUPPORTED_TOPOLOGIES)}")
        elif cfg.topology != 'cubical' and cfg.method in ('graphcut', 'both') and cfg.command != 'selftest':
            errors.append(f"--method {cfg.method} works on pixel grids only; use --topology cubical")

        if not (cfg.spacing > 0 and math.isfinite(cfg.spacing)):
            errors.append(f"--spacing must be positive, got {cfg.spacing}")
        if not 0 <= cfg.threshold <= 255:
            errors.append(f"--threshold must lie in 0..255, got {cfg.threshold}")
        if not (cfg.resolution > 0 and math.isfinite(cfg.resolution)):
            errors.append(f"--resolution must be positive, got {cfg.resolution}")
        if cfg.threads < 1:
            errors.append(f"--threads must be at least 1, got {cfg.threads}")

        if cfg.csv and cfg.command != 'sweep':
            errors.append("--csv is only available for sweep")
        if cfg.svg and cfg.command in ('sweep', 'selftest'):
            errors.append(f"--svg is not available for {cfg.command}")
        stdout_targets = [p for p in (cfg.out, cfg.svg, cfg.csv) if p == '-']
        if len(stdout_targets) > 1:
            errors.append("Only one output may go to stdout ('-')")

        if cfg.seed != 0 and cfg.command != 'selftest':
            warnings.append("--seed only affects selftest")

        return {
            'valid': len(errors) == 0,
            'errors': errors,
            'warnings': warnings
        }

    def _check_inputs(self, cfg: RunConfig) -> List[str]:
        errors = []
        expected = {'compute': 1, 'sweep': 1, 'distance': 2, 'selftest': 0}[cfg.command]
        if len(cfg.inputs) != expected:
            errors.append(f"{cfg.command} takes {expected} input(s), got {len(cfg.inputs)}")
            return errors

        for path in cfg.inputs:
            if is_shape_spec(path):
                continue
            if not os.path.isfile(path):
                errors.append(f"Input file not found: {path}")
            if is_chain_json(path):
                if cfg.command == 'distance':
                    errors.append(f"distance needs two shapes, got chain file {path}")
                elif cfg.method != 'lp':
                    errors.append(f"Chain input {path} works with --method lp only")
        return errors
