import os
from dataclasses import dataclass
from typing import Dict


@dataclass
class Config:
    """Configuration class for the flat norm toolkit"""

    # Parallelism
    THREADS = int(os.getenv('FLATNORM_THREADS', 1))

    # Logging Configuration
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', '')
    LOG_MAX_BYTES = int(os.getenv('LOG_MAX_BYTES', 10 * 1024 * 1024))  # 10MB
    LOG_BACKUP_COUNT = int(os.getenv('LOG_BACKUP_COUNT', 5))

    # LP Solver Configuration
    SIMPLEX_MAX_ITERATIONS = int(os.getenv('SIMPLEX_MAX_ITERATIONS', 200000))
    SIMPLEX_TOLERANCE = float(os.getenv('SIMPLEX_TOLERANCE', 1e-9))
    INTEGRALITY_TOLERANCE = float(os.getenv('INTEGRALITY_TOLERANCE', 1e-7))
    # Grid cells (width x height); larger shape inputs go to the N4 cut
    LP_MAX_CELLS = int(os.getenv('LP_MAX_CELLS', 32 * 32))

    # Exhaustive oracle
    ORACLE_COEFF_RANGE = int(os.getenv('ORACLE_COEFF_RANGE', 1))
    ORACLE_MAX_FACES = int(os.getenv('ORACLE_MAX_FACES', 20))

    # Graph cut Configuration
    DEFAULT_STENCIL = os.getenv('DEFAULT_STENCIL', 'N16')
    FLOW_CAPACITY_SCALE = int(os.getenv('FLOW_CAPACITY_SCALE', 2 ** 30))

    # Shape ingestion
    PGM_THRESHOLD = int(os.getenv('PGM_THRESHOLD', 128))
    DEFAULT_RESOLUTION = float(os.getenv('DEFAULT_RESOLUTION', 64))

    # Rendering
    SVG_CELL_SIZE = float(os.getenv('SVG_CELL_SIZE', 8.0))

    SUPPORTED_STENCILS = ['N4', 'N8', 'N16']
    SUPPORTED_METHODS = ['lp', 'graphcut', 'both']
    SUPPORTED_TOPOLOGIES = ['cubical', 'right-triangulated']

    @classmethod
    def validate_config(cls) -> Dict:
        """Validate configuration values"""
        required_configs = []
        warnings = []

        if cls.THREADS < 1:
            required_configs.append('FLATNORM_THREADS must be at least 1')

        if cls.SIMPLEX_MAX_ITERATIONS < 1:
            required_configs.append('SIMPLEX_MAX_ITERATIONS must be positive')

        if cls.LP_MAX_CELLS < 1:
            required_configs.append('LP_MAX_CELLS must be positive')

        if not 0 <= cls.PGM_THRESHOLD <= 255:
            required_configs.append('PGM_THRESHOLD must lie in [0, 255]')

        if cls.DEFAULT_STENCIL not in cls.SUPPORTED_STENCILS:
            required_configs.append(f'DEFAULT_STENCIL must be one of {", ".join(cls.SUPPORTED_STENCILS)}')

        if not 0 < cls.FLOW_CAPACITY_SCALE < 2 ** 31:
            required_configs.append('FLOW_CAPACITY_SCALE must fit a signed 32-bit integer')

        if cls.ORACLE_MAX_FACES > 20:
            warnings.append('ORACLE_MAX_FACES above 20 makes exhaustive enumeration very slow')

        if cls.INTEGRALITY_TOLERANCE > 1e-4:
            warnings.append('INTEGRALITY_TOLERANCE is loose; non-integral optima may be rounded')

        return {
            'valid': len(required_configs) == 0,
            'required': required_configs,
            'warnings': warnings
        }


# Development Configuration
class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = 'DEBUG'


# Testing Configuration
class TestingConfig(Config):
    """Testing configuration"""
    THREADS = 1
    LOG_FILE = ''


# Production Configuration
class ProductionConfig(Config):
    """Production configuration"""
    LOG_LEVEL = 'WARNING'


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}


def get_config(name: str = None):
    """Pick the configuration profile named by FLATNORM_ENV"""
    return config.get(name or os.getenv('FLATNORM_ENV', 'default'), Config)
