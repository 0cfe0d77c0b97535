"""
Run configuration for the command line
"""

import logging
from dataclasses import asdict, dataclass

from errors import ConfigurationError
from input_validation import validate_run_config
from parallel import default_jobs

logger = logging.getLogger(__name__)

DEFAULTS = {
    'dim': 3,
    'rho': 'symbolic',
    'order_cap': 3,
    'heavy': False,
    'output_format': 'text',
    'log_level': 'WARNING',
}


@dataclass
class RunConfig:
    command: str = None
    dim: int = DEFAULTS['dim']
    rho: str = DEFAULTS['rho']
    order_cap: int = DEFAULTS['order_cap']
    heavy: bool = DEFAULTS['heavy']
    jobs: int = None
    output_format: str = DEFAULTS['output_format']
    log_level: str = DEFAULTS['log_level']
    pdf: str = None
    json_out: str = None

    def __post_init__(self):
        if self.jobs is None:
            self.jobs = default_jobs()

    @property
    def casimirs(self):
        return self.dim - 2

    @property
    def unit_density(self):
        return self.rho == 'unit'

    @classmethod
    def from_args(cls, args):
        """Build from an argparse namespace; absent options fall back to DEFAULTS"""
        values = {}
        for name in cls.__dataclass_fields__:
            value = getattr(args, name, None)
            if value is not None:
                values[name] = value
        return cls(**values)

    def validate(self):
        """Raise ConfigurationError on errors, log warnings"""
        errors, warnings = validate_run_config(self)
        for warning in warnings:
            logger.warning(warning)
        if errors:
            raise ConfigurationError("; ".join(errors))
        return self

    def as_dict(self):
        return asdict(self)
