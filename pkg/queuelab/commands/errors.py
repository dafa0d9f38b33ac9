import logging
import sys
import traceback
from hashlib import sha256
from os import urandom

from queuelab.checks import PreconditionError
from queuelab.cli import EXIT_NUMERICAL, EXIT_VALIDATION
from queuelab.fluid import FluidTrajectory
from queuelab.lst import LstGrid
from queuelab.model.offspring import OffspringMatrix, StabilityReport
from queuelab.model.spec import ModelSpec
from queuelab.sim.engine import SimConfig, Simulator
from queuelab.utils.messages import INTERNAL_ERROR_MSG

logger = logging.getLogger(__name__)

VALIDATION_ERRORS = (
    ModelSpec.Invalid,
    SimConfig.Invalid,
)

NUMERICAL_ERRORS = (
    LstGrid.NonConvergence,
    OffspringMatrix.IllConditioned,
    StabilityReport.NumericalFailure,
    FluidTrajectory.PolicyLivelock,
    Simulator.AuditFailure,
    PreconditionError,
)


def get_trace(error: Exception, limit: int = 15) -> str:
    return ''.join(traceback.format_exception(type(error), error, error.__traceback__, limit=limit))


def handle(app, error: BaseException) -> int:
    if isinstance(error, ModelSpec.Invalid):
        sys.stderr.write('invalid model:\n' + ''.join(f'  - {v}\n' for v in error.violations))
        return EXIT_VALIDATION

    if isinstance(error, VALIDATION_ERRORS + (OSError, ValueError)):
        sys.stderr.write(f'error: {error}\n')
        return EXIT_VALIDATION

    if isinstance(error, NUMERICAL_ERRORS):
        logger.error('%s: %s', type(error).__qualname__, error)
        sys.stderr.write(f'numerical failure: {error}\n')
        return EXIT_NUMERICAL

    # the ray delimits the full trace in the log, for example:
    #  grep -Pzo '\[84f8c783e9df718d\](.|\n)*\[\/84f8c783e9df718d\]' queuelab.log
    ray = sha256(urandom(32)).hexdigest()[-16:]
    logger.error(f'Internal error [{ray}]: {get_trace(error)} \n[/{ray}]')
    sys.stderr.write(INTERNAL_ERROR_MSG.format(ray=ray) + '\n')
    return EXIT_NUMERICAL


def setup(app):
    app.error_handler = handle
