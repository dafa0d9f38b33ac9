"""Exceptions shared across the analysis modules, and precondition checks.

The checks follow a predicate-factory shape: ``is_stable()`` builds a decorator
that inspects the model passed as the first argument of the wrapped operation.
"""
import functools
import logging

logger = logging.getLogger(__name__)


class QueuelabError(Exception):
    """Base class for every error raised by queuelab."""


class PreconditionError(QueuelabError):
    """An operation was called on a model outside the range it is defined for."""


class StabilityViolation(PreconditionError):
    """The operation needs rho(M) < 1 (or <= 1) and the model does not satisfy it."""

    def __init__(self, message, rho=None):
        super().__init__(message)
        self.rho = rho


class HypothesisNotSatisfied(PreconditionError):
    """A structural hypothesis of the operation (positive rows, rho > 1, ...) fails."""

    def __init__(self, condition: str):
        super().__init__(f'hypothesis not satisfied: {condition}')
        self.condition = condition


def _report(spec, epsilon):
    # imported here, the model package itself depends on this module
    from queuelab.model.offspring import classify
    return classify(spec, epsilon=epsilon)


def require_stable(spec, *, strict: bool = True, epsilon: float = None):
    """Raise :class:`StabilityViolation` unless rho(M) < 1 (``strict``) or rho(M) <= 1.

    Returns the :class:`StabilityReport` so callers can reuse it.
    """
    report = _report(spec, epsilon)

    if strict and report.verdict is not report.Verdict.STABLE:
        raise StabilityViolation(f'requires rho(M) < 1, got rho = {report.rho:.12g}', rho=report.rho)

    if not strict and report.verdict is report.Verdict.UNSTABLE:
        raise StabilityViolation(f'requires rho(M) <= 1, got rho = {report.rho:.12g}', rho=report.rho)

    return report


def is_stable(strict: bool = True):
    """Decorator form of :func:`require_stable` for operations taking the model first."""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(spec, *args, **kwargs):
            require_stable(spec, strict=strict)
            return func(spec, *args, **kwargs)
        return wrapper
    return decorator


def require(condition: bool, description: str):
    """Raise :class:`HypothesisNotSatisfied` naming ``description`` when ``condition`` is false."""
    if not condition:
        logger.debug('Hypothesis failed: %s', description)
        raise HypothesisNotSatisfied(description)
