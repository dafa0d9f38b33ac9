import dataclasses
import hashlib
import json
import logging
import math
from collections.abc import Mapping
from typing import List, Sequence, Tuple

import numpy as np
from yaml import safe_load as _safe_load

from queuelab.checks import QueuelabError
from queuelab.model.distributions import ServiceDistribution
from queuelab.utils.messages import (DIMENSION_MISMATCH, INFINITE_MEAN, NEGATIVE_RATE, NO_RESTART, NON_FINITE_RATE,
                                     NON_SQUARE_LAMBDA)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Violation:
    """One reason a model description is unusable."""

    code: str
    message: str

    #: True when the violation only matters for busy-period sampling (stability results still hold).
    sampling_only: bool = False

    def __str__(self):
        return self.message


@dataclasses.dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def blocking(self, *, sampling: bool) -> Tuple[Violation, ...]:
        """Violations that matter for an analysis; ``sampling`` analyses need a restartable system."""
        return tuple(v for v in self.violations if sampling or not v.sampling_only)

    def messages(self) -> List[str]:
        return [str(v) for v in self.violations]


@dataclasses.dataclass(frozen=True, eq=False)
class ModelSpec:
    """Complete queue description: Lambda, lambda_0 and one service law per class.

    ``lam[i, j]`` is the class-j arrival rate while a class-i job is in service,
    ``lam0[j]`` the class-j rate while the server idles. Classes are 0-indexed.
    """

    lam: np.ndarray
    lam0: np.ndarray
    service: Tuple[ServiceDistribution, ...]

    class Invalid(QueuelabError):
        """The model cannot be used; ``violations`` lists why."""

        def __init__(self, violations: Sequence[Violation]):
            self.violations = tuple(violations)
            super().__init__('; '.join(str(v) for v in self.violations) or 'invalid model')

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        lam0 = np.array(self.lam0, dtype=float)
        lam.setflags(write=False)
        lam0.setflags(write=False)
        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'lam0', lam0)
        object.__setattr__(self, 'service', tuple(self.service))

    def __repr__(self):
        return f'<ModelSpec k={self.k} lambda={self.lam.tolist()} lambda0={self.lam0.tolist()}>'

    @property
    def k(self) -> int:
        return len(self.service)

    @property
    def lambda_bar(self) -> np.ndarray:
        """Total arrival rate while each class is in service."""
        return self.lam.sum(axis=1)

    @property
    def means(self) -> np.ndarray:
        return np.array([dist.mean() for dist in self.service])

    @property
    def mu(self) -> np.ndarray:
        return 1.0 / self.means

    def psi(self, i: int, s):
        return self.service[i].lst(s)

    def scaled(self, kappa: float) -> 'ModelSpec':
        """The same model with every in-service rate multiplied by ``kappa``."""
        return ModelSpec(self.lam * kappa, self.lam0, self.service)

    def permuted(self, order: Sequence[int]) -> 'ModelSpec':
        """Relabel classes: new class ``n`` is old class ``order[n]``."""
        order = list(order)
        return ModelSpec(self.lam[np.ix_(order, order)], self.lam0[order], [self.service[i] for i in order])

    def with_lambda0(self, lam0) -> 'ModelSpec':
        return ModelSpec(self.lam, lam0, self.service)

    @classmethod
    def from_record(cls, record: Mapping) -> 'ModelSpec':
        """Parse a model record; raises :class:`ModelSpec.Invalid` for structural problems only."""
        violations = _structural_violations(record)
        if violations:
            raise cls.Invalid(violations)

        return cls(
            np.array(record['lambda'], dtype=float).reshape(len(record['service']), len(record['service'])),
            np.array(record['lambda0'], dtype=float),
            [ServiceDistribution.from_record(item) for item in record['service']],
        )

    def to_record(self) -> dict:
        return {
            'k': self.k,
            'lambda': self.lam.tolist(),
            'lambda0': self.lam0.tolist(),
            'service': [dist.to_record() for dist in self.service],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=2)


def read_record(path: str) -> Tuple[dict, str]:
    """Read a model file (JSON, or YAML with the same fields); returns the record and a SHA-256 of the bytes."""
    with open(path, 'rb') as model_file:
        raw = model_file.read()

    digest = hashlib.sha256(raw).hexdigest()
    record = _safe_load(raw)
    if not isinstance(record, dict):
        raise ModelSpec.Invalid([Violation('format', f'{path} does not contain a model record')])

    return record, digest


def load_spec(path: str) -> ModelSpec:
    record, _ = read_record(path)
    return ModelSpec.from_record(record)


def validate(spec) -> ValidationResult:
    """Check a :class:`ModelSpec` or a raw model record. Never raises."""
    if isinstance(spec, Mapping):
        violations = _structural_violations(spec)
        if violations:
            return ValidationResult(tuple(violations))
        spec = ModelSpec.from_record(spec)

    violations = _semantic_violations(spec)
    for violation in violations:
        logger.debug('Model violation [%s]: %s', violation.code, violation.message)

    return ValidationResult(tuple(violations))


def _structural_violations(record: Mapping) -> List[Violation]:
    violations = []

    missing = [field for field in ('lambda', 'lambda0', 'service') if field not in record]
    if missing:
        return [Violation('missing', f'model record is missing fields: {", ".join(missing)}')]

    service = record['service']
    if not isinstance(service, list) or not service:
        return [Violation('service', 'service must be a non-empty list of distribution records')]

    k = len(service)
    if 'k' in record and record['k'] != k:
        violations.append(Violation('dimension', DIMENSION_MISMATCH.format(what='service', got=k, k=record['k'])))

    rows = record['lambda']
    if not isinstance(rows, list) or any(not isinstance(row, list) for row in rows) \
            or any(len(row) != len(rows) for row in rows):
        violations.append(Violation('non_square', NON_SQUARE_LAMBDA))
    elif len(rows) != k:
        violations.append(Violation('dimension', DIMENSION_MISMATCH.format(what='lambda', got=len(rows), k=k)))

    lam0 = record['lambda0']
    if not isinstance(lam0, list) or len(lam0) != k:
        got = len(lam0) if isinstance(lam0, list) else 'a scalar'
        violations.append(Violation('dimension', DIMENSION_MISMATCH.format(what='lambda0', got=got, k=k)))

    for index, item in enumerate(service):
        try:
            ServiceDistribution.from_record(item)
        except ServiceDistribution.Invalid as error:
            violations.append(Violation('service', f'class {index + 1}: {error}'))

    if not violations:
        try:
            np.array(rows, dtype=float)
            np.array(lam0, dtype=float)
        except (TypeError, ValueError):
            violations.append(Violation('format', 'rates must be numbers'))

    return violations


def _semantic_violations(spec: ModelSpec) -> List[Violation]:
    violations = []

    for (i, j), value in np.ndenumerate(spec.lam):
        if not math.isfinite(value):
            violations.append(Violation('non_finite', NON_FINITE_RATE.format(name=f'lambda[{i + 1}][{j + 1}]')))
        elif value < 0:
            violations.append(Violation('negative_rate', NEGATIVE_RATE.format(name=f'lambda[{i + 1}][{j + 1}]',
                                                                              value=value)))

    for j, value in enumerate(spec.lam0):
        if not math.isfinite(value):
            violations.append(Violation('non_finite', NON_FINITE_RATE.format(name=f'lambda0[{j + 1}]')))
        elif value < 0:
            violations.append(Violation('negative_rate', NEGATIVE_RATE.format(name=f'lambda0[{j + 1}]', value=value)))

    for index, dist in enumerate(spec.service):
        for problem in dist.problems():
            code = 'infinite_mean' if problem == INFINITE_MEAN else 'service'
            violations.append(Violation(code, f'class {index + 1}: {problem}'))

    if np.all(np.nan_to_num(spec.lam0) <= 0):
        violations.append(Violation('no_restart', NO_RESTART, sampling_only=True))

    return violations
