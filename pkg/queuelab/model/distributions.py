import enum
import logging
import math
from typing import Dict, List

import numpy as np
from scipy import stats

from queuelab.checks import QueuelabError
from queuelab.config import default_config
from queuelab.utils.messages import INFINITE_MEAN

logger = logging.getLogger(__name__)

QUADRATURE = default_config['quadrature']


class ServiceDistribution:
    """Service time law F_i of one class.

    Parameter names per kind:

    - exponential: ``rate``
    - deterministic: ``mean``
    - erlang: ``shape`` (integer), ``rate``
    - pareto: ``shape`` (alpha), ``scale`` (x_m)
    - lognormal: ``location``, ``scale``
    - weibull: ``shape``, ``scale``
    """

    class Invalid(QueuelabError):
        """The distribution record cannot be turned into a distribution at all."""

    class Kind(enum.Enum):
        EXPONENTIAL = 'exponential'
        DETERMINISTIC = 'deterministic'
        ERLANG = 'erlang'
        PARETO = 'pareto'
        LOGNORMAL = 'lognormal'
        WEIBULL = 'weibull'

        @property
        def parameters(self):
            return _PARAMETERS[self]

    def __init__(self, kind, **params):
        self.kind = kind if isinstance(kind, self.Kind) else self.Kind(kind)
        missing = set(self.kind.parameters) - set(params)
        extra = set(params) - set(self.kind.parameters)
        if missing or extra:
            raise self.Invalid(
                f'{self.kind.value} takes parameters {list(self.kind.parameters)}, got {sorted(params)}'
            )
        self.params: Dict[str, float] = {name: float(params[name]) for name in self.kind.parameters}
        self._frozen = None

    def __repr__(self):
        params = ' '.join(f'{name}={value:g}' for name, value in self.params.items())
        return f'<ServiceDistribution {self.kind.value} {params}>'

    def __eq__(self, other):
        return isinstance(other, ServiceDistribution) and self.kind is other.kind and self.params == other.params

    def __hash__(self):
        return hash((self.kind, tuple(self.params.items())))

    def __getattr__(self, name):
        # parameters by attribute, e.g. dist.rate
        params = self.__dict__.get('params', {})
        try:
            return params[name]
        except KeyError:
            raise AttributeError(name)

    @classmethod
    def exponential(cls, rate):
        return cls(cls.Kind.EXPONENTIAL, rate=rate)

    @classmethod
    def deterministic(cls, mean):
        return cls(cls.Kind.DETERMINISTIC, mean=mean)

    @classmethod
    def erlang(cls, shape, rate):
        return cls(cls.Kind.ERLANG, shape=shape, rate=rate)

    @classmethod
    def pareto(cls, shape, scale):
        return cls(cls.Kind.PARETO, shape=shape, scale=scale)

    @classmethod
    def lognormal(cls, location, scale):
        return cls(cls.Kind.LOGNORMAL, location=location, scale=scale)

    @classmethod
    def weibull(cls, shape, scale):
        return cls(cls.Kind.WEIBULL, shape=shape, scale=scale)

    @classmethod
    def from_record(cls, record: dict) -> 'ServiceDistribution':
        """Build from a tagged record such as ``{"kind": "exponential", "rate": 2.0}``."""
        if not isinstance(record, dict) or 'kind' not in record:
            raise cls.Invalid(f'service record needs a "kind" field: {record!r}')

        params = {key: value for key, value in record.items() if key != 'kind'}
        try:
            kind = cls.Kind(str(record['kind']).lower())
        except ValueError:
            raise cls.Invalid(f'unknown service distribution kind {record["kind"]!r}') from None

        try:
            return cls(kind, **params)
        except (TypeError, ValueError) as error:
            raise cls.Invalid(f'bad {kind.value} parameters: {error}') from None

    def to_record(self) -> dict:
        return {'kind': self.kind.value, **self.params}

    def problems(self) -> List[str]:
        """Return human readable reasons this parameterisation is unusable, empty when fine."""
        problems = []
        for name, value in self.params.items():
            if not math.isfinite(value):
                problems.append(f'{self.kind.value} {name} must be finite')

        if problems:
            return problems

        kind = self.kind
        if kind is self.Kind.EXPONENTIAL and self.rate <= 0:
            problems.append('exponential rate must be > 0')
        elif kind is self.Kind.DETERMINISTIC and self.params['mean'] <= 0:
            problems.append('deterministic mean must be > 0')
        elif kind is self.Kind.ERLANG:
            if self.shape < 1 or self.shape != int(self.shape):
                problems.append('erlang shape must be an integer >= 1')
            if self.rate <= 0:
                problems.append('erlang rate must be > 0')
        elif kind is self.Kind.PARETO:
            if self.scale <= 0:
                problems.append('pareto scale must be > 0')
            if self.shape <= 0:
                problems.append('pareto shape must be > 0')
            elif self.shape <= 1:
                problems.append(INFINITE_MEAN)
        elif kind is self.Kind.LOGNORMAL and self.scale <= 0:
            problems.append('lognormal scale must be > 0')
        elif kind is self.Kind.WEIBULL and (self.shape <= 0 or self.scale <= 0):
            problems.append('weibull shape and scale must be > 0')

        return problems

    @property
    def frozen(self):
        """The matching frozen :mod:`scipy.stats` distribution (None for deterministic)."""
        if self._frozen is None and self.kind is not self.Kind.DETERMINISTIC:
            self._frozen = _freeze(self)
        return self._frozen

    @property
    def is_pareto(self) -> bool:
        return self.kind is self.Kind.PARETO

    @property
    def is_subexponential(self) -> bool:
        """Pareto, lognormal and Weibull with shape < 1 have subexponential tails."""
        if self.kind in (self.Kind.PARETO, self.Kind.LOGNORMAL):
            return True
        return self.kind is self.Kind.WEIBULL and self.shape < 1

    def mean(self) -> float:
        kind = self.kind
        if kind is self.Kind.EXPONENTIAL:
            return 1.0 / self.rate
        if kind is self.Kind.DETERMINISTIC:
            return self.params['mean']
        if kind is self.Kind.ERLANG:
            return self.shape / self.rate
        if kind is self.Kind.PARETO:
            if self.shape <= 1:
                return math.inf
            return self.shape * self.scale / (self.shape - 1)
        if kind is self.Kind.LOGNORMAL:
            return math.exp(self.location + self.scale ** 2 / 2)
        return self.scale * math.gamma(1 + 1 / self.shape)

    @property
    def mu(self) -> float:
        """Service rate mu = 1 / mean."""
        return 1.0 / self.mean()

    def sample(self, rng: np.random.Generator, size=None):
        """Draw service times with numpy's native samplers."""
        kind = self.kind
        if kind is self.Kind.EXPONENTIAL:
            return rng.exponential(1.0 / self.rate, size)
        if kind is self.Kind.DETERMINISTIC:
            return self.params['mean'] if size is None else np.full(size, self.params['mean'])
        if kind is self.Kind.ERLANG:
            return rng.gamma(self.shape, 1.0 / self.rate, size)
        if kind is self.Kind.PARETO:
            # numpy draws the Lomax (Pareto II) law, shifting by one gives the classical Pareto
            return self.scale * (1.0 + rng.pareto(self.shape, size))
        if kind is self.Kind.LOGNORMAL:
            return rng.lognormal(self.location, self.scale, size)
        return self.scale * rng.weibull(self.shape, size)

    def sf(self, x):
        """Tail probability P(S > x)."""
        if self.kind is self.Kind.DETERMINISTIC:
            return np.where(np.asarray(x, dtype=float) < self.params['mean'], 1.0, 0.0)
        return self.frozen.sf(x)

    def lst(self, s):
        """Laplace-Stieltjes transform psi(s) = E[exp(-s S)], vectorised over ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        kind = self.kind
        if kind is self.Kind.EXPONENTIAL:
            return self.rate / (self.rate + s)
        if kind is self.Kind.DETERMINISTIC:
            return np.exp(-self.params['mean'] * s)
        if kind is self.Kind.ERLANG:
            return (self.rate / (self.rate + s)) ** self.shape
        return _vectorised_quad_lst(self, s)

    def _quad_lst(self, s: float) -> float:
        if s == 0:
            return 1.0
        value = self.frozen.expect(
            lambda x: math.exp(-s * x),
            epsabs=QUADRATURE['epsabs'],
            epsrel=QUADRATURE['epsrel'],
            limit=QUADRATURE['limit'],
        )
        return min(max(value, 0.0), 1.0)


_PARAMETERS = {
    ServiceDistribution.Kind.EXPONENTIAL: ('rate',),
    ServiceDistribution.Kind.DETERMINISTIC: ('mean',),
    ServiceDistribution.Kind.ERLANG: ('shape', 'rate'),
    ServiceDistribution.Kind.PARETO: ('shape', 'scale'),
    ServiceDistribution.Kind.LOGNORMAL: ('location', 'scale'),
    ServiceDistribution.Kind.WEIBULL: ('shape', 'scale'),
}


def _freeze(dist: ServiceDistribution):
    kind = dist.kind
    if kind is ServiceDistribution.Kind.EXPONENTIAL:
        return stats.expon(scale=1.0 / dist.rate)
    if kind is ServiceDistribution.Kind.ERLANG:
        return stats.gamma(a=dist.shape, scale=1.0 / dist.rate)
    if kind is ServiceDistribution.Kind.PARETO:
        return stats.pareto(b=dist.shape, scale=dist.scale)
    if kind is ServiceDistribution.Kind.LOGNORMAL:
        return stats.lognorm(s=dist.scale, scale=math.exp(dist.location))
    return stats.weibull_min(c=dist.shape, scale=dist.scale)


def _vectorised_quad_lst(dist: ServiceDistribution, s: np.ndarray):
    flat = [dist._quad_lst(float(value)) for value in s.ravel()]
    result = np.array(flat, dtype=float).reshape(s.shape)
    return result if result.ndim else float(result)
