"""Mean offspring matrix, its Perron root, and the stability verdict."""
import dataclasses
import enum
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from queuelab.checks import QueuelabError
from queuelab.config import default_config
from queuelab.model.spec import ModelSpec
from queuelab.utils.messages import (VERDICT_BOUNDARY, VERDICT_BOUNDARY_REDUCIBLE, VERDICT_STABLE, VERDICT_UNSTABLE,
                                     VERDICT_UNSTABLE_UNPROVEN)

logger = logging.getLogger(__name__)

SPECTRAL = default_config['spectral']
EPSILON = default_config['stability']['epsilon']


@dataclasses.dataclass(frozen=True, eq=False)
class OffspringMatrix:
    """M = G^-1 Lambda with its Perron root. Also exposes G = diag(mu) and H = G M G^-1."""

    m: np.ndarray
    rho: float
    irreducible: bool
    mu: np.ndarray

    class IllConditioned(QueuelabError):
        """Power iteration on an irreducible block did not settle."""

    @property
    def k(self) -> int:
        return self.m.shape[0]

    @property
    def g(self) -> np.ndarray:
        return np.diag(self.mu)

    @property
    def h(self) -> np.ndarray:
        return self.mu[:, None] * self.m / self.mu[None, :]

    @property
    def positive_rows(self) -> bool:
        """Every row of M has at least one strictly positive element."""
        return bool(np.all((self.m > 0).any(axis=1)))


def offspring_matrix(spec: ModelSpec) -> OffspringMatrix:
    means = spec.means
    m = spec.lam * means[:, None]
    m.setflags(write=False)
    return OffspringMatrix(m=m, rho=spectral_radius(m), irreducible=is_irreducible(m), mu=1.0 / means)


def strong_components(m) -> Tuple[int, np.ndarray]:
    """Strongly connected components of the graph {i -> j : M_ij > 0}, as (count, labels)."""
    return connected_components(np.asarray(m) > 0, directed=True, connection='strong')


def is_irreducible(m: np.ndarray) -> bool:
    count, _ = strong_components(m)
    return count == 1


def k2_radical(m: np.ndarray) -> float:
    """Closed-form Perron root of a 2 x 2 non-negative matrix."""
    a, b = m[0]
    c, d = m[1]
    return (a + d + math.sqrt(max((a - d) ** 2 + 4 * b * c, 0.0))) / 2


def _checked(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError('expected a square matrix')
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError('expected finite non-negative entries')
    return m


def _blocks(m: np.ndarray) -> List[np.ndarray]:
    count, labels = strong_components(m)
    return [np.flatnonzero(labels == label) for label in range(count)]


def _block_radius(block: np.ndarray, power: dict) -> float:
    size = block.shape[0]
    if size == 1:
        return float(block[0, 0])
    if size == 2:
        return k2_radical(block)
    rho, _ = _power_iteration(block, **power)
    return rho


def spectral_radius(m, *, shift: float = None, max_iterations: int = None, tolerance: float = None) -> float:
    """Perron root rho(M) of a non-negative matrix.

    rho(M) is the largest Perron root over the irreducible diagonal blocks of M (one per strongly
    connected component). Blocks of size 1 and 2 are closed form, larger ones use power iteration.
    """
    m = _checked(m)
    power = dict(shift=shift, max_iterations=max_iterations, tolerance=tolerance)
    return max(_block_radius(m[np.ix_(block, block)], power) for block in _blocks(m))


def _power_iteration(a, *, shift: float = None, max_iterations: int = None,
                     tolerance: float = None) -> Tuple[float, np.ndarray]:
    """Power iteration on A + shift*I for an irreducible A, from the uniform start vector.

    A + shift*I is primitive, so the iterate stays strictly positive and the Collatz-Wielandt
    quotients close in on the root geometrically.
    """
    shift = SPECTRAL['shift'] if shift is None else shift
    max_iterations = SPECTRAL['max_iterations'] if max_iterations is None else max_iterations
    tolerance = SPECTRAL['tolerance'] if tolerance is None else tolerance

    k = a.shape[0]
    shifted = a + shift * np.eye(k)
    x = np.full(k, 1.0 / k)

    for iteration in range(1, max_iterations + 1):
        y = shifted @ x
        ratios = y / x
        lower, upper = ratios.min(), ratios.max()
        x = y / y.sum()

        if upper - lower <= tolerance:
            logger.debug('Power iteration bracketed after %d iterations', iteration)
            return max(0.5 * (upper + lower) - shift, 0.0), x

    raise OffspringMatrix.IllConditioned(f'power iteration did not settle after {max_iterations} iterations')


def perron_vector(m, *, shift: float = None, max_iterations: int = None,
                  tolerance: float = None) -> Tuple[float, np.ndarray]:
    """rho(M) and a non-negative right eigenvector normalised to unit sum.

    The vector is supported on a basic block C (rho(M_CC) = rho) with no basic block upstream of
    it, and on the blocks A upstream of C, where (rho I - M_AA) x_A = M_AC x_C.
    """
    m = _checked(m)
    power = dict(shift=shift, max_iterations=max_iterations, tolerance=tolerance)
    blocks = _blocks(m)
    radii = [_block_radius(m[np.ix_(block, block)], power) for block in blocks]
    rho = max(radii)

    slack = SPECTRAL['tolerance'] * max(rho, 1.0)
    label = np.empty(m.shape[0], dtype=int)
    for index, block in enumerate(blocks):
        label[block] = index
    basic = {index for index, radius in enumerate(radii) if radius >= rho - slack}

    # upstream of C = nodes that reach C = nodes reachable from C along reversed edges
    reversed_edges = (m.T > 0).astype(float)
    for core_label in sorted(basic):
        core = blocks[core_label]
        reach = breadth_first_order(reversed_edges, int(core[0]), directed=True, return_predecessors=False)
        upstream = np.setdiff1d(reach, core)
        if not basic.intersection(label[upstream].tolist()):
            break

    if core.size == 1:
        x_core = np.ones(1)
    else:
        _, x_core = _power_iteration(m[np.ix_(core, core)], **power)

    x = np.zeros(m.shape[0])
    x[core] = x_core
    if upstream.size:
        x[upstream] = np.linalg.solve(rho * np.eye(upstream.size) - m[np.ix_(upstream, upstream)],
                                      m[np.ix_(upstream, core)] @ x_core)
    x = np.maximum(x, 0.0)
    return rho, x / x.sum()


def left_perron_vector(m) -> np.ndarray:
    """Non-negative w with w M = rho w, unit sum."""
    _, w = perron_vector(np.asarray(m, dtype=float).T)
    return w


@dataclasses.dataclass(frozen=True, eq=False)
class StabilityReport:
    rho: float
    verdict: 'StabilityReport.Verdict'
    epsilon: float
    drain_coefficients: Optional[np.ndarray]

    #: Needed for the instability witness: every row of M has a strictly positive element.
    positive_rows: bool

    #: Needed for the boundary (weak stability) result: M is irreducible.
    irreducible: bool

    class Verdict(enum.Enum):
        STABLE = 'Stable'
        BOUNDARY = 'Boundary'
        UNSTABLE = 'Unstable'

    class NumericalFailure(QueuelabError):
        """I - H could not be inverted although rho(M) < 1."""

    @property
    def explanation(self) -> str:
        if self.verdict is self.Verdict.STABLE:
            return VERDICT_STABLE
        if self.verdict is self.Verdict.BOUNDARY:
            return VERDICT_BOUNDARY if self.irreducible else VERDICT_BOUNDARY_REDUCIBLE
        return VERDICT_UNSTABLE if self.positive_rows else VERDICT_UNSTABLE_UNPROVEN

    @property
    def basis(self) -> str:
        """Which fluid-model result backs the verdict."""
        if self.verdict is self.Verdict.STABLE:
            return 'global-stability'
        if self.verdict is self.Verdict.BOUNDARY:
            return 'weak-stability' if self.irreducible else 'none (M reducible)'
        return 'weak-instability' if self.positive_rows else 'none (M has a zero row)'

    def to_dict(self) -> dict:
        return {
            'rho': self.rho,
            'verdict': self.verdict.value,
            'epsilon': self.epsilon,
            'drainCoefficients': None if self.drain_coefficients is None else self.drain_coefficients.tolist(),
            'positiveRows': self.positive_rows,
            'irreducible': self.irreducible,
            'basis': self.basis,
        }


def verdict_for(rho: float, epsilon: float) -> StabilityReport.Verdict:
    if rho < 1 - epsilon:
        return StabilityReport.Verdict.STABLE
    if rho > 1 + epsilon:
        return StabilityReport.Verdict.UNSTABLE
    return StabilityReport.Verdict.BOUNDARY


def drain_coefficients(offspring: OffspringMatrix) -> np.ndarray:
    """Row vector e^T (I - H^T)^-1 G^-1, i.e. ((I - H)^-1 e) / mu componentwise."""
    k = offspring.k
    try:
        potential = np.linalg.solve(np.eye(k) - offspring.h, np.ones(k))
    except np.linalg.LinAlgError as error:
        raise StabilityReport.NumericalFailure(f'I - H is singular: {error}') from None

    coefficients = potential / offspring.mu
    if not np.all(np.isfinite(coefficients)) or np.any(coefficients <= 0):
        raise StabilityReport.NumericalFailure(f'drain coefficients are not positive: {coefficients}')
    return coefficients


def classify(spec: ModelSpec, epsilon: float = None) -> StabilityReport:
    epsilon = EPSILON if epsilon is None else epsilon
    offspring = offspring_matrix(spec)
    verdict = verdict_for(offspring.rho, epsilon)

    coefficients = None
    if verdict is StabilityReport.Verdict.STABLE:
        coefficients = drain_coefficients(offspring)
        coefficients.setflags(write=False)

    report = StabilityReport(
        rho=offspring.rho,
        verdict=verdict,
        epsilon=epsilon,
        drain_coefficients=coefficients,
        positive_rows=offspring.positive_rows,
        irreducible=offspring.irreducible,
    )
    logger.debug('Classified %s: rho=%.12g verdict=%s', spec, report.rho, verdict.value)
    return report


def k2_stability_condition(spec: ModelSpec) -> Tuple[bool, float]:
    """The explicit two-class test: the radical in lambda/mu form is <= 1."""
    if spec.k != 2:
        raise ValueError('the explicit radical test is for K = 2')
    lam, mu = spec.lam, spec.mu
    a, d = lam[0, 0] / mu[0], lam[1, 1] / mu[1]
    radical = (a + d + math.sqrt((a - d) ** 2 + 4 * lam[0, 1] * lam[1, 0] / (mu[0] * mu[1]))) / 2
    return radical <= 1, radical
