"""Busy periods as multitype Galton-Watson trees.

An individual of class ``i`` lives for one class-i service time ``S`` and leaves
``Poisson(lambda_ij S)`` children of class ``j``. The busy period started by a class-i
customer is the total lifetime of the tree rooted at class ``i``.
"""
import dataclasses
import logging
import math
from typing import Callable, List, Optional

import numpy as np

from queuelab import rng as rngs
from queuelab.checks import is_stable, require, require_stable
from queuelab.config import default_config
from queuelab.model.offspring import StabilityReport, classify, offspring_matrix
from queuelab.model.spec import ModelSpec

logger = logging.getLogger(__name__)

BRANCHING = default_config['branching']


def _caps(cap_generations, cap_individuals):
    return (int(BRANCHING['cap_generations'] if cap_generations is None else cap_generations),
            int(BRANCHING['cap_individuals'] if cap_individuals is None else cap_individuals))


def _generator(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else rngs.stream(seed)


@dataclasses.dataclass(frozen=True, eq=False)
class GwTreeSample:
    ancestor_class: int
    generations: List[np.ndarray]
    total_lifetime: float
    service_by_class: np.ndarray
    extinct: bool

    @property
    def depth(self) -> Optional[int]:
        """Index of the last non-empty generation, None for censored trees."""
        return len(self.generations) - 1 if self.extinct else None

    @property
    def customers(self) -> np.ndarray:
        return np.sum(self.generations, axis=0)

    @property
    def censored(self) -> bool:
        return not self.extinct


def sample_tree(spec: ModelSpec, ancestor: int, seed, *, cap_generations: int = None,
                cap_individuals: int = None) -> GwTreeSample:
    """Grow one tree generation by generation.

    The children of all class-i individuals of a generation are drawn jointly: given the summed
    service ``sum S`` their class-j count is ``Poisson(lambda_ij * sum S)``. Trees that reach a cap
    are returned with ``extinct=False``.
    """
    cap_generations, cap_individuals = _caps(cap_generations, cap_individuals)
    generator = _generator(seed)
    k = spec.k

    counts = np.zeros(k, dtype=np.int64)
    counts[ancestor] = 1
    generations = [counts]
    service_by_class = np.zeros(k)
    individuals = 1

    while counts.any():
        if len(generations) - 1 >= cap_generations or individuals > cap_individuals:
            logger.debug('Tree from class %d censored after %d generations, %d individuals',
                         ancestor, len(generations), individuals)
            return GwTreeSample(ancestor, generations, float(service_by_class.sum()), service_by_class, False)

        children = np.zeros(k, dtype=np.int64)
        for i in np.flatnonzero(counts):
            served = float(np.sum(spec.service[i].sample(generator, int(counts[i]))))
            service_by_class[i] += served
            children += generator.poisson(spec.lam[i] * served)

        individuals += int(children.sum())
        if not children.any():
            break
        generations.append(children)
        counts = children

    return GwTreeSample(ancestor, generations, float(service_by_class.sum()), service_by_class, True)


@dataclasses.dataclass(frozen=True, eq=False)
class ForestSample:
    """Independent forests, one per row of the initial population matrix."""

    lengths: np.ndarray
    customers: np.ndarray
    depth: np.ndarray
    extinct: np.ndarray

    @property
    def replications(self) -> int:
        return len(self.lengths)

    @property
    def censored(self) -> int:
        return int(np.count_nonzero(~self.extinct))


def sample_forest(spec: ModelSpec, initial, seed: int, *, replications: int = None, cap_generations: int = None,
                  cap_individuals: int = None, block_size: int = None, stream_key=()) -> ForestSample:
    """Vectorised tree sampling for many replications.

    ``initial`` is an (R, K) matrix of generation-zero counts, or a K-vector repeated ``replications``
    times. Replications are cut into blocks of ``block_size``; block ``b`` draws from the stream
    ``(seed, *stream_key, b)``, so results do not depend on how the caller batches work.
    """
    cap_generations, cap_individuals = _caps(cap_generations, cap_individuals)
    block_size = int(BRANCHING['block_size'] if block_size is None else block_size)

    initial = np.asarray(initial, dtype=np.int64)
    if initial.ndim == 1:
        initial = np.tile(initial, (int(replications), 1))
    if initial.shape[1] != spec.k or np.any(initial < 0):
        raise ValueError(f'initial populations must be non-negative with {spec.k} columns')

    parts = []
    for block, start in enumerate(range(0, len(initial), block_size)):
        generator = rngs.stream(seed, *stream_key, block)
        parts.append(_grow_block(spec, initial[start:start + block_size], generator,
                                 cap_generations, cap_individuals))

    if not parts:
        empty = np.zeros(0)
        return ForestSample(empty, np.zeros((0, spec.k), dtype=np.int64), empty.astype(np.int64),
                            empty.astype(bool))

    return ForestSample(*(np.concatenate(column) for column in zip(*parts)))


def _grow_block(spec: ModelSpec, counts: np.ndarray, generator: np.random.Generator, cap_generations: int,
                cap_individuals: int):
    r, k = counts.shape
    counts = counts.copy()
    lengths = np.zeros(r)
    customers = counts.copy()
    depth = np.zeros(r, dtype=np.int64)
    extinct = np.ones(r, dtype=bool)
    trees = np.arange(r)

    generation = 0
    while True:
        over = counts.any(axis=1) & ((generation >= cap_generations) | (customers.sum(axis=1) > cap_individuals))
        if over.any():
            extinct[over] = False
            counts[over] = 0
            logger.debug('Censored %d trees at generation %d', int(over.sum()), generation)
        if not counts.any():
            break

        served = np.zeros((r, k))
        for i in range(k):
            column = counts[:, i]
            total = int(column.sum())
            if total == 0:
                continue
            draws = np.asarray(spec.service[i].sample(generator, total), dtype=float)
            served[:, i] = np.bincount(np.repeat(trees, column), weights=draws, minlength=r)

        lengths += served.sum(axis=1)
        children = generator.poisson(served @ spec.lam)
        generation += 1

        depth[children.any(axis=1)] = generation
        customers += children
        counts = children

    return lengths, customers, depth, extinct


@dataclasses.dataclass(frozen=True)
class ClassExtinction:
    ancestor_class: int
    replications: int
    extinct_fraction: float
    censored: int
    mean_depth: float
    mean_total_lifetime: float
    stderr_total_lifetime: float

    def to_dict(self) -> dict:
        return {
            'class': self.ancestor_class + 1,
            'replications': self.replications,
            'extinctFraction': self.extinct_fraction,
            'censored': self.censored,
            'meanDepth': self.mean_depth,
            'meanTotalLifetime': self.mean_total_lifetime,
            'stderrTotalLifetime': self.stderr_total_lifetime,
        }


@dataclasses.dataclass(frozen=True)
class ExtinctionStats:
    per_class: List[ClassExtinction]
    rho: float
    predicted_extinct: bool

    @property
    def consistent(self) -> bool:
        """Sub- and critical trees all die; a supercritical sample should show survivors."""
        fractions = [entry.extinct_fraction for entry in self.per_class]
        if self.predicted_extinct:
            return all(fraction == 1.0 for fraction in fractions)
        return any(fraction < 1.0 for fraction in fractions)

    def to_dict(self) -> dict:
        return {
            'rho': self.rho,
            'predictedExtinct': self.predicted_extinct,
            'consistent': self.consistent,
            'classes': [entry.to_dict() for entry in self.per_class],
        }


def _mean_and_stderr(values: np.ndarray):
    if len(values) == 0:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def extinction_stats(spec: ModelSpec, replications: int, seed: int, *, cap_generations: int = None,
                     cap_individuals: int = None, classes=None) -> ExtinctionStats:
    """Monte Carlo extinction fractions per ancestor class; depth and lifetime are over extinct trees only."""
    report = classify(spec)
    per_class = []

    for i in (range(spec.k) if classes is None else classes):
        initial = np.zeros(spec.k, dtype=np.int64)
        initial[i] = 1
        forest = sample_forest(spec, initial, seed, replications=replications, cap_generations=cap_generations,
                               cap_individuals=cap_individuals, stream_key=(i,))

        done = forest.extinct
        mean, stderr = _mean_and_stderr(forest.lengths[done])
        per_class.append(ClassExtinction(
            ancestor_class=i,
            replications=replications,
            extinct_fraction=float(done.mean()),
            censored=forest.censored,
            mean_depth=float(forest.depth[done].mean()) if done.any() else math.nan,
            mean_total_lifetime=mean,
            stderr_total_lifetime=stderr,
        ))
        if forest.censored:
            logger.warning('Class %d: %d of %d trees hit a cap and were censored', i + 1, forest.censored,
                           replications)

    return ExtinctionStats(per_class=per_class, rho=report.rho,
                           predicted_extinct=report.verdict is not StabilityReport.Verdict.UNSTABLE)


@dataclasses.dataclass(frozen=True, eq=False)
class ExpectationTable:
    #: tau[i, j]: expected time spent serving class j within a class-i busy period.
    tau: np.ndarray
    mean_busy: np.ndarray
    beta: np.ndarray

    #: beta computed as Lambda (I - M)^-1 G^-1 e, kept to check against ``beta``.
    beta_matrix_route: np.ndarray

    #: progeny[i, j]: expected number of class-j customers served in a class-i busy period.
    progeny: np.ndarray
    mean_customers: np.ndarray

    def to_dict(self) -> dict:
        return {
            'tau': self.tau.tolist(),
            'meanBusy': self.mean_busy.tolist(),
            'beta': self.beta.tolist(),
            'progeny': self.progeny.tolist(),
            'meanCustomers': self.mean_customers.tolist(),
        }


@is_stable()
def expectations(spec: ModelSpec) -> ExpectationTable:
    k = spec.k
    m = offspring_matrix(spec).m
    i_minus_m = np.eye(k) - m

    progeny = np.linalg.inv(i_minus_m)
    tau = np.linalg.solve(i_minus_m, np.diag(spec.means))
    mean_busy = tau.sum(axis=1)
    beta = spec.lam @ mean_busy
    beta_matrix_route = spec.lam @ np.linalg.solve(i_minus_m, spec.means)

    return ExpectationTable(tau=tau, mean_busy=mean_busy, beta=beta, beta_matrix_route=beta_matrix_route,
                            progeny=progeny, mean_customers=progeny.sum(axis=1))


@dataclasses.dataclass(frozen=True)
class ScaledBusyPeriod:
    ancestor_class: int
    z: float
    replications: int
    mean_ratio: float
    stderr: float
    beta: float

    @property
    def z_scores(self) -> dict:
        """Distance of the estimate from each candidate limit, in standard errors."""
        return {name: (self.mean_ratio - value) / self.stderr if self.stderr > 0 else math.nan
                for name, value in (('beta', self.beta), ('onePlusBeta', 1 + self.beta))}

    def to_dict(self) -> dict:
        return {
            'class': self.ancestor_class + 1,
            'z': self.z,
            'replications': self.replications,
            'meanRatio': self.mean_ratio,
            'stderr': self.stderr,
            'beta': self.beta,
            'onePlusBeta': 1 + self.beta,
            'zScores': self.z_scores,
        }


def scaled_busy_period(spec: ModelSpec, ancestor: int, z: float, replications: int, seed: int,
                       **caps) -> ScaledBusyPeriod:
    """Estimate E[B_(i;z)] / z for a class-i busy period whose first service is exactly ``z``.

    Arrivals during the first service are Poisson(lambda_ij z); each starts an independent busy period.
    """
    require_stable(spec)
    if not z > 0:
        raise ValueError('z must be > 0')

    generator = rngs.stream(seed, spec.k, ancestor)
    initial = generator.poisson(spec.lam[ancestor] * z, size=(replications, spec.k))
    forest = sample_forest(spec, initial, seed, stream_key=(spec.k + 1, ancestor), **caps)

    lengths = z + forest.lengths[forest.extinct]
    if forest.censored:
        logger.warning('%d of %d scaled busy periods were censored', forest.censored, replications)

    mean, stderr = _mean_and_stderr(lengths / z)
    beta = float(expectations(spec).beta[ancestor])
    return ScaledBusyPeriod(ancestor_class=ancestor, z=float(z), replications=replications, mean_ratio=mean,
                            stderr=0.0 if math.isnan(stderr) else stderr, beta=beta)


@dataclasses.dataclass(frozen=True, eq=False)
class TailConstants:
    alpha: float
    c_tilde: np.ndarray
    c: np.ndarray
    d: np.ndarray
    beta: np.ndarray

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'cTilde': self.c_tilde.tolist(),
            'c': self.c.tolist(),
            'd': self.d.tolist(),
            'beta': self.beta.tolist(),
        }


@is_stable()
def tail_constants(spec: ModelSpec, alpha: float, c_tilde) -> TailConstants:
    """Heavy-tail constants for P(B_i > x) ~ d_i F(x): c_i = c~_i (1 + beta_i)^alpha and d = c + M d."""
    c_tilde = np.asarray(c_tilde, dtype=float)
    require(alpha > 1, f'regular-variation index alpha > 1 (alpha = {alpha:g})')
    require(c_tilde.shape == (spec.k,) and np.all(c_tilde >= 0), 'c~ is a non-negative K-vector')
    require(np.any(c_tilde > 0), 'c~_k > 0 for some class k')

    beta = expectations(spec).beta
    c = c_tilde * (1 + beta) ** alpha
    d = np.linalg.solve(np.eye(spec.k) - offspring_matrix(spec).m, c)
    return TailConstants(alpha=float(alpha), c_tilde=c_tilde, c=c, d=d, beta=beta)


@dataclasses.dataclass(frozen=True, eq=False)
class ReferenceTail:
    """Pareto reference tail F(x) = min(1, (scale / x)^alpha) with F_i(x) ~ c~_i F(x)."""

    alpha: float
    c_tilde: np.ndarray
    scale: float

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide='ignore'):
            return np.minimum(1.0, (self.scale / x) ** self.alpha)

    def to_dict(self) -> dict:
        return {'alpha': self.alpha, 'cTilde': self.c_tilde.tolist(), 'scale': self.scale}


def reference_tail(spec: ModelSpec) -> ReferenceTail:
    """Choose F(x) = sup_i F_i(x / (1 + beta_i)) over the heaviest Pareto classes.

    Only classes whose Pareto shape equals the smallest one contribute; lighter classes get c~_i = 0.
    With this choice the largest c_i is exactly 1.
    """
    pareto = [i for i, dist in enumerate(spec.service) if dist.is_pareto]
    require(bool(pareto), 'at least one Pareto service class')

    alpha = min(spec.service[i].shape for i in pareto)
    heaviest = [i for i in pareto if spec.service[i].shape == alpha]
    beta = expectations(spec).beta
    scale = max((1 + beta[i]) * spec.service[i].scale for i in heaviest)

    c_tilde = np.zeros(spec.k)
    for i in heaviest:
        c_tilde[i] = (spec.service[i].scale / scale) ** alpha
    return ReferenceTail(alpha=float(alpha), c_tilde=c_tilde, scale=float(scale))


@dataclasses.dataclass(frozen=True, eq=False)
class LowerBound:
    """liminf P(B_i > x) / F(x) >= d_i with F(x) = F_0(x / (1 + beta*))."""

    beta_star: float
    c: np.ndarray
    d: np.ndarray
    reference_sf: Callable

    def sf(self, x):
        return self.reference_sf(np.asarray(x, dtype=float) / (1 + self.beta_star))

    def to_dict(self) -> dict:
        return {'betaStar': self.beta_star, 'c': self.c.tolist(), 'd': self.d.tolist(), 'kind': 'liminf lower bound'}


def subexponential_lower_bound(spec: ModelSpec) -> LowerBound:
    """Lower-bound constants when the heavy classes share one lognormal or Weibull law F_0.

    Those laws satisfy F_0(a x) = o(F_0(b x)) for a > b, so only the heavy classes with the largest
    beta contribute: c_j = 1 there and 0 elsewhere.
    """
    heavy = [i for i, dist in enumerate(spec.service) if dist.is_subexponential and not dist.is_pareto]
    require(bool(heavy), 'at least one lognormal or heavy Weibull service class')
    require(len({spec.service[i] for i in heavy}) == 1, 'heavy classes share one service law')

    beta = expectations(spec).beta
    beta_star = float(max(beta[i] for i in heavy))
    c = np.zeros(spec.k)
    for i in heavy:
        if math.isclose(beta[i], beta_star, rel_tol=1e-12, abs_tol=1e-15):
            c[i] = 1.0

    d = np.linalg.solve(np.eye(spec.k) - offspring_matrix(spec).m, c)
    return LowerBound(beta_star=beta_star, c=c, d=d, reference_sf=spec.service[heavy[0]].sf)


def mg1_tail_approximation(spec: ModelSpec, x):
    """Single-class one-big-jump approximation P(B > x) ~ P(S > (1 - rho) x) / (1 - rho)."""
    require(spec.k == 1, 'a single-class model')
    rho = require_stable(spec).rho
    return spec.service[0].sf((1 - rho) * np.asarray(x, dtype=float)) / (1 - rho)
