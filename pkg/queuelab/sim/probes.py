"""Empirical checks that run the samplers against the analytic results."""
import dataclasses
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from queuelab import rng as rngs
from queuelab.branching import ReferenceTail, TailConstants, reference_tail, sample_forest, tail_constants
from queuelab.checks import require, require_stable
from queuelab.config import default_config
from queuelab.fluid import Policy, integrate, lyapunov_drain_time
from queuelab.model.offspring import StabilityReport, classify
from queuelab.model.spec import ModelSpec
from queuelab.sim.engine import SimConfig, SimPolicy, run

logger = logging.getLogger(__name__)

TAIL = default_config['tail']
PROBE = default_config['probe']


@dataclasses.dataclass(frozen=True)
class TailPoint:
    x: float
    exceedances: int
    p_hat: float
    reference: float
    ratio: float
    lower: float
    upper: float
    one_sided: bool
    contains_d: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True, eq=False)
class TailRatio:
    ancestor_class: int
    replications: int
    censored: int
    d: float
    points: List[TailPoint]
    constants: TailConstants
    reference: ReferenceTail

    def ratios(self) -> np.ndarray:
        return np.array([point.ratio for point in self.points])

    def to_dict(self) -> dict:
        return {
            'class': self.ancestor_class + 1,
            'replications': self.replications,
            'censored': self.censored,
            'd': self.d,
            'constants': self.constants.to_dict(),
            'reference': self.reference.to_dict(),
            'points': [point.to_dict() for point in self.points],
        }


def wilson_interval(successes: int, n: int, confidence: float):
    """Two-sided Wilson score interval for a binomial proportion."""
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    p = successes / n
    denominator = 1 + z ** 2 / n
    center = (p + z ** 2 / (2 * n)) / denominator
    half = z / denominator * math.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2))
    return max(center - half, 0.0), min(center + half, 1.0)


def _one_sided_upper(successes: int, n: int, confidence: float) -> float:
    z = stats.norm.ppf(confidence)
    p = successes / n
    denominator = 1 + z ** 2 / n
    center = (p + z ** 2 / (2 * n)) / denominator
    return min(center + z / denominator * math.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2)), 1.0)


def busy_period_lengths(spec: ModelSpec, ancestor: int, replications: int, seed: int, method: str = None,
                        policy: SimPolicy = None):
    """Class-``ancestor`` busy periods from the tree sampler or the event engine; returns (lengths, censored)."""
    method = TAIL['method'] if method is None else method
    if method == 'tree':
        initial = np.zeros(spec.k, dtype=np.int64)
        initial[ancestor] = 1
        forest = sample_forest(spec, initial, seed, replications=replications, stream_key=(ancestor,))
        lengths = np.where(forest.extinct, forest.lengths, math.inf)
        return lengths, forest.censored
    if method == 'events':
        result = run(SimConfig(spec=spec, seed=seed, policy=policy or SimPolicy.fifo(),
                               busy_periods=replications, initiator=ancestor))
        return result.lengths(), 0
    raise ValueError(f'unknown busy-period method {method!r}')


def empirical_tail_ratio(spec: ModelSpec, ancestor: int, x_grid: Sequence[float], replications: int, seed: int, *,
                         reference: ReferenceTail = None, constants: TailConstants = None, method: str = None,
                         confidence: float = None, policy: SimPolicy = None) -> TailRatio:
    """Compare P(B_i > x) estimated over class-i busy periods with d_i F(x).

    Censored trees count as exceedances at every x. Points with fewer than ``min_exceedances``
    exceedances get a one-sided upper band only.
    """
    require_stable(spec)
    require(any(dist.is_pareto for dist in spec.service), 'at least one Pareto service class')
    confidence = TAIL['confidence'] if confidence is None else confidence

    reference = reference_tail(spec) if reference is None else reference
    constants = tail_constants(spec, reference.alpha, reference.c_tilde) if constants is None else constants
    d = float(constants.d[ancestor])

    lengths, censored = busy_period_lengths(spec, ancestor, replications, seed, method, policy)
    if censored:
        logger.warning('%d of %d busy periods were censored and count as exceedances', censored, replications)

    n = len(lengths)
    ordered = np.sort(lengths)
    points = []
    for x in np.asarray(x_grid, dtype=float):
        exceedances = int(n - np.searchsorted(ordered, x, side='right'))
        p_hat = exceedances / n
        f_bar = float(reference.sf(x))
        one_sided = exceedances < TAIL['min_exceedances']
        if one_sided:
            lower, upper = 0.0, _one_sided_upper(exceedances, n, confidence)
            logger.warning('Only %d exceedances at x = %.6g, reporting a one-sided band', exceedances, x)
        else:
            lower, upper = wilson_interval(exceedances, n, confidence)

        ratio_lower, ratio_upper = lower / f_bar, upper / f_bar
        points.append(TailPoint(
            x=float(x),
            exceedances=exceedances,
            p_hat=p_hat,
            reference=f_bar,
            ratio=p_hat / f_bar,
            lower=ratio_lower,
            upper=ratio_upper,
            one_sided=one_sided,
            contains_d=ratio_lower <= d <= ratio_upper,
        ))

    return TailRatio(ancestor_class=ancestor, replications=n, censored=censored, d=d, points=points,
                     constants=constants, reference=reference)


@dataclasses.dataclass(frozen=True)
class ProbeRow:
    kappa: float
    rho: float
    mean_workload: float
    idle_fraction: float
    window_workloads: tuple
    diverging: bool

    def to_dict(self) -> dict:
        return {**dataclasses.asdict(self), 'window_workloads': list(self.window_workloads)}


@dataclasses.dataclass(frozen=True)
class StabilityProbe:
    rows: List[ProbeRow]

    #: kappa at which rho(kappa M) = 1
    kappa_star: float

    @property
    def bracket(self) -> Optional[tuple]:
        """(largest non-diverging kappa below the first diverging one, first diverging kappa)."""
        ordered = sorted(self.rows, key=lambda row: row.kappa)
        for index, row in enumerate(ordered):
            if row.diverging:
                return (ordered[index - 1].kappa if index else None, row.kappa)
        return None

    def to_dict(self) -> dict:
        return {'kappaStar': self.kappa_star, 'bracket': self.bracket, 'rows': [row.to_dict() for row in self.rows]}


def stability_probe(spec: ModelSpec, kappas: Sequence[float], seed: int, horizon: float = None,
                    policy: SimPolicy = None) -> StabilityProbe:
    """Simulate kappa * Lambda for each kappa and flag runs whose workload keeps growing.

    A run counts as diverging when the average workload over the last window exceeds the one over the
    first window by the configured ratio.
    """
    horizon = PROBE['horizon'] if horizon is None else horizon
    rho = classify(spec).rho
    rows = []

    for index, kappa in enumerate(kappas):
        scaled = spec.scaled(kappa)
        config = SimConfig(spec=scaled, seed=rngs.derive_seed(seed, index), policy=policy or SimPolicy.fifo(),
                           horizon=horizon)
        summary = run(config).summary
        windows = summary.window_workloads
        first, last = windows[0], windows[-1]
        diverging = bool(last > PROBE['divergence_ratio'] * max(first, 1e-12)) and summary.idle_fraction < 0.5
        rows.append(ProbeRow(kappa=float(kappa), rho=float(kappa * rho), mean_workload=summary.mean_workload,
                             idle_fraction=summary.idle_fraction, window_workloads=tuple(windows.tolist()),
                             diverging=diverging))
        logger.info('kappa = %.4g: mean workload %.4g, idle %.3f%s', kappa, summary.mean_workload,
                    summary.idle_fraction, ' (diverging)' if diverging else '')

    return StabilityProbe(rows=rows, kappa_star=1 / rho if rho > 0 else math.inf)


@dataclasses.dataclass(frozen=True, eq=False)
class FluidScaleProbe:
    n: int
    times: np.ndarray
    fluid: np.ndarray
    scaled: np.ndarray

    @property
    def sup_distance(self) -> float:
        return float(np.max(np.abs(self.fluid - self.scaled)))

    def to_dict(self) -> dict:
        return {'n': self.n, 'times': self.times.tolist(), 'fluid': self.fluid.tolist(),
                'scaled': self.scaled.tolist(), 'supDistance': self.sup_distance}


def _sim_policy(policy: Policy) -> SimPolicy:
    if policy.kind is Policy.Kind.STATIC_PRIORITY:
        return SimPolicy.exhaustive(policy.order)
    return SimPolicy.in_turn()


def fluid_scale_probe(spec: ModelSpec, q0, policy: Policy, n: int, seed: int, horizon: float = None,
                      points: int = 50) -> FluidScaleProbe:
    """Run the queue from floor(n q0) customers and compare Q(n t) / n with the fluid trajectory.

    The simulator uses the exhaustive discipline matching the fluid policy. Agreement improves as ``n``
    grows; nothing here certifies convergence.
    """
    q0 = np.asarray(q0, dtype=float)
    if horizon is None:
        stable = classify(spec).verdict is StabilityReport.Verdict.STABLE
        horizon = 1.5 * lyapunov_drain_time(spec, q0) if stable and q0.any() else 1.0

    trajectory = integrate(spec, q0, policy, horizon)
    times = np.linspace(0.0, horizon, points)
    fluid = trajectory.levels_at(times)

    config = SimConfig(spec=spec, seed=seed, policy=_sim_policy(policy), horizon=n * horizon,
                       initial_state=tuple(int(v) for v in np.floor(n * q0)), sample_times=n * times)
    summary = run(config).summary
    return FluidScaleProbe(n=n, times=times, fluid=fluid, scaled=summary.sample_queue / n)
