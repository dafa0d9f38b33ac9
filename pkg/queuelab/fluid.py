"""Fluid model of the queue: exact piecewise-linear integration, drain time, instability witnesses.

While class ``i`` is served at full rate the fluid levels move as ``dQ_j/dt = lambda_ij - mu_i 1{j = i}``,
which in matrix form is ``Q(t) = Q(0) + (M^T - I) D(t) + Y(t) lambda0`` with ``D = mu * T``.
"""
import dataclasses
import enum
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from queuelab.checks import QueuelabError, require, require_stable
from queuelab.config import default_config
from queuelab.model.offspring import StabilityReport, classify, left_perron_vector, offspring_matrix
from queuelab.model.spec import ModelSpec

logger = logging.getLogger(__name__)

FLUID = default_config['fluid']


@dataclasses.dataclass(frozen=True, eq=False)
class FluidState:
    q: np.ndarray
    t_alloc: np.ndarray
    y: float
    t: float

    def advance(self, mu: np.ndarray, lam: np.ndarray, lam0: np.ndarray, t_rate: np.ndarray, y_rate: float,
                dt: float) -> 'FluidState':
        """Move along a segment with constant allocation rates ``t_rate`` and idle rate ``y_rate``."""
        q_rate = lam.T @ t_rate - mu * t_rate + lam0 * y_rate
        q = np.maximum(self.q + q_rate * dt, 0.0)
        return FluidState(q=q, t_alloc=self.t_alloc + t_rate * dt, y=self.y + y_rate * dt, t=self.t + dt)

    @property
    def empty(self) -> bool:
        return not np.any(self.q > 0)


@dataclasses.dataclass(frozen=True)
class Policy:
    """A single-class-at-a-time fluid service policy.

    Both kinds are exhaustive: the served class keeps the server until its level reaches zero.
    Static priority then picks the first non-empty class of ``order``; serve-in-turn picks the
    next non-empty class cyclically after the one just emptied.
    """

    kind: 'Policy.Kind'
    order: Tuple[int, ...] = ()

    class Kind(enum.Enum):
        STATIC_PRIORITY = 'static-priority'
        SERVE_IN_TURN = 'serve-in-turn'

    @classmethod
    def static_priority(cls, order: Sequence[int]) -> 'Policy':
        return cls(cls.Kind.STATIC_PRIORITY, tuple(int(i) for i in order))

    @classmethod
    def serve_in_turn(cls) -> 'Policy':
        return cls(cls.Kind.SERVE_IN_TURN)

    @classmethod
    def parse(cls, text: str, k: int) -> 'Policy':
        """``priority`` (index order), ``priority:2,1,3`` (1-based classes) or ``in-turn``."""
        name, _, rest = text.partition(':')
        if name in ('priority', 'static-priority'):
            order = [int(part) - 1 for part in rest.split(',')] if rest else list(range(k))
            if sorted(order) != list(range(k)):
                raise ValueError(f'priority order must be a permutation of 1..{k}')
            return cls.static_priority(order)
        if name in ('in-turn', 'serve-in-turn', 'round-robin'):
            return cls.serve_in_turn()
        raise ValueError(f'unknown fluid policy {text!r}')

    @property
    def name(self) -> str:
        if self.kind is self.Kind.STATIC_PRIORITY:
            return 'static-priority:' + ','.join(str(i + 1) for i in self.order)
        return self.kind.value

    def next_class(self, q: np.ndarray, last: Optional[int]) -> int:
        nonempty = q > 0
        if self.kind is self.Kind.STATIC_PRIORITY:
            return next(i for i in self.order if nonempty[i])

        k = len(q)
        start = 0 if last is None else last + 1
        return next((start + step) % k for step in range(k) if nonempty[(start + step) % k])


@dataclasses.dataclass(frozen=True, eq=False)
class FluidTrajectory:
    breakpoints: List[FluidState]

    #: Class served on the segment after each breakpoint; None while the fluid sits at zero.
    served: List[Optional[int]]

    drain_time: Optional[float]
    policy_name: str

    class PolicyLivelock(QueuelabError):
        """Switching points accumulated past the breakpoint cap."""

    @property
    def times(self) -> np.ndarray:
        return np.array([state.t for state in self.breakpoints])

    @property
    def levels(self) -> np.ndarray:
        return np.array([state.q for state in self.breakpoints])

    @property
    def final(self) -> FluidState:
        return self.breakpoints[-1]

    def levels_at(self, times) -> np.ndarray:
        """Q at arbitrary times inside the trajectory, shape (len(times), K); exact since Q is piecewise linear."""
        times = np.asarray(times, dtype=float)
        levels = self.levels
        return np.column_stack([np.interp(times, self.times, levels[:, j]) for j in range(levels.shape[1])])

    def dynamics_residual(self, spec: ModelSpec) -> float:
        """Largest sup-norm defect of ``Q(t) - Q(0) - (M^T - I) D(t) - Y(t) lambda0`` over breakpoints."""
        m = offspring_matrix(spec).m
        q0 = self.breakpoints[0].q
        worst = 0.0
        for state in self.breakpoints:
            d = spec.mu * state.t_alloc
            defect = state.q - q0 - (m.T - np.eye(spec.k)) @ d - state.y * spec.lam0
            worst = max(worst, float(np.max(np.abs(defect))))
        return worst

    def csv_rows(self) -> List[list]:
        return [[state.t, *state.q.tolist(), state.y] for state in self.breakpoints]


def integrate(spec: ModelSpec, q0, policy: Policy, horizon: float, *,
              max_breakpoints: int = None) -> FluidTrajectory:
    q0 = np.asarray(q0, dtype=float)
    if q0.shape != (spec.k,) or np.any(q0 < 0):
        raise ValueError(f'q0 must be a non-negative vector of length {spec.k}')
    if not horizon > 0:
        raise ValueError('horizon must be > 0')

    max_breakpoints = int(FLUID['max_breakpoints'] if max_breakpoints is None else max_breakpoints)
    report = classify(spec)
    k, mu, lam, lam0 = spec.k, spec.mu, spec.lam, spec.lam0

    # once the Lyapunov function is this small the remaining switches are folded into one segment
    snap_below = None
    if report.verdict is StabilityReport.Verdict.STABLE:
        snap_below = FLUID['zeno_tolerance'] * max(1.0, float(report.drain_coefficients @ q0))

    state = FluidState(q=q0.copy(), t_alloc=np.zeros(k), y=0.0, t=0.0)
    breakpoints, served = [state], []
    drain_time, last = None, None

    while state.t < horizon:
        if len(breakpoints) > max_breakpoints:
            raise FluidTrajectory.PolicyLivelock(
                f'{policy.name} produced more than {max_breakpoints} breakpoints before t = {state.t:.6g}'
            )

        if state.empty:
            t_rate, y_rate, absorbing = _zero_state_rates(spec, report)
            if absorbing and drain_time is None:
                drain_time = state.t
            dt = horizon - state.t if absorbing else min(FLUID['ignition_time'], horizon - state.t)
            state = state.advance(mu, lam, lam0, t_rate, y_rate, dt)
            breakpoints.append(state)
            served.append(None)
            last = None
            if absorbing:
                break
            continue

        if snap_below is not None and report.drain_coefficients @ state.q <= snap_below:
            state = _snap_to_zero(spec, state)
            breakpoints.append(state)
            served.append(None)
            continue

        i = policy.next_class(state.q, last)
        t_rate = np.zeros(k)
        t_rate[i] = 1.0

        net_outflow = mu[i] - lam[i, i]
        hit = state.q[i] / net_outflow if net_outflow > 0 else math.inf
        dt = min(hit, horizon - state.t)

        state = state.advance(mu, lam, lam0, t_rate, 0.0, dt)
        if dt == hit:
            state.q[i] = 0.0

        breakpoints.append(state)
        served.append(i)
        last = i

    served.append(None)
    logger.debug('Fluid %s: %d breakpoints, drain time %s', policy.name, len(breakpoints), drain_time)
    return FluidTrajectory(breakpoints=breakpoints, served=served, drain_time=drain_time, policy_name=policy.name)


def _zero_state_rates(spec: ModelSpec, report: StabilityReport) -> Tuple[np.ndarray, float, bool]:
    """Allocation and idle rates that keep an empty fluid consistent, plus whether zero is absorbing."""
    k = spec.k
    verdict = report.verdict

    if verdict is StabilityReport.Verdict.UNSTABLE:
        # serve along the Perron direction of H^T; Q then grows as (rho - 1) G T
        t_rate = _perron_allocation(spec)
        return t_rate, 0.0, False

    if not np.any(spec.lam0 > 0):
        return np.zeros(k), 1.0, True

    if verdict is StabilityReport.Verdict.STABLE:
        m = offspring_matrix(spec).m
        x = np.linalg.solve(np.eye(k) - m.T, spec.lam0) / spec.mu
        y_rate = 1.0 / (1.0 + x.sum())
        return x * y_rate, y_rate, True

    # boundary: (M^T - I) G T vanishes along G^-1 w, so the server works without moving the fluid
    return _perron_allocation(spec), 0.0, True


def _perron_allocation(spec: ModelSpec) -> np.ndarray:
    w = left_perron_vector(offspring_matrix(spec).m)
    t_rate = w / spec.mu
    return t_rate / t_rate.sum()


def _snap_to_zero(spec: ModelSpec, state: FluidState) -> FluidState:
    m = offspring_matrix(spec).m
    d = np.linalg.solve(np.eye(spec.k) - m.T, state.q)
    t_alloc = d / spec.mu
    return FluidState(q=np.zeros(spec.k), t_alloc=state.t_alloc + t_alloc, y=state.y, t=state.t + t_alloc.sum())


def lyapunov_drain_time(spec: ModelSpec, q0) -> float:
    """Policy-independent drain time f(Q(0)) = e^T (I - H^T)^-1 G^-1 Q(0)."""
    report = require_stable(spec)
    q0 = np.asarray(q0, dtype=float)
    return float(report.drain_coefficients @ q0)


@dataclasses.dataclass(frozen=True, eq=False)
class WitnessReport:
    index: int
    value: float
    vector: np.ndarray
    left_perron: np.ndarray
    t: float

    def to_dict(self) -> dict:
        return {
            'class': self.index + 1,
            'value': self.value,
            'vector': self.vector.tolist(),
            'leftPerron': self.left_perron.tolist(),
            't': self.t,
        }


def instability_witness(spec: ModelSpec, t: float = 1.0) -> WitnessReport:
    """Certify that some workload component grows from empty under the allocation T = e t.

    Needs rho(M) > 1 and a positive entry in every row of M. If every component of
    (H^T - I) e were <= 0 then H^T e <= e would force rho <= 1, so a positive one exists.
    """
    report = classify(spec)
    require(report.verdict is StabilityReport.Verdict.UNSTABLE, f'rho(M) > 1 (rho = {report.rho:.12g})')
    require(report.positive_rows, 'every row of M has a strictly positive element')

    offspring = offspring_matrix(spec)
    vector = (offspring.h.T - np.eye(spec.k)) @ np.full(spec.k, float(t))
    index = int(np.argmax(vector))
    require(vector[index] > 0, 'some component of (H^T - I) T is positive')

    return WitnessReport(index=index, value=float(vector[index]), vector=vector,
                         left_perron=left_perron_vector(offspring.m), t=float(t))
