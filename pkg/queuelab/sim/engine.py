"""Event-driven simulation of the queue.

Arrivals of class ``j`` form a Poisson stream of rate ``lambda_ij`` while a class-i job is in
service and ``lambda0_j`` while the server idles. Because the streams are memoryless the next
arrival is re-drawn after every event from the superposed rate of the current server state.
Service requirements are drawn when a job arrives and consumed as remaining work.
"""
import collections
import dataclasses
import enum
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from queuelab import rng as rngs
from queuelab.checks import QueuelabError
from queuelab.config import default_config
from queuelab.model.spec import ModelSpec
from queuelab.sim.trace import Event, EventLog

logger = logging.getLogger(__name__)

SIM = default_config['sim']


@dataclasses.dataclass(frozen=True)
class SimPolicy:
    kind: 'SimPolicy.Kind'
    order: Tuple[int, ...] = ()

    class Kind(enum.Enum):
        FIFO = 'fifo'
        PRIORITY_NON_PREEMPTIVE = 'priority'
        PRIORITY_PREEMPTIVE = 'preemptive'
        EXHAUSTIVE = 'exhaustive'
        IN_TURN = 'in-turn'

    @classmethod
    def fifo(cls) -> 'SimPolicy':
        return cls(cls.Kind.FIFO)

    @classmethod
    def non_preemptive(cls, order: Sequence[int]) -> 'SimPolicy':
        return cls(cls.Kind.PRIORITY_NON_PREEMPTIVE, tuple(int(i) for i in order))

    @classmethod
    def preemptive_resume(cls, order: Sequence[int]) -> 'SimPolicy':
        return cls(cls.Kind.PRIORITY_PREEMPTIVE, tuple(int(i) for i in order))

    @classmethod
    def exhaustive(cls, order: Sequence[int]) -> 'SimPolicy':
        """Keep serving a class until it empties, then take the first non-empty class of ``order``."""
        return cls(cls.Kind.EXHAUSTIVE, tuple(int(i) for i in order))

    @classmethod
    def in_turn(cls) -> 'SimPolicy':
        """Keep serving a class until it empties, then move cyclically to the next non-empty class."""
        return cls(cls.Kind.IN_TURN)

    @classmethod
    def parse(cls, text: str, k: int) -> 'SimPolicy':
        """Parse ``fifo``, ``in-turn``, or ``priority``, ``preemptive`` and ``exhaustive``
        each with an optional 1-based order such as ``:2,1,3``.
        """
        name, _, rest = text.partition(':')
        kind = cls.Kind(name)
        if kind is cls.Kind.FIFO:
            return cls.fifo()
        if kind is cls.Kind.IN_TURN:
            return cls.in_turn()
        order = [int(part) - 1 for part in rest.split(',')] if rest else list(range(k))
        if sorted(order) != list(range(k)):
            raise ValueError(f'priority order must be a permutation of 1..{k}')
        return cls(kind, tuple(order))

    @property
    def name(self) -> str:
        if self.kind in (self.Kind.FIFO, self.Kind.IN_TURN):
            return self.kind.value
        return f'{self.kind.value}:' + ','.join(str(i + 1) for i in self.order)

    @property
    def preemptive(self) -> bool:
        return self.kind is self.Kind.PRIORITY_PREEMPTIVE


@dataclasses.dataclass(frozen=True, eq=False)
class SimConfig:
    spec: ModelSpec
    seed: int
    policy: SimPolicy = dataclasses.field(default_factory=SimPolicy.fifo)

    #: Stop after this many completed busy periods ...
    busy_periods: Optional[int] = None

    #: ... or at this time; one of the two is required.
    horizon: Optional[float] = None

    #: Time-average statistics ignore [0, warmup); busy periods starting before it are dropped.
    warmup: float = 0.0

    #: Start every busy period with one class-``initiator`` customer instead of a lambda0 arrival.
    initiator: Optional[int] = None

    #: Start every busy period (or the horizon run) from this population.
    initial_state: Optional[Tuple[int, ...]] = None

    sample_times: Optional[Sequence[float]] = None
    trace_path: Optional[str] = None
    audit: bool = False
    max_events: Optional[int] = None

    class Invalid(QueuelabError):
        pass

    def check(self) -> None:
        k = self.spec.k
        if (self.busy_periods is None) == (self.horizon is None):
            raise self.Invalid('give exactly one of busy_periods and horizon')
        if self.busy_periods is not None and self.busy_periods < 1:
            raise self.Invalid('busy_periods must be >= 1')
        if self.horizon is not None and not self.horizon > 0:
            raise self.Invalid('horizon must be > 0')
        if self.initiator is not None and self.initial_state is not None:
            raise self.Invalid('initiator and initial_state are mutually exclusive')
        if self.initiator is not None and not 0 <= self.initiator < k:
            raise self.Invalid(f'initiator must be a class index in 0..{k - 1}')
        if self.initial_state is not None:
            state = np.asarray(self.initial_state)
            if state.shape != (k,) or np.any(state < 0):
                raise self.Invalid(f'initial_state must be {k} non-negative counts')
            if self.busy_periods is not None and not state.any():
                raise self.Invalid('a busy period cannot start from an empty initial_state')
        if self.busy_periods is not None and self.initiator is None and self.initial_state is None \
                and not np.any(self.spec.lam0 > 0):
            raise self.Invalid('busy periods need lambda0 arrivals or a forced initiator')
        ordered = self.policy.kind not in (SimPolicy.Kind.FIFO, SimPolicy.Kind.IN_TURN)
        if ordered and sorted(self.policy.order) != list(range(k)):
            raise self.Invalid(f'priority order must be a permutation of the {k} classes')


@dataclasses.dataclass(frozen=True)
class BusyPeriodSample:
    length: float
    initiator_class: int
    customers_served: np.ndarray
    max_workload: float
    start: float


@dataclasses.dataclass(frozen=True, eq=False)
class SimSummary:
    t: float
    events: int
    partial: bool
    arrivals: np.ndarray
    departures: np.ndarray
    t_alloc: np.ndarray
    y: float
    queue: np.ndarray
    workload: float
    mean_workload: float
    mean_queue: np.ndarray
    idle_fraction: float
    window_workloads: np.ndarray
    sample_times: np.ndarray
    sample_queue: np.ndarray
    sample_workload: np.ndarray
    sample_idle: np.ndarray

    def to_dict(self) -> dict:
        return {
            't': self.t,
            'events': self.events,
            'partial': self.partial,
            'arrivals': self.arrivals.tolist(),
            'departures': self.departures.tolist(),
            'allocation': self.t_alloc.tolist(),
            'idle': self.y,
            'queue': self.queue.tolist(),
            'meanWorkload': self.mean_workload,
            'meanQueue': self.mean_queue.tolist(),
            'idleFraction': self.idle_fraction,
            'windowWorkloads': self.window_workloads.tolist(),
        }


@dataclasses.dataclass(frozen=True, eq=False)
class SimResult:
    summary: SimSummary
    busy_periods: List[BusyPeriodSample]

    def lengths(self, initiator: int = None) -> np.ndarray:
        return np.array([bp.length for bp in self.busy_periods
                         if initiator is None or bp.initiator_class == initiator])

    def customers(self, initiator: int = None) -> np.ndarray:
        rows = [bp.customers_served for bp in self.busy_periods
                if initiator is None or bp.initiator_class == initiator]
        return np.array(rows).reshape(len(rows), -1)


class _Feed:
    """Buffered draws so the event loop does not call into numpy once per number."""

    __slots__ = ('_draw', '_size', '_buffer', '_index')

    def __init__(self, draw, size: int):
        self._draw = draw
        self._size = size
        self._buffer = ()
        self._index = 0

    def next(self) -> float:
        if self._index >= len(self._buffer):
            self._buffer = self._draw(self._size).tolist()
            self._index = 0
        value = self._buffer[self._index]
        self._index += 1
        return value


class _Job:
    __slots__ = ('klass', 'seq', 'remaining')

    def __init__(self, klass: int, seq: int, remaining: float):
        self.klass = klass
        self.seq = seq
        self.remaining = remaining


class Simulator:
    class AuditFailure(QueuelabError):
        """A conservation identity failed at an event."""

    def __init__(self, config: SimConfig):
        config.check()
        self.config = config
        self.spec = spec = config.spec
        self.k = spec.k

        generator = rngs.stream(config.seed)
        size = int(SIM['buffer_size'])
        self._exponential = _Feed(generator.standard_exponential, size)
        self._uniform = _Feed(generator.random, size)
        self._service = [_Feed(lambda n, dist=dist: np.asarray(dist.sample(generator, n), dtype=float), size)
                         for dist in spec.service]

        self._rates = np.concatenate([spec.lam, spec.lam0[None, :]])
        totals = self._rates.sum(axis=1)
        self._total_rate = totals.tolist()
        with np.errstate(invalid='ignore', divide='ignore'):
            self._cumulative = [np.cumsum(row / total).tolist() if total > 0 else None
                                for row, total in zip(self._rates, totals)]

        policy = config.policy
        self._rank = list(range(self.k))
        if policy.order:
            for position, klass in enumerate(policy.order):
                self._rank[klass] = position
        self.max_events = int(SIM['max_events'] if config.max_events is None else config.max_events)

    def _arrival_class(self, state: int) -> int:
        u = self._uniform.next()
        for klass, bound in enumerate(self._cumulative[state]):
            if u < bound:
                return klass
        return self.k - 1

    def _select(self, queues, last: Optional[int] = None) -> Optional[int]:
        """Class whose head-of-line job is served next; ``last`` is the class that just finished."""
        kind = self.config.policy.kind
        if kind in (SimPolicy.Kind.EXHAUSTIVE, SimPolicy.Kind.IN_TURN) and last is not None and queues[last]:
            return last
        if kind is SimPolicy.Kind.IN_TURN:
            start = 0 if last is None else last + 1
            return next(((start + step) % self.k for step in range(self.k) if queues[(start + step) % self.k]), None)

        best = None
        for klass in range(self.k):
            if not queues[klass]:
                continue
            if best is None:
                best = klass
            elif kind is SimPolicy.Kind.FIFO:
                if queues[klass][0].seq < queues[best][0].seq:
                    best = klass
            elif self._rank[klass] < self._rank[best]:
                best = klass
        return best

    def run(self) -> SimResult:
        if self.config.trace_path:
            with EventLog(self.config.trace_path) as log:
                return self._run(log)
        return self._run(None)

    def _run(self, log: Optional[EventLog]) -> SimResult:
        config, k = self.config, self.k
        horizon = math.inf if config.horizon is None else config.horizon
        target = config.busy_periods
        warmup = config.warmup
        forced = config.initiator is not None or (config.initial_state is not None and target is not None)

        queues = [collections.deque() for _ in range(k)]
        arrivals = np.zeros(k, dtype=np.int64)
        departures = np.zeros(k, dtype=np.int64)
        queue0 = np.zeros(k, dtype=np.int64)
        t_alloc = [0.0] * k
        t, y, workload = 0.0, 0.0, 0.0
        seq = 0
        events = 0

        busy_periods: List[BusyPeriodSample] = []
        period_start, period_initiator = None, None
        period_served = np.zeros(k, dtype=np.int64)
        period_max = 0.0

        workload_area, idle_area, queue_area = 0.0, 0.0, np.zeros(k)
        windows = int(SIM['workload_windows'])
        window_area = np.zeros(windows)
        window_length = (horizon - warmup) / windows if math.isfinite(horizon) else math.inf

        sample_times = np.asarray(config.sample_times if config.sample_times is not None else [], dtype=float)
        samples_q = np.zeros((len(sample_times), k), dtype=np.int64)
        samples_w = np.zeros(len(sample_times))
        samples_y = np.zeros(len(sample_times))
        next_sample = 0

        queue_count = np.zeros(k, dtype=np.int64)
        in_service: Optional[_Job] = None

        def enqueue(klass: int, at_time: float, counted: bool = True):
            nonlocal seq, workload
            if counted:
                arrivals[klass] += 1
            work = self._service[klass].next()
            queues[klass].append(_Job(klass, seq, work))
            seq += 1
            workload += work
            queue_count[klass] += 1
            if log:
                log.write(at_time, Event.ARRIVAL, klass, queue_count)

        def start_next(at_time: float, last: Optional[int] = None) -> Optional[_Job]:
            klass = self._select(queues, last)
            if klass is None:
                return None
            job = queues[klass].popleft()
            if log:
                log.write(at_time, Event.START, klass, queue_count)
            return job

        def seed_population(at_time: float, counted: bool = True):
            if config.initiator is not None:
                population = np.zeros(k, dtype=np.int64)
                population[config.initiator] = 1
            else:
                population = np.asarray(config.initial_state, dtype=np.int64)
            for klass in range(k):
                for _ in range(int(population[klass])):
                    enqueue(klass, at_time, counted)
            return population

        def accumulate(dt: float, busy: bool):
            """Areas under W and Q over [t, t + dt), clipped to the warm-up boundary."""
            nonlocal workload_area, idle_area
            start = max(t, warmup)
            end = t + dt
            if end <= start:
                return
            span = end - start
            w_start = workload - (start - t) if busy else 0.0
            area = (w_start - span / 2) * span if busy else 0.0
            workload_area += area
            if not busy:
                idle_area += span
            queue_area[:] += queue_count * span
            if windows and math.isfinite(window_length) and window_length > 0:
                index = min(int((start - warmup) / window_length), windows - 1)
                window_area[index] += area

        def take_samples(until: float):
            nonlocal next_sample
            while next_sample < len(sample_times) and sample_times[next_sample] <= until:
                at = sample_times[next_sample]
                samples_q[next_sample] = queue_count
                samples_w[next_sample] = workload - (at - t) if in_service is not None else 0.0
                samples_y[next_sample] = y + (at - t if in_service is None else 0.0)
                next_sample += 1

        if config.initial_state is not None and target is None:
            queue0[:] = seed_population(t, counted=False)
        if forced:
            population = seed_population(t)
            period_initiator = config.initiator if config.initiator is not None else int(np.argmax(population > 0))
            period_start = t
        in_service = start_next(t)
        if in_service is not None and period_start is None:
            period_start, period_initiator = t, in_service.klass
        period_max = workload

        partial = False
        while True:
            if events >= self.max_events:
                partial = True
                logger.warning('Simulation stopped at the event cap (%d events, t = %.6g)', events, t)
                break
            if target is not None and len(busy_periods) >= target:
                break

            state = k if in_service is None else in_service.klass
            rate = self._total_rate[state]
            t_arrival = t + self._exponential.next() / rate if rate > 0 else math.inf

            if in_service is None:
                if t_arrival == math.inf:
                    if math.isfinite(horizon):
                        take_samples(horizon)
                        accumulate(horizon - t, False)
                        if config.audit:
                            self._audit_idle(t, queue_count, in_service, workload)
                        y += horizon - t
                        t = horizon
                    break
                if t_arrival >= horizon:
                    take_samples(horizon)
                    accumulate(horizon - t, False)
                    if config.audit:
                        self._audit_idle(t, queue_count, in_service, workload)
                    y += horizon - t
                    t = horizon
                    break

                take_samples(t_arrival)
                accumulate(t_arrival - t, False)
                if config.audit:
                    self._audit_idle(t, queue_count, in_service, workload)
                y += t_arrival - t
                t = t_arrival
                events += 1
                klass = self._arrival_class(state)
                enqueue(klass, t)
                in_service = start_next(t)
                period_start, period_initiator = t, klass
                period_served[:] = 0
                period_max = workload
                continue

            t_departure = t + in_service.remaining
            next_time = min(t_arrival, t_departure)
            if next_time >= horizon:
                dt = horizon - t
                take_samples(horizon)
                accumulate(dt, True)
                in_service.remaining -= dt
                workload -= dt
                t_alloc[in_service.klass] += dt
                t = horizon
                break

            events += 1
            take_samples(next_time)
            if t_arrival < t_departure:
                dt = t_arrival - t
                accumulate(dt, True)
                in_service.remaining -= dt
                workload -= dt
                t_alloc[in_service.klass] += dt
                t = t_arrival

                klass = self._arrival_class(state)
                enqueue(klass, t)
                period_max = max(period_max, workload)

                if self.config.policy.preemptive and self._rank[klass] < self._rank[in_service.klass]:
                    queues[in_service.klass].appendleft(in_service)
                    in_service = start_next(t)
            else:
                dt = in_service.remaining
                accumulate(dt, True)
                workload -= dt
                t_alloc[in_service.klass] += dt
                t = t_departure
                klass = in_service.klass
                queue_count[klass] -= 1
                departures[klass] += 1
                period_served[klass] += 1
                if log:
                    log.write(t, Event.DEPARTURE, klass, queue_count)

                in_service = start_next(t, klass)
                if in_service is None:
                    # float drift only, every job has left
                    workload = 0.0
                    if period_start is not None and period_start >= warmup:
                        busy_periods.append(BusyPeriodSample(
                            length=t - period_start,
                            initiator_class=period_initiator,
                            customers_served=period_served.copy(),
                            max_workload=period_max,
                            start=period_start,
                        ))
                    period_start = None
                    if log:
                        log.write(t, Event.IDLE, -1, queue_count)

                    if forced and (target is None or len(busy_periods) < target):
                        population = seed_population(t)
                        period_initiator = config.initiator if config.initiator is not None \
                            else int(np.argmax(population > 0))
                        period_start = t
                        period_served[:] = 0
                        period_max = workload
                        in_service = start_next(t)

            if config.audit:
                self._audit(queue0, arrivals, departures, queue_count, t_alloc, y, t)

        take_samples(t)
        observed = max(t - warmup, 0.0)
        mean_queue = queue_area / observed if observed > 0 else np.full(k, math.nan)
        mean_workload = workload_area / observed if observed > 0 else math.nan
        if math.isfinite(window_length):
            window_workloads = window_area / window_length
        else:
            window_workloads = np.full(windows, math.nan)

        summary = SimSummary(
            t=t,
            events=events,
            partial=partial,
            arrivals=arrivals,
            departures=departures,
            t_alloc=np.array(t_alloc),
            y=y,
            queue=queue_count.copy(),
            workload=max(workload, 0.0),
            mean_workload=mean_workload,
            mean_queue=mean_queue,
            idle_fraction=idle_area / observed if observed > 0 else math.nan,
            window_workloads=window_workloads,
            sample_times=sample_times,
            sample_queue=samples_q,
            sample_workload=samples_w,
            sample_idle=samples_y,
        )
        logger.info('Simulated %d events to t = %.6g, %d busy periods', events, t, len(busy_periods))
        return SimResult(summary=summary, busy_periods=busy_periods)

    def _audit(self, queue0, arrivals, departures, queue_count, t_alloc, y, t):
        if np.any(queue0 + arrivals - departures != queue_count):
            raise self.AuditFailure(f'Q != Q(0) + A - D at t = {t!r}')
        if abs(sum(t_alloc) + y - t) > 1e-9 * max(1.0, t):
            raise self.AuditFailure(f'sum T + Y = {sum(t_alloc) + y!r} differs from t = {t!r}')

    def _audit_idle(self, t, queue_count, in_service, workload):
        """Y may only grow while the system holds no work."""
        if in_service is not None or np.any(queue_count) or workload != 0.0:
            raise self.AuditFailure(f'Y increased at t = {t!r} with workload {workload!r} in the system')


def run(config: SimConfig) -> SimResult:
    return Simulator(config).run()
