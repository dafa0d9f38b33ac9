import math

import numpy as np

from queuelab.branching import expectations
from queuelab.cli import EXIT_OK
from queuelab.command import Command, class_index, float_list
from queuelab.model.offspring import StabilityReport, classify
from queuelab.sim.engine import SimConfig, SimPolicy, run
from queuelab.sim.probes import stability_probe


def mean_and_stderr(values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return (float(values.mean()) if len(values) else math.nan), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


class Simulate(Command):
    name = 'simulate'
    help = 'Run the event-driven simulator for a number of busy periods or up to a horizon.'
    stochastic = True
    sampling = True

    def needs_restart(self, args):
        # a forced initiator or initial population starts each busy period without lambda0
        return bool(args.sweep) or (args.klass is None and args.initial_state is None)

    def add_arguments(self, parser):
        parser.add_argument('--policy', help='fifo, priority[:order], preemptive[:order], exhaustive[:order] '
                                             'or in-turn')
        length = parser.add_mutually_exclusive_group(required=True)
        length.add_argument('--busy-periods', type=int, help='stop after this many busy periods')
        length.add_argument('--horizon', type=float, help='stop at this time')
        parser.add_argument('--class', dest='klass', type=class_index,
                            help='start every busy period with one customer of this class (1-based)')
        parser.add_argument('--initial-state', type=float_list, help='initial population, comma-separated counts')
        parser.add_argument('--warmup', type=float, default=0.0)
        parser.add_argument('--trace', help='append the event log to this file')
        parser.add_argument('--audit', action='store_true', help='check conservation identities at every event')
        parser.add_argument('--sweep', type=float_list,
                            help='scale factors on Lambda; runs the stability probe (needs --horizon)')

    def run(self, ctx) -> int:
        spec, args = ctx.spec, ctx.args
        section = ctx.config.section('sim')
        policy = SimPolicy.parse(args.policy or section.get('policy', 'fifo'), spec.k)

        if args.sweep:
            if args.horizon is None:
                raise ValueError('--sweep needs --horizon')
            probe = stability_probe(spec, args.sweep, args.seed, horizon=args.horizon, policy=policy)
            payload = probe.to_dict()
            ctx.write_json('stability-probe', payload)
            ctx.emit(payload)
            return EXIT_OK

        initial_state = None
        if args.initial_state is not None:
            initial_state = tuple(int(v) for v in args.initial_state)

        config = SimConfig(
            spec=spec,
            seed=args.seed,
            policy=policy,
            busy_periods=args.busy_periods,
            horizon=args.horizon,
            warmup=args.warmup,
            initiator=args.klass,
            initial_state=initial_state,
            trace_path=args.trace,
            audit=args.audit or bool(section.get('audit')),
            max_events=section.get('max_events'),
        )
        result = run(config)
        summary = {'policy': policy.name, 'run': result.summary.to_dict()}

        if result.busy_periods:
            summary['busyPeriods'] = self._busy_period_summary(spec, result)
            header = ['initiator', 'length', *(f'served_{i + 1}' for i in range(spec.k)), 'maxWorkload']
            rows = [[bp.initiator_class + 1, bp.length, *bp.customers_served.tolist(), bp.max_workload]
                    for bp in result.busy_periods]
            ctx.write_table('busy-periods', header, rows)

        ctx.write_json('simulate', summary)
        ctx.emit(summary)
        return EXIT_OK

    @staticmethod
    def _busy_period_summary(spec, result) -> dict:
        stable = classify(spec).verdict is StabilityReport.Verdict.STABLE
        table = expectations(spec) if stable else None

        per_class = []
        for i in range(spec.k):
            lengths = result.lengths(i)
            if not len(lengths):
                continue
            mean, stderr = mean_and_stderr(lengths)
            customers_mean, customers_stderr = mean_and_stderr(result.customers(i).sum(axis=1))
            entry = {
                'class': i + 1,
                'count': len(lengths),
                'meanLength': mean,
                'stderrLength': stderr,
                'meanCustomers': customers_mean,
                'stderrCustomers': customers_stderr,
            }
            if table is not None:
                entry['oracleMeanLength'] = float(table.mean_busy[i])
                entry['oracleMeanCustomers'] = float(table.mean_customers[i])
            per_class.append(entry)

        mean, stderr = mean_and_stderr(result.lengths())
        return {'count': len(result.busy_periods), 'meanLength': mean, 'stderrLength': stderr, 'perClass': per_class}


def setup(app):
    app.add_command(Simulate(app))
