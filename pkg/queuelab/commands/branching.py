import logging

from queuelab.branching import (expectations, extinction_stats, reference_tail, scaled_busy_period,
                                tail_constants)
from queuelab.cli import EXIT_OK
from queuelab.command import Command, class_index
from queuelab.model.offspring import StabilityReport, classify
from queuelab.utils.messages import BUSY_PERIOD_SCALING_NOTE, OFFSPRING_CONVENTION_NOTE

logger = logging.getLogger(__name__)


class Branching(Command):
    name = 'branching'
    help = 'Sample busy-period trees and compare them with the closed-form expectations.'
    stochastic = True

    def add_arguments(self, parser):
        parser.add_argument('--class', dest='klass', type=class_index,
                            help='ancestor class (1-based); all classes when omitted')
        parser.add_argument('--reps', type=int, default=10000, help='trees per ancestor class (default: 10000)')
        parser.add_argument('--cap-gen', type=int, help='generation cap before a tree is censored')
        parser.add_argument('--cap-ind', type=int, help='individual cap before a tree is censored')
        parser.add_argument('--z', type=float, help='also estimate E[B_(i;z)] / z for this first service')

    def run(self, ctx) -> int:
        spec, args = ctx.spec, ctx.args
        section = ctx.config.section('branching')
        caps = {
            'cap_generations': args.cap_gen if args.cap_gen is not None else section.get('cap_generations'),
            'cap_individuals': args.cap_ind if args.cap_ind is not None else section.get('cap_individuals'),
        }
        classes = range(spec.k) if args.klass is None else [args.klass]
        if args.klass is not None and args.klass >= spec.k:
            raise ValueError(f'--class must be between 1 and {spec.k}')

        stats = extinction_stats(spec, args.reps, args.seed, classes=classes, **caps)
        summary = {
            **stats.to_dict(),
            'notes': [OFFSPRING_CONVENTION_NOTE],
            'tau': None,
            'beta': None,
            'meanBusy': None,
            'd': None,
        }

        if classify(spec).verdict is StabilityReport.Verdict.STABLE:
            table = expectations(spec)
            summary.update({
                'tau': table.tau.tolist(),
                'beta': table.beta.tolist(),
                'meanBusy': {
                    'closedForm': table.mean_busy.tolist(),
                    'monteCarlo': [entry.mean_total_lifetime for entry in stats.per_class],
                    'stderr': [entry.stderr_total_lifetime for entry in stats.per_class],
                },
                'meanCustomers': table.mean_customers.tolist(),
            })

            if any(dist.is_pareto for dist in spec.service):
                reference = reference_tail(spec)
                summary['d'] = tail_constants(spec, reference.alpha, reference.c_tilde).d.tolist()

            if args.z is not None:
                summary['scaledBusyPeriod'] = [
                    scaled_busy_period(spec, i, args.z, args.reps, args.seed, **caps).to_dict() for i in classes
                ]
                summary['notes'].append(BUSY_PERIOD_SCALING_NOTE)
        else:
            logger.info('Model is not stable, closed-form expectations are skipped')

        ctx.write_json('branching', summary)
        ctx.emit(summary)
        return EXIT_OK


def setup(app):
    app.add_command(Branching(app))
