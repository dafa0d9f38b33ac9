import numpy as np

from queuelab.branching import mg1_tail_approximation, reference_tail, tail_constants
from queuelab.cli import EXIT_OK
from queuelab.command import Command, class_index, float_list
from queuelab.sim.engine import SimPolicy
from queuelab.sim.probes import empirical_tail_ratio


class Tail(Command):
    name = 'tail'
    help = 'Estimate P(B_i > x) / F(x) and compare it with the heavy-tail constant d_i.'
    stochastic = True

    def add_arguments(self, parser):
        parser.add_argument('--class', dest='klass', type=class_index, default=0,
                            help='initiator class (1-based, default 1)')
        parser.add_argument('--reps', type=int, default=100000, help='busy periods to sample (default: 100000)')
        parser.add_argument('--x', type=float_list, help='probe points; default a geometric grid')
        parser.add_argument('--method', choices=('tree', 'events'))
        parser.add_argument('--confidence', type=float)

    def run(self, ctx) -> int:
        spec, args = ctx.spec, ctx.args
        section = ctx.config.section('tail')
        if args.klass >= spec.k:
            raise ValueError(f'--class must be between 1 and {spec.k}')

        reference = reference_tail(spec)
        constants = tail_constants(spec, reference.alpha, reference.c_tilde)
        x_grid = args.x or np.geomspace(reference.scale, reference.scale * 1e3, 13).tolist()

        ratio = empirical_tail_ratio(
            spec, args.klass, x_grid, args.reps, args.seed,
            reference=reference,
            constants=constants,
            method=args.method or section.get('method'),
            confidence=args.confidence or section.get('confidence'),
            policy=SimPolicy.parse(ctx.config.section('sim').get('policy', 'fifo'), spec.k),
        )

        header = ['x', 'exceedances', 'p_hat', 'reference', 'ratio', 'lower', 'upper', 'one_sided', 'contains_d']
        rows = [[p.x, p.exceedances, p.p_hat, p.reference, p.ratio, p.lower, p.upper, str(p.one_sided).lower(),
                 str(p.contains_d).lower()] for p in ratio.points]
        ctx.write_table('tail', header, rows)

        summary = {
            'class': args.klass + 1,
            'd': ratio.d,
            'constants': constants.to_dict(),
            'reference': reference.to_dict(),
            'censored': ratio.censored,
            'containsD': [p.contains_d for p in ratio.points],
        }
        if spec.k == 1:
            summary['oneBigJump'] = np.asarray(mg1_tail_approximation(spec, x_grid)).tolist()

        ctx.write_json('tail-summary', summary)
        ctx.emit(summary)
        return EXIT_OK


def setup(app):
    app.add_command(Tail(app))
