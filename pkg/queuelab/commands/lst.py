from queuelab.cli import EXIT_OK
from queuelab.command import Command
from queuelab.lst import default_thetas, moments_from_lst, solve_fixed_point
from queuelab.model.offspring import StabilityReport, classify


class Lst(Command):
    name = 'lst'
    help = 'Solve the busy-period transform fixed point on a geometric theta grid.'

    def add_arguments(self, parser):
        parser.add_argument('--theta-min', type=float)
        parser.add_argument('--theta-max', type=float)
        parser.add_argument('--points', type=int)
        parser.add_argument('--tol', type=float)

    def run(self, ctx) -> int:
        spec = ctx.spec
        section = ctx.config.section('lst')
        args = ctx.args

        thetas = default_thetas(
            args.theta_min if args.theta_min is not None else section.get('theta_min'),
            args.theta_max if args.theta_max is not None else section.get('theta_max'),
            args.points if args.points is not None else section.get('points'),
        )
        grid = solve_fixed_point(spec, thetas, tol=args.tol if args.tol is not None else section.get('tol'),
                                 max_iter=section.get('max_iter'))
        ctx.write_table('lst', grid.csv_header(), grid.csv_rows())

        summary = {
            'points': len(grid.thetas),
            'maxIterations': int(grid.iterations.max()),
            'maxResidual': float(grid.residual.max()),
            'nonIncreasing': grid.non_increasing,
            'moments': None,
        }
        if classify(spec).verdict is StabilityReport.Verdict.STABLE:
            summary['moments'] = moments_from_lst(spec, section.get('moment_step'),
                                                  section.get('moment_levels')).to_dict()

        ctx.write_json('lst-summary', summary)
        ctx.emit(summary)
        return EXIT_OK


def setup(app):
    app.add_command(Lst(app))
