import logging

import numpy as np

from queuelab.checks import HypothesisNotSatisfied
from queuelab.cli import EXIT_OK
from queuelab.command import Command, float_list
from queuelab.fluid import Policy, instability_witness, integrate, lyapunov_drain_time
from queuelab.model.offspring import StabilityReport, classify

logger = logging.getLogger(__name__)


class Fluid(Command):
    name = 'fluid'
    help = 'Integrate the fluid model exactly and compare its drain time with the Lyapunov drain time.'

    def add_arguments(self, parser):
        parser.add_argument('--q0', type=float_list, help='initial fluid levels, comma-separated (default all 1)')
        parser.add_argument('--policy', default='priority',
                            help='priority[:2,1,...] (1-based order) or in-turn (default: priority)')
        parser.add_argument('--horizon', type=float, default=100.0, help='integration horizon (default: 100)')

    def run(self, ctx) -> int:
        spec = ctx.spec
        q0 = np.ones(spec.k) if ctx.args.q0 is None else np.asarray(ctx.args.q0)
        if q0.shape != (spec.k,):
            raise ValueError(f'--q0 needs {spec.k} values')

        policy = Policy.parse(ctx.args.policy, spec.k)
        report = classify(spec, epsilon=ctx.config.section('stability').get('epsilon'))
        trajectory = integrate(spec, q0, policy, ctx.args.horizon,
                               max_breakpoints=ctx.config.section('fluid').get('max_breakpoints'))

        header = ['t', *(f'Q_{i + 1}' for i in range(spec.k)), 'Y']
        ctx.write_table('fluid', header, trajectory.csv_rows())

        summary = {
            'rho': report.rho,
            'verdict': report.verdict.value,
            'policy': trajectory.policy_name,
            'breakpoints': len(trajectory.breakpoints),
            'drainTime': trajectory.drain_time,
            'lyapunovDrainTime': None,
            'dynamicsResidual': trajectory.dynamics_residual(spec),
        }
        if report.verdict is StabilityReport.Verdict.STABLE:
            summary['lyapunovDrainTime'] = lyapunov_drain_time(spec, q0)
        elif report.verdict is StabilityReport.Verdict.UNSTABLE:
            try:
                summary['witness'] = instability_witness(spec).to_dict()
            except HypothesisNotSatisfied as error:
                logger.warning('No instability witness: %s', error.condition)
                summary['witness'] = None

        ctx.write_json('fluid-summary', summary)
        ctx.emit(summary)
        return EXIT_OK


def setup(app):
    app.add_command(Fluid(app))
