import logging

from queuelab.cli import EXIT_OK
from queuelab.command import Command
from queuelab.model.offspring import classify, k2_stability_condition, offspring_matrix
from queuelab.utils import Table

logger = logging.getLogger(__name__)


class Stability(Command):
    name = 'stability'
    help = 'Compute rho(M) and classify the model as Stable, Boundary or Unstable.'

    def add_arguments(self, parser):
        parser.add_argument('--epsilon', type=float, help='half-width of the Boundary band around rho = 1')

    def run(self, ctx) -> int:
        spec = ctx.spec
        epsilon = ctx.args.epsilon
        if epsilon is None:
            epsilon = ctx.config.section('stability').get('epsilon')

        report = classify(spec, epsilon=epsilon)
        offspring = offspring_matrix(spec)
        payload = {
            **report.to_dict(),
            'explanation': report.explanation,
            'm': offspring.m.tolist(),
        }
        if spec.k == 2:
            holds, radical = k2_stability_condition(spec)
            payload['k2Radical'] = {'value': radical, 'atMostOne': holds}

        table = Table('M', *(str(j + 1) for j in range(spec.k)))
        table.add_rows(*([str(i + 1), *row] for i, row in enumerate(offspring.m.tolist())))
        logger.info('offspring matrix:\n%s', table.render())

        ctx.write_json('stability', payload)
        ctx.emit(payload)
        return EXIT_OK


def setup(app):
    app.add_command(Stability(app))
