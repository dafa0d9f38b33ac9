from queuelab.cli import EXIT_OK, EXIT_VALIDATION
from queuelab.command import Command
from queuelab.model.spec import read_record, validate


class Validate(Command):
    name = 'validate'
    help = 'Check a model file and list every violation.'

    def run(self, ctx) -> int:
        record, ctx.model_digest = read_record(ctx.args.model)
        result = validate(record)

        ctx.emit({
            'ok': result.ok,
            'violations': [
                {'code': v.code, 'message': v.message, 'samplingOnly': v.sampling_only} for v in result.violations
            ],
        })
        return EXIT_OK if result.ok else EXIT_VALIDATION


def setup(app):
    app.add_command(Validate(app))
