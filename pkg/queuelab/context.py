import argparse
import logging
import os
import sys
from time import monotonic
from typing import Iterable, List, Optional, Sequence

from queuelab import __version__
from queuelab.model.spec import ModelSpec, read_record, validate
from queuelab.utils.formatting import dumps_json, render_csv

logger = logging.getLogger(__name__)


class Timer:
    """Wall-clock span of a command; logged, never written to the manifest."""

    def __init__(self):
        self.begin: float = None
        self.end: float = None

    @property
    def duration(self) -> float:
        return self.end - self.begin

    def __enter__(self):
        self.begin = monotonic()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end = monotonic()

    def __str__(self):
        return f"{round(self.duration * 1000, 2)}ms"


class RunContext:
    """State of one CLI invocation: parsed flags, the model, and the files written so far."""

    def __init__(self, app, command, args: argparse.Namespace):
        self.app = app
        self.command = command
        self.args = args
        self.output_dir = args.output_dir or app.config.section('output').get('directory', 'out')
        self.format = args.format or app.config.section('output').get('format', 'csv')
        self.outputs: List[str] = []
        self.model_digest = None
        self.exit_code: Optional[int] = None
        self._spec = None

    @property
    def config(self):
        return self.app.config

    @property
    def seed(self):
        return getattr(self.args, 'seed', None)

    @property
    def spec(self) -> ModelSpec:
        if self._spec is None:
            self._spec = self.load_model()
        return self._spec

    def load_model(self) -> ModelSpec:
        """Read and validate the model file; only violations that matter for this command are fatal."""
        record, self.model_digest = read_record(self.args.model)
        result = validate(record)
        blocking = result.blocking(sampling=self.command.needs_restart(self.args))
        if blocking:
            raise ModelSpec.Invalid(blocking)

        for violation in result.violations:
            logger.warning('Model %s: %s', self.args.model, violation)
        return ModelSpec.from_record(record)

    def _path(self, name: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)

    def write_text(self, name: str, text: str) -> str:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='\n') as output:
            output.write(text)
        self.outputs.append(name)
        logger.debug('Wrote %s', path)
        return path

    def write_json(self, name: str, payload) -> str:
        return self.write_text(f'{name}.json', dumps_json(payload))

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        """Write a table in the configured ``--format``."""
        if self.format == 'json':
            return self.write_json(name, [dict(zip(header, row)) for row in rows])
        return self.write_text(f'{name}.csv', render_csv(header, rows))

    def emit(self, payload) -> None:
        """Print a result summary on standard output."""
        sys.stdout.write(dumps_json(payload))

    def manifest(self) -> dict:
        flags = {key: value for key, value in sorted(vars(self.args).items())
                 if key not in ('command', 'output_dir')}
        return {
            'modelDigest': self.model_digest,
            'subcommand': self.command.name,
            'flags': flags,
            'seed': self.seed,
            'version': __version__,
            'outputs': sorted(self.outputs),
            'exitCode': self.exit_code,
        }

    def run(self) -> int:
        with Timer() as timer:
            code = self.command.run(self)
        logger.info('%s ran in %s', self.command.name, timer)
        return code

    def finish(self, code: Optional[int]) -> None:
        """Write ``manifest.json``, also after a failed run; ``code`` is None for an unhandled error."""
        self.exit_code = code
        try:
            path = self._path('manifest.json')
            with open(path, 'w', encoding='utf-8', newline='\n') as output:
                output.write(dumps_json(self.manifest()))
        except OSError as error:
            logger.error('Could not write the manifest: %s', error)
            return
        logger.info('%s finished with exit code %s, outputs: %s', self.command.name, code,
                    ', '.join(self.outputs) or 'none')
