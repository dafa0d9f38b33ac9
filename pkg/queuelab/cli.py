"""Command-line application: discovers the subcommands in ``queuelab/commands`` and dispatches to them."""
import argparse
import importlib
import logging
import sys
import typing
from pathlib import Path

from queuelab import __version__
from queuelab.command import Command
from queuelab.config import Config, config_from_file
from queuelab.context import RunContext

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


class Analyzer:
    def __init__(self, config: Config = None):
        self.config = config or Config()

        #: Registered subcommands by name.
        self.commands: typing.Dict[str, Command] = {}

        #: Called with (app, exception) for every failure; set by the errors module.
        self.error_handler: typing.Callable[['Analyzer', BaseException], int] = None

    def add_command(self, command: Command):
        self.commands[command.name] = command

    def discover_commands(self, directory: str = None):
        """Loads all command modules from a directory."""
        directory = directory or Path(__file__).parent / 'commands'
        ignore = {'__pycache__', '__init__'}

        modules = sorted(
            p.stem for p in Path(directory).resolve().iterdir()
            if p.stem not in ignore and p.suffix == '.py'
        )

        logger.debug('Loading command modules: %s', modules)

        for name in modules:
            importlib.import_module('queuelab.commands.' + name).setup(self)

    def build_parser(self) -> argparse.ArgumentParser:
        parser = _Parser(prog='queuelab', description='Analyze a queue whose arrival rates depend on the class '
                                                      'in service.')
        parser.add_argument('--version', action='version', version=f'queuelab {__version__}')
        parser.add_argument('--config', help='YAML file overriding the default tolerances and caps')
        parser.add_argument('--output-dir', help='directory for result files and manifest.json')
        parser.add_argument('--format', choices=('json', 'csv'), help='format of result tables')

        subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=_Parser)
        subparsers.required = True
        for name, command in sorted(self.commands.items()):
            sub = subparsers.add_parser(name, help=command.help, description=command.help)
            sub.add_argument('model', help='model file (JSON or YAML)')
            if command.stochastic:
                sub.add_argument('--seed', type=int, required=True, help='root seed of every random stream')
            command.add_arguments(sub)
        return parser

    def invoke(self, argv: typing.Sequence[str]) -> int:
        parser = self.build_parser()
        try:
            args = parser.parse_args(list(argv))
        except UsageError as error:
            sys.stderr.write(f'{error.usage}queuelab: error: {error}\n')
            return EXIT_USAGE

        if args.config:
            self.config = config_from_file(args.config)

        for name, level in self.config.section('logging').items():
            logging.getLogger(name).setLevel(level)

        command = self.commands[args.command]
        ctx = RunContext(self, command, args)
        code = None
        try:
            code = ctx.run()
            return code
        except Exception as error:
            if self.error_handler is None:
                raise
            code = self.error_handler(self, error)
            return code
        finally:
            ctx.finish(code)


def main(argv: typing.Sequence[str] = None) -> int:
    app = Analyzer()
    app.discover_commands()
    return app.invoke(sys.argv[1:] if argv is None else argv)
