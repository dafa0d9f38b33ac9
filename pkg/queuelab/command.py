__all__ = ['Command', 'float_list', 'class_index']

import argparse


class Command:
    """One subcommand. Subclasses set ``name`` and ``help`` and implement :meth:`run`."""

    name: str = None
    help: str = None

    #: Stochastic commands take a mandatory ``--seed``.
    stochastic = False

    #: Commands that sample busy periods need a restartable model (some lambda0 > 0).
    sampling = False

    def __init__(self, app):
        self.app = app

    @property
    def config(self):
        return self.app.config

    def needs_restart(self, args: argparse.Namespace) -> bool:
        """Whether this run samples busy periods that start from the empty system."""
        return self.sampling

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        pass

    def run(self, ctx) -> int:
        raise NotImplementedError


def float_list(text: str):
    """argparse type for comma-separated numbers such as ``1,0.5``."""
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}') from None


def class_index(text: str) -> int:
    """argparse type for a 1-based class number; returns the 0-based index."""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a class number, got {text!r}') from None
    if value < 1:
        raise argparse.ArgumentTypeError('classes are numbered from 1')
    return value - 1
