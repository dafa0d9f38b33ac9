"""Formatting helpers and user-facing message texts shared by the commands."""

from .formatting import Table, dumps_json, format_number, jsonable, render_csv
from . import messages

__all__ = ('Table', 'dumps_json', 'format_number', 'jsonable', 'render_csv', 'messages')
