"""Formatting helpers for result files and log tables."""
import csv
import io
import json
import math
from typing import Iterable, List, Sequence

__all__ = ('Table', 'format_number', 'dumps_json', 'render_csv', 'jsonable')


def format_number(value) -> str:
    """Render a float the same way on every run: shortest round-trip repr, ``inf``/``nan`` spelled out."""
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(value)


def jsonable(value):
    """Convert numpy scalars/arrays and tuples into plain JSON types; non-finite floats become strings."""
    if hasattr(value, 'tolist'):
        value = value.tolist()
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return format_number(value)
    return value


def dumps_json(payload) -> str:
    return json.dumps(jsonable(payload), sort_keys=True, indent=2) + '\n'


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(value) if not isinstance(value, str) else value for value in row])
    return buffer.getvalue()


class Table:
    def __init__(self, *column_titles: str):
        self._rows = [column_titles]
        self._widths = []

        for _, entry in enumerate(column_titles):
            self._widths.append(len(entry))

    def _update_widths(self, row: tuple):
        for index, entry in enumerate(row):
            width = len(entry)
            if width > self._widths[index]:
                self._widths[index] = width

    def add_row(self, *row: str):
        """
        Add a row to the table.

        .. note :: There's no check for the number of items entered, this may cause issues rendering if not correct.
        """
        row = tuple(entry if isinstance(entry, str) else format_number(entry) for entry in row)
        self._rows.append(row)
        self._update_widths(row)

    def add_rows(self, *rows: List[str]):
        for row in rows:
            self.add_row(*row)

    def render(self) -> str:
        def draw_row(row_):
            columns = []

            for index, field in enumerate(row_):
                # numbers get aligned to the right
                if _is_number(field):
                    columns.append(f" {field:>{self._widths[index]}} ")
                    continue

                columns.append(f" {field:<{self._widths[index]}} ")

            return "|".join(columns)

        # column title is centered in the middle of each field
        title_row = "|".join(f" {field:^{self._widths[index]}} " for index, field in enumerate(self._rows[0]))
        separator_row = "+".join("-" * (width + 2) for width in self._widths)

        drawn = [title_row, separator_row]
        for row in self._rows[1:]:
            drawn.append(draw_row(row))

        return "\n".join(drawn)


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True
