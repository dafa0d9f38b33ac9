"""Append-only event log.

One line per event: ``t<TAB>kind<TAB>class<TAB>q_1,...,q_K`` where kind is ``A`` (arrival),
``S`` (service start), ``D`` (departure) or ``I`` (server goes idle, class 0). Classes are 1-based.
"""
import enum
import logging

logger = logging.getLogger(__name__)


class Event(enum.Enum):
    ARRIVAL = 'A'
    START = 'S'
    DEPARTURE = 'D'
    IDLE = 'I'


class EventLog:
    def __init__(self, path: str):
        self.path = path
        self.lines = 0
        self._file = None

    def __enter__(self):
        self._file = open(self.path, 'a', encoding='utf-8', newline='\n')
        logger.debug('Writing event log to %s', self.path)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._file.close()
        self._file = None

    def write(self, t: float, event: Event, klass: int, queue) -> None:
        """``klass`` is 0-based (``-1`` for idle); the line carries it 1-based."""
        self._file.write(f'{t!r}\t{event.value}\t{klass + 1}\t{",".join(str(int(q)) for q in queue)}\n')
        self.lines += 1


def parse_line(line: str):
    """Inverse of :meth:`EventLog.write`: ``(t, Event, class (1-based), queue tuple)``."""
    t, kind, klass, queue = line.rstrip('\n').split('\t')
    return float(t), Event(kind), int(klass), tuple(int(q) for q in queue.split(','))
