"""Benchmark progress state module"""
import threading
from typing import Dict, List, Tuple

from .run_status import RunStatus

Cell = Tuple[str, int]


class RunState:
    """State of the (method, seed) cells of one benchmark.

    Cells complete on worker threads, so completion is guarded by a lock.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._pending: List[Cell] = list()
        self._completed: Dict[Cell, Tuple[RunStatus, str]] = dict()

    def add_pending(self, method: str, seed: int) -> None:
        """Adds a pending cell to the state."""
        with self._lock:
            self._pending.append((method, seed))

    def pending(self) -> List[Cell]:
        """Returns a copy of the pending cells."""
        with self._lock:
            return list(self._pending)

    def complete(self, method: str, seed: int, status: RunStatus, description: str) -> None:
        """Moves a cell from pending to completed."""
        with self._lock:
            self._completed[(method, seed)] = status, description
            if (method, seed) in self._pending:
                self._pending.remove((method, seed))

    def get_status(self, method: str, seed: int) -> RunStatus:
        """Returns the status of a cell, `Unknown` while it has not completed."""
        with self._lock:
            if (method, seed) not in self._completed:
                return RunStatus.Unknown
            return self._completed[(method, seed)][0]

    def all_succeeded(self) -> bool:
        """Whether nothing is pending and every completed cell succeeded."""
        with self._lock:
            return not self._pending and all(status for status, _ in self._completed.values())
