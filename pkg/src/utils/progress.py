import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Optional

from rich import box
from rich.console import Console
from rich.live import Live
from rich.table import Table
from rich.text import Text

console = Console(stderr=True)

# handler(task, candidate, status, timestamp)
Handler = Callable[[str, Optional[str], str, str], None]


@dataclass
class TaskRow:
    candidate: Optional[str] = None
    status: str = ""
    checked: int = 0
    rejected: int = 0
    began: float = 0.0


def _status_style(status: str) -> str:
    if status == "done":
        return "bold green"
    if status.startswith(("rejected", "removed")):
        return "red"
    return "yellow"


class SearchProgress:
    """Live view of running searches: one row per task with candidate counters and elapsed time.

    Handlers registered with register_handler see every update, whether or not the
    live view is running.
    """

    def __init__(self):
        self.rows: dict[str, TaskRow] = {}
        self.handlers: list[Handler] = []
        self.live: Live | None = None

    def register_handler(self, handler: Handler) -> Handler:
        self.handlers.append(handler)
        return handler

    def unregister_handler(self, handler: Handler) -> None:
        if handler in self.handlers:
            self.handlers.remove(handler)

    def start(self) -> None:
        if self.live is None:
            self.live = Live(self._render(), console=console, refresh_per_second=4, transient=True)
            self.live.start()

    def stop(self) -> None:
        if self.live is not None:
            self.live.stop()
            self.live = None
        self.rows.clear()

    def update_status(self, task: str, candidate: Optional[str] = None, status: str = "") -> None:
        row = self.rows.setdefault(task, TaskRow(began=time.monotonic()))
        if candidate and candidate != row.candidate:
            row.candidate = candidate
            row.checked += 1
        if status:
            row.status = status
            if status.startswith(("rejected", "removed")):
                row.rejected += 1

        timestamp = datetime.now(timezone.utc).isoformat()
        for handler in self.handlers:
            handler(task, candidate, status, timestamp)
        if self.live is not None:
            self.live.update(self._render())

    def _render(self) -> Table:
        table = Table(box=box.SIMPLE, header_style="bold")
        table.add_column("Task")
        table.add_column("Candidate", style="cyan")
        table.add_column("Checked", justify="right")
        table.add_column("Rejected", justify="right")
        table.add_column("Status")
        table.add_column("Elapsed", justify="right")
        now = time.monotonic()
        for task, row in sorted(self.rows.items()):
            table.add_row(task, row.candidate or "-", str(row.checked), str(row.rejected), Text(row.status, style=_status_style(row.status)), f"{now - row.began:.1f}s")
        return table


progress = SearchProgress()
