"""Time/energy ledger split into intermittent-computing categories.

Backup is the continual saving of architectural state (program counters,
parity bit, stored activation word).  Dead energy is work re-performed
because a power cut lost the in-flight instruction.  Restore energy is
restart preparation, i.e. re-issuing the stored activation instruction.
Everything else is productive.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, field


class Category(enum.Enum):
    PRODUCTIVE = "productive"
    BACKUP = "backup"
    DEAD = "dead"
    RESTORE = "restore"


class MetricsError(ValueError):
    pass


@dataclass
class EnergyLedger:
    """Totals in seconds and joules.  total_e always equals the sum of the
    four category buckets; total_t includes idle and powered-off time."""

    total_t: float = 0.0
    restore_t: float = 0.0
    productive_e: float = 0.0
    backup_e: float = 0.0
    dead_e: float = 0.0
    restore_e: float = 0.0
    instructions: int = 0
    reexecuted: int = 0
    restarts: int = 0

    @property
    def total_e(self) -> float:
        return self.productive_e + self.backup_e + self.dead_e + self.restore_e

    def charge(self, category: Category, energy: float, time: float = 0.0) -> None:
        if energy < 0 or time < 0:
            raise MetricsError("charges must be non-negative")
        if category is Category.PRODUCTIVE:
            self.productive_e += energy
        elif category is Category.BACKUP:
            self.backup_e += energy
        elif category is Category.DEAD:
            self.dead_e += energy
        elif category is Category.RESTORE:
            self.restore_e += energy
            self.restore_t += time
        else:
            raise MetricsError(f"unknown category {category!r}")
        self.total_t += time

    def advance(self, time: float) -> None:
        """Account idle or powered-off wall-clock time (consumes no energy)."""
        if time < 0:
            raise MetricsError("time must be non-negative")
        self.total_t += time

    def merge(self, other: "EnergyLedger") -> None:
        self.total_t += other.total_t
        self.restore_t += other.restore_t
        self.productive_e += other.productive_e
        self.backup_e += other.backup_e
        self.dead_e += other.dead_e
        self.restore_e += other.restore_e
        self.instructions += other.instructions
        self.reexecuted += other.reexecuted
        self.restarts += other.restarts


REPORT_COLUMNS = ["Duty", "TotalT", "RestoreT", "TotalE",
                  "BackupE", "DeadE", "RestoreE"]
COUNT_COLUMNS = ["Instructions", "Reexecuted", "Restarts"]

_US = 1e6  # report times in microseconds, energies in microjoules
_UJ = 1e6


def _row(duty: float, ledger: EnergyLedger) -> dict:
    return {
        "Duty": duty,
        "TotalT": ledger.total_t * _US,
        "RestoreT": ledger.restore_t * _US,
        "TotalE": ledger.total_e * _UJ,
        "BackupE": ledger.backup_e * _UJ,
        "DeadE": ledger.dead_e * _UJ,
        "RestoreE": ledger.restore_e * _UJ,
        "Instructions": ledger.instructions,
        "Reexecuted": ledger.reexecuted,
        "Restarts": ledger.restarts,
    }


def report(rows: list[tuple[float, EnergyLedger]], fmt: str = "csv") -> str:
    """Render runs as CSV or JSON.  Times in us, energies in uJ;
    deterministic field order."""
    dicts = [_row(duty, ledger) for duty, ledger in rows]
    if fmt == "json":
        return json.dumps(dicts, indent=2) + "\n"
    if fmt != "csv":
        raise MetricsError(f"unknown report format {fmt!r}")
    out = io.StringIO()
    columns = REPORT_COLUMNS + COUNT_COLUMNS
    out.write(",".join(columns) + "\n")
    for d in dicts:
        out.write(",".join(repr(d[c]) if isinstance(d[c], float) else str(d[c])
                           for c in columns) + "\n")
    return out.getvalue()
