"""Per-iteration training records with a fixed CSV schema.

Every optimizer emits one row per iteration/generation.  wall_ms is modeled
hardware time (from the time-budget constants and the measurement ledger),
not host wall clock, so re-running an archived experiment reproduces the
trace byte for byte.  The diversity column is populated by the population
optimizer only and left empty otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

TRACE_HEADER = ("iter", "best_accuracy", "best_loss", "diversity",
                "cum_estimates", "cum_shots", "wall_ms")


class TrainingError(RuntimeError):
    """Raised when a backend failure interrupts an optimizer loop."""


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    best_accuracy: float
    best_loss: float
    diversity: float | None
    cum_estimates: int
    cum_shots: int
    wall_ms: float

    def as_csv(self) -> list[str]:
        return [
            str(self.iteration),
            repr(float(self.best_accuracy)),
            repr(float(self.best_loss)),
            "" if self.diversity is None else repr(float(self.diversity)),
            str(self.cum_estimates),
            str(self.cum_shots),
            repr(float(self.wall_ms)),
        ]


@dataclass
class TrainingTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, iteration: int, best_accuracy: float, best_loss: float,
               diversity: float | None, cum_estimates: int, cum_shots: int,
               wall_ms: float) -> None:
        if self.rows:
            last = self.rows[-1]
            if cum_estimates < last.cum_estimates or cum_shots < last.cum_shots:
                raise ValueError("cumulative counters must not decrease")
        self.rows.append(TraceRow(iteration, best_accuracy, best_loss, diversity,
                                  cum_estimates, cum_shots, wall_ms))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def final(self) -> TraceRow:
        if not self.rows:
            raise ValueError("trace is empty")
        return self.rows[-1]

    def accuracies(self) -> list[float]:
        return [r.best_accuracy for r in self.rows]

    def losses(self) -> list[float]:
        return [r.best_loss for r in self.rows]

    def estimates(self) -> list[int]:
        return [r.cum_estimates for r in self.rows]

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv())

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrainingTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_HEADER:
                raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
            for row in reader:
                trace.append(int(row[0]), float(row[1]), float(row[2]),
                             None if row[3] == "" else float(row[3]),
                             int(row[4]), int(row[5]), float(row[6]))
        return trace
