"""Independent task execution for bootstrap and replication loops.

Results are returned in task order whatever the completion order, so the
output of a run does not depend on the number of workers.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

try:  # pragma: no cover - optional dependency
    from tqdm import tqdm
except ImportError:  # pragma: no cover - fallback when tqdm is absent
    def tqdm(iterable=None, **kwargs):  # type: ignore
        return iterable

from .errors import CfsurvError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskOutcome:
    index: int
    value: Any = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _guarded(func: Callable[[Any], Any], index: int, task: Any) -> TaskOutcome:
    """Run one task, turning estimation failures into a recorded outcome."""

    try:
        return TaskOutcome(index=index, value=func(task))
    except (CfsurvError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return TaskOutcome(index=index, error=f"{type(exc).__name__}: {exc}")


def run_tasks(
    func: Callable[[Any], Any],
    tasks: Sequence[Any],
    threads: int = 1,
    desc: str = "tasks",
    progress: bool = True,
) -> list[TaskOutcome]:
    """Apply ``func`` to every task, in worker processes when ``threads > 1``.

    ``func`` must be a module-level callable so it can be pickled.
    """

    n_tasks = len(tasks)
    outcomes: list[Optional[TaskOutcome]] = [None] * n_tasks
    if threads <= 1 or n_tasks <= 1:
        for i, task in enumerate(tqdm(tasks, desc=desc, disable=not progress)):
            outcomes[i] = _guarded(func, i, task)
    else:
        LOGGER.info("Distributing %d %s across %d workers", n_tasks, desc, threads)
        bar = tqdm(total=n_tasks, desc=desc, disable=not progress)
        with ProcessPoolExecutor(max_workers=threads) as executor:
            futures = {executor.submit(_guarded, func, i, task): i for i, task in enumerate(tasks)}
            for future in as_completed(futures):
                outcome = future.result()
                outcomes[outcome.index] = outcome
                if bar is not None:
                    bar.update(1)
        if bar is not None:
            bar.close()

    failures = [o for o in outcomes if o is not None and not o.ok]
    for outcome in failures:
        LOGGER.warning("Task %d of %s failed: %s", outcome.index, desc, outcome.error)
    return [o for o in outcomes if o is not None]


__all__ = ["TaskOutcome", "run_tasks"]
