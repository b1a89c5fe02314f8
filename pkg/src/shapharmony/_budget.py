from __future__ import annotations

import time


class BudgetExceeded(RuntimeError):
    """A cooperative wall-clock deadline passed."""


def check(deadline: float | None) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("wall-clock budget exhausted")
