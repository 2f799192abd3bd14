"""Step budgets shared by every evaluator, plus a deep-stack runner."""

from __future__ import annotations

import sys
import threading
from typing import Callable, TypeVar

T = TypeVar("T")

DEFAULT_FUEL = 10**6


class FuelExhausted(Exception):
    """The step budget ran out.  Signals possible divergence, not an error."""

    def __init__(self, budget: int):
        super().__init__(f"fuel exhausted after {budget} steps")
        self.budget = budget


class Fuel:
    __slots__ = ("budget", "used")

    def __init__(self, budget: int = DEFAULT_FUEL):
        if budget <= 0:
            raise ValueError("fuel budget must be positive")
        self.budget = budget
        self.used = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.budget:
            raise FuelExhausted(self.budget)

    @property
    def remaining(self) -> int:
        return max(self.budget - self.used, 0)

    @classmethod
    def coerce(cls, fuel: "Fuel | int | None") -> "Fuel":
        if isinstance(fuel, Fuel):
            return fuel
        return cls(DEFAULT_FUEL if fuel is None else fuel)


def run_deep(fn: Callable[..., T], *args, stack_mb: int = 1024, **kwargs) -> T:
    """Run ``fn`` on a thread with a large C stack and recursion limit.

    The muJava evaluator recurses on non-tail positions, so a long
    divergent run at the default fuel needs far more depth than CPython's
    main thread allows.
    """
    result: list = []
    error: list = []

    def target():
        try:
            result.append(fn(*args, **kwargs))
        except BaseException as exc:  # re-raised on the caller's thread
            error.append(exc)

    old_limit = sys.getrecursionlimit()
    old_size = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, 4_000_000))
    threading.stack_size(stack_mb * 1024 * 1024)
    try:
        worker = threading.Thread(target=target)
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if error:
        raise error[0]
    return result[0]
