from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Sequence[T], parallelism: int = 1) -> list[R]:
    """Map ``func`` over ``items``; results come back in input order whatever the worker count."""
    if parallelism is None or parallelism <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(parallelism)) as pool:
        return list(pool.map(func, items))
