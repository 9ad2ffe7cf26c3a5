"""
Parallel Map-Reduce - Solver
Fan-out over path indices and index-ordered reductions. Results are
collected in path-index order and summed by a fixed pairwise tree, so the
worker count changes wall time only.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

import numpy as np
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

T = TypeVar('T')

WORKERS_ENV = "STOCHLAB_WORKERS"


def worker_count(default: int = 1) -> int:
    """Worker count from the environment (.env honoured)."""
    load_dotenv()
    raw = os.getenv(WORKERS_ENV)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"ignoring non-integer {WORKERS_ENV}={raw!r}")
        return default


def map_paths(fn: Callable[[int], T], indices: Iterable[int], workers: Optional[int] = None) -> List[T]:
    """Apply fn to every path index; output order equals input order."""
    indices = list(indices)
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(indices) < 2:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


def pairwise_sum(stack: np.ndarray) -> np.ndarray:
    """Sum along axis 0 by a balanced binary tree in index order."""
    n = stack.shape[0]
    if n == 0:
        return np.zeros(stack.shape[1:])
    if n == 1:
        return stack[0].copy()
    if n == 2:
        return stack[0] + stack[1]
    half = n // 2
    return pairwise_sum(stack[:half]) + pairwise_sum(stack[half:])


def mean_and_se(stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error (std / sqrt(n), ddof=1) along axis 0."""
    stack = np.asarray(stack, dtype=float)
    n = stack.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    mean = pairwise_sum(stack) / n
    se = np.zeros_like(mean)
    if n >= 2:
        var = pairwise_sum((stack - mean) ** 2) / (n - 1)
        se = np.sqrt(var / n)
    # columns where every path agrees are reported exactly
    flat = np.all(stack == stack[0], axis=0)
    mean = np.where(flat, stack[0], mean)
    se = np.where(flat, 0.0, se)
    return mean, se
