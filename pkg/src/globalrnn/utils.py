__all__ = [
    "run_sync",
    "run_jobs",
    "sublists",
    "time_formater",
    "hash_key",
    "derive_seed",
    "round_half_away",
]

import asyncio
import hashlib
import logging

from concurrent.futures import ProcessPoolExecutor
from datetime import timedelta
from functools import partial, wraps
from typing import Any, Awaitable, Callable, List, Sequence, TypeVar, Union

import numpy as np


T = TypeVar("T")
R = TypeVar("R")
logger = logging.getLogger(__name__)


def run_sync(func: Callable[..., Any]) -> Callable[..., Awaitable[Any]]:
    """Runs the given sync function (optionally with arguments) on a separate thread."""

    @wraps(func)
    async def wrapper(*args: Any, **kwargs: Any):
        return await asyncio.get_running_loop().run_in_executor(
            None, partial(func, *args, **kwargs)
        )

    return wrapper


async def run_jobs(
    func: Callable[..., R], items: Sequence[Any], jobs: int = 1, **kwargs: Any
) -> List[R]:
    """Map `func` over `items` on up to `jobs` worker processes

    Parameters:
    ----------
        - func (`Callable`): Module level (picklable) function, called as `func(item, **kwargs)`.
        - items (`Sequence[Any]`): One job per item.
        - jobs (`int`, optional): Worker processes, `1` runs on a single thread. (Defaults to `1`)

    Returns:
    -------
        `List[R]`: Results in the order of `items`, whatever the completion order.
    """
    if jobs <= 1 or len(items) <= 1:
        return await run_sync(lambda: [func(item, **kwargs) for item in items])()
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        futures = [
            loop.run_in_executor(pool, partial(func, item, **kwargs)) for item in items
        ]
        return list(await asyncio.gather(*futures))


def sublists(input_list: List[Any], width: int = 3) -> List[List[Any]]:
    """retuns a single list of multiple sublist of fixed width"""
    return [input_list[x : x + width] for x in range(0, len(input_list), width)]


def time_formater(value: Union[timedelta, int, float], precision: int = 0) -> str:
    """Format Time to Human readable format

    Parameters:
    ----------
        - value (`Union[timedelta, int, float]`): Pass either a `~time.timedelta` or seconds.
        - precision (`int`, optional): Number of units to keep. (Defaults to `0`)

    Returns:
    -------
        `str`
    """
    pieces = []
    if not isinstance(value, timedelta):
        value = timedelta(seconds=int(value))
    if value.days:
        pieces.append(f"{value.days}d")

    seconds = value.seconds

    if seconds >= 3600:
        hours = int(seconds / 3600)
        pieces.append(f"{hours}h")
        seconds -= hours * 3600

    if seconds >= 60:
        minutes = int(seconds / 60)
        pieces.append(f"{minutes}m")
        seconds -= minutes * 60

    if seconds > 0 or not pieces:
        pieces.append(f"{seconds}s")

    if precision == 0:
        return " ".join(pieces)

    return " ".join(pieces[:precision])


def hash_key(*parts: Any, length: int = 10) -> str:
    """Short stable key for a tuple of values"""
    text = "|".join(map(str, parts))
    return hashlib.sha1(text.encode(encoding="UTF-8")).hexdigest()[:length]


def derive_seed(root: int, *labels: Union[int, str]) -> int:
    """Counter based seed splitter

    Every (root, labels) pair maps to its own independent 32 bit seed, so one
    root seed reproduces every random stream of a study.
    """
    spawn_key = tuple(
        label if isinstance(label, int) else int(hash_key(label, length=8), 16)
        for label in labels
    )
    sequence = np.random.SeedSequence(entropy=int(root), spawn_key=spawn_key)
    return int(sequence.generate_state(1)[0])


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to the closest integer, halves away from zero"""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)
