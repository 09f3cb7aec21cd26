__all__ = ["WindowCache", "collection_fingerprint"]

import logging
import os
import re

from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from globalrnn.constants import CACHE_ENV_VAR, WINDOW_CACHE_MAGIC
from globalrnn.exceptions import CacheError
from globalrnn.preprocess import preprocess_series
from globalrnn.serialization import read_container, write_container
from globalrnn.types import (
    NormalizationRecord,
    Pipeline,
    SeriesCollection,
    Stage,
    WindowBlock,
    WindowSet,
)
from globalrnn.utils import hash_key


logger = logging.getLogger(__name__)


def collection_fingerprint(collection: SeriesCollection) -> str:
    """Stable key over ids, settings and values of every series"""
    parts = [collection.name, collection.period, collection.integer_valued]
    for item in collection:
        parts.extend(
            (item.id, item.horizon, item.start_index, hash_key(item.values.tobytes().hex()))
        )
    return hash_key(*parts, length=12)


def _encode(window_set: WindowSet, pipeline: Pipeline):
    blocks = window_set.blocks
    n = window_set.n
    nan_row = np.full(n, np.nan)
    records = [block.record for block in blocks]
    arrays = {
        "input": np.stack([block.input for block in blocks]),
        "target": np.stack([nan_row if b.target is None else b.target for b in blocks]),
        "has_target": np.array([b.target is not None for b in blocks]),
        "start": np.array([b.start for b in blocks], dtype=np.int64),
        "log_offset": np.array([r.log_offset for r in records], dtype=np.int64),
        "anchor": np.array(
            [np.nan if r.trend_anchor is None else r.trend_anchor for r in records]
        ),
        "mean": np.array([np.nan if r.series_mean is None else r.series_mean for r in records]),
        "seasonal": np.stack(
            [nan_row if r.seasonal_future is None else r.seasonal_future for r in records]
        ),
    }
    meta = {
        "series_id": window_set.series_id,
        "m": window_set.m,
        "n": n,
        "stage": window_set.stage.value,
        "moving_window": window_set.moving_window,
        "integer_valued": window_set.integer_valued,
        "pipeline": pipeline.value,
    }
    return meta, arrays


def _decode(meta: dict, arrays: dict) -> WindowSet:
    pipeline = Pipeline(meta["pipeline"])
    blocks = []
    for i in range(arrays["input"].shape[0]):
        if pipeline is Pipeline.STL:
            record = NormalizationRecord(
                pipeline=pipeline,
                log_offset=int(arrays["log_offset"][i]),
                trend_anchor=float(arrays["anchor"][i]),
                seasonal_future=arrays["seasonal"][i].copy(),
            )
        else:
            record = NormalizationRecord(
                pipeline=pipeline,
                log_offset=int(arrays["log_offset"][i]),
                series_mean=float(arrays["mean"][i]),
            )
        blocks.append(
            WindowBlock(
                input=arrays["input"][i].copy(),
                target=arrays["target"][i].copy() if arrays["has_target"][i] else None,
                record=record,
                start=int(arrays["start"][i]),
            )
        )
    return WindowSet(
        series_id=meta["series_id"],
        blocks=blocks,
        m=int(meta["m"]),
        n=int(meta["n"]),
        stage=Stage(meta["stage"]),
        moving_window=bool(meta["moving_window"]),
        integer_valued=bool(meta["integer_valued"]),
    )


class WindowCache:
    def __init__(self, cache_path: Union[str, Path, None] = None, clean: bool = False) -> None:
        """Binary cache of preprocessed windows

        Parameters:
        ----------
            - cache_path (`Union[str, Path, None]`, optional): Cache directory, `FORECAST_CACHE_DIR` wins when set. (Defaults to `"cache"`)
            - clean (`bool`, optional): Drop existing cache files. (Defaults to `False`)
        """
        self.path = Path(os.environ.get(CACHE_ENV_VAR) or cache_path or "cache")
        if self.path.is_file():
            raise CacheError(f"'{self.path}' expected a Directory got a File instead")
        self.path.mkdir(parents=True, exist_ok=True)
        if clean:
            for old in self.path.rglob("*.win"):
                old.unlink()

    def directory(
        self,
        collection: SeriesCollection,
        pipeline: Pipeline,
        m: int,
        n: int,
        moving_window: bool = True,
    ) -> Path:
        layout = "mw" if moving_window else "seq"
        name = re.sub(r"[^\w.-]", "_", collection.name)
        return self.path / (
            f"{name}_{pipeline.value}_m{m}_n{n}_{layout}_{collection_fingerprint(collection)}"
        )

    @staticmethod
    def file_name(series_id: str, stage: Stage, context: bool = False) -> str:
        safe = re.sub(r"[^\w.-]", "_", series_id)
        suffix = "-context" if context else ""
        return f"{safe}-{hash_key(series_id, length=6)}.{stage.value}{suffix}.win"

    def load(self, path: Path) -> Optional[WindowSet]:
        if not path.is_file():
            return None
        try:
            meta, arrays = read_container(path, WINDOW_CACHE_MAGIC)
            return _decode(meta, arrays)
        except (CacheError, KeyError, ValueError) as e:
            # Corrupt cache file
            logger.warning("Dropping unreadable cache file %s: %s", path, e)
            path.unlink(missing_ok=True)
            return None

    def save(self, path: Path, window_set: WindowSet, pipeline: Pipeline) -> Path:
        meta, arrays = _encode(window_set, pipeline)
        return write_container(path, WINDOW_CACHE_MAGIC, meta, arrays)

    def get_or_build(
        self,
        collection: SeriesCollection,
        pipeline: Union[str, Pipeline],
        m: int,
        stage: Union[str, Stage],
        moving_window: bool = True,
        context: bool = False,
    ) -> List[WindowSet]:
        """Windows of every series for one stage, built on cache miss

        Returns:
        -------
            `List[WindowSet]`: In collection order.
        """
        pipeline, stage = Pipeline(pipeline), Stage(stage)
        folder = self.directory(collection, pipeline, m, collection.horizon, moving_window)
        result, built = [], 0
        for item in collection:
            path = folder / self.file_name(item.id, stage, context)
            window_set = self.load(path)
            if window_set is None:
                window_set = preprocess_series(
                    item, pipeline, m, item.horizon, stage, moving_window, context
                )
                self.save(path, window_set, pipeline)
                built += 1
            result.append(window_set)
        logger.debug(
            "%s/%s: %d cached, %d built", collection.name, stage.value, len(result) - built, built
        )
        return result
