__all__ = ["write_container", "read_container"]

import io
import json
import logging
import os
import struct

from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from globalrnn.constants import CONTAINER_VERSION
from globalrnn.exceptions import CacheError


logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<IQ")


def write_container(
    path: Union[str, Path],
    magic: bytes,
    meta: Dict[str, Any],
    arrays: Dict[str, np.ndarray],
) -> Path:
    """Write a versioned binary container

    Layout: `magic`, little endian uint32 version, uint64 meta length, sorted
    key JSON meta, then every array in name order as an `.npy` record.
    The same inputs always produce the same bytes.

    Parameters:
    ----------
        - path (`Union[str, Path]`): Destination file, written atomically.
        - magic (`bytes`): Eight byte file signature.
        - meta (`Dict[str, Any]`): JSON serialisable metadata.
        - arrays (`Dict[str, np.ndarray]`): Named arrays.

    Returns:
    -------
        `Path`
    """
    path = Path(path)
    names = sorted(arrays)
    body = dict(meta, arrays=names)
    meta_bytes = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buffer = io.BytesIO()
    buffer.write(magic)
    buffer.write(_HEADER.pack(CONTAINER_VERSION, len(meta_bytes)))
    buffer.write(meta_bytes)
    for name in names:
        np.save(buffer, np.ascontiguousarray(arrays[name]), allow_pickle=False)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buffer.getvalue())
    os.replace(tmp, path)
    return path


def read_container(
    path: Union[str, Path], magic: bytes
) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Read a container written by `write_container`

    Raises:
    ------
        `CacheError`: Wrong signature, version or truncated content.
    """
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(magic):
        raise CacheError(f"'{path}' has a foreign signature")
    offset = len(magic)
    try:
        version, meta_len = _HEADER.unpack_from(raw, offset)
    except struct.error as e:
        raise CacheError(f"'{path}' is truncated") from e
    if version != CONTAINER_VERSION:
        raise CacheError(
            f"'{path}' has version {version}, expected {CONTAINER_VERSION}"
        )
    offset += _HEADER.size
    try:
        meta = json.loads(raw[offset : offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CacheError(f"'{path}' has unreadable metadata") from e
    buffer = io.BytesIO(raw[offset + meta_len :])
    arrays = {}
    try:
        for name in meta.pop("arrays"):
            arrays[name] = np.load(buffer, allow_pickle=False)
    except (KeyError, ValueError, EOFError) as e:
        raise CacheError(f"'{path}' is truncated") from e
    return meta, arrays
