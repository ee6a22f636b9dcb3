"""
Flat named-array archives with a version tag and JSON metadata.
"""

from __future__ import annotations

import json
import logging
import os
import typing as t

import numpy as np

from .. import exceptions

__all__ = ("ARCHIVE_VERSION", "load_params", "save_params")

logger = logging.getLogger(__name__)

ARCHIVE_VERSION = "drlab-params/1"
_VERSION_KEY = "__version__"
_META_KEY = "__meta__"


def save_params(
    path: str | os.PathLike[str],
    params: t.Mapping[str, np.ndarray],
    meta: t.Optional[t.Mapping[str, t.Any]] = None,
) -> None:
    """Write `params` uncompressed; values round-trip bit-exactly."""
    arrays = {name: np.asarray(a, dtype=np.float64) for name, a in params.items()}
    arrays[_VERSION_KEY] = np.array(ARCHIVE_VERSION)
    arrays[_META_KEY] = np.array(json.dumps(dict(meta or {}), sort_keys=True))
    with open(path, "wb") as fp:
        np.savez(fp, **arrays)
    logger.debug("saved %d arrays to %s", len(params), path)


def load_params(path: str | os.PathLike[str]) -> t.Tuple[t.Dict[str, np.ndarray], t.Dict[str, t.Any]]:
    """
    :raises exceptions.ArchiveVersionException: If the archive carries another version tag
    """
    with np.load(path, allow_pickle=False) as data:
        found = str(data[_VERSION_KEY]) if _VERSION_KEY in data.files else "<none>"
        if found != ARCHIVE_VERSION:
            raise exceptions.ArchiveVersionException(path=str(path), found=found, expected=ARCHIVE_VERSION)
        meta = json.loads(str(data[_META_KEY]))
        params = {k: data[k].copy() for k in data.files if k not in (_VERSION_KEY, _META_KEY)}
    return params, meta
