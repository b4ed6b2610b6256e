"""
pycorv.nmf.snapshot - Flat binary factor snapshots

Layout (little-endian):
    int64[5]   n_users, rank, n_items, has_proxy (0/1), reserved
    float64[2] rate_w, rate_h
    float64    W (row-major), H (row-major), then phi_W, phi_H if has_proxy
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import DataError
from .model import FactorState

logger = logging.getLogger(__name__)

_HEADER = np.dtype("<i8")
_PAYLOAD = np.dtype("<f8")
_HEADER_LEN = 5


def save_factors(state: FactorState, path: Union[str, Path]) -> None:
    n_users, n_items = state.shape
    has_proxy = state.phi_W is not None and state.phi_H is not None
    header = np.array([n_users, state.rank, n_items, int(has_proxy), 0], dtype=_HEADER)
    blocks = [np.array([state.rate_w, state.rate_h]), state.W, state.H]
    if has_proxy:
        blocks += [state.phi_W, state.phi_H]
    with open(path, "wb") as f:
        f.write(header.tobytes())
        for block in blocks:
            f.write(np.ascontiguousarray(block, dtype=_PAYLOAD).tobytes())
    logger.debug(f"saved {n_users}x{n_items} rank {state.rank} factors to {path}")


def load_factors(path: Union[str, Path]) -> FactorState:
    raw = Path(path).read_bytes()
    header_bytes = _HEADER_LEN * _HEADER.itemsize
    if len(raw) < header_bytes:
        raise DataError(f"{path}: truncated snapshot header")
    n_users, rank, n_items, has_proxy, _ = (int(v) for v in np.frombuffer(raw[:header_bytes], dtype=_HEADER))
    if min(n_users, rank, n_items) < 0 or has_proxy not in (0, 1):
        raise DataError(f"{path}: corrupt snapshot header")
    sizes = [2, n_users * rank, rank * n_items] + ([n_users * rank, rank * n_items] if has_proxy else [])
    payload = np.frombuffer(raw[header_bytes:], dtype=_PAYLOAD)
    if payload.size != sum(sizes):
        raise DataError(f"{path}: expected {sum(sizes)} values, found {payload.size}")

    blocks = np.split(payload.astype(np.float64), np.cumsum(sizes)[:-1])
    rate_w, rate_h = (float(v) for v in blocks[0])
    W = blocks[1].reshape(n_users, rank)
    H = blocks[2].reshape(rank, n_items)
    phi_W = blocks[3].reshape(n_users, rank) if has_proxy else None
    phi_H = blocks[4].reshape(rank, n_items) if has_proxy else None
    return FactorState(W, H, rate_w, rate_h, phi_W, phi_H)
