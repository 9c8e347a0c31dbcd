"""Checkpoint container for trained networks.

Layout:
    bytes 0..31   magic, b"ARVAE-CKPT-v1" null-padded to 32 bytes
    bytes 32..35  little-endian uint32 header length H
    bytes 36..    UTF-8 JSON header, then the weight blob

The header records each network's layer spec, dtype, seed, and training
step, plus free-form metadata; the blob is every parameter flattened
little-endian in params() order, nets in header order.  Loading rebuilds
the networks from their specs and copies the blob back in, so a file is
self-describing and byte-stable for identical training runs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import Net

MAGIC = b"ARVAE-CKPT-v1".ljust(32, b"\0")

_LE = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(path: str | Path, nets: dict[str, Net], seed: int, step: int,
                    extra: dict | None = None) -> None:
    order = list(nets)
    header = {
        "format": "ARVAE-CKPT-v1",
        "seed": int(seed),
        "step": int(step),
        "nets": {name: {"spec": nets[name].spec(), "dtype": nets[name].dtype.name}
                 for name in order},
        "order": order,
        "extra": extra or {},
    }
    blob = bytearray()
    for name in order:
        dt = _LE[nets[name].dtype.name]
        for _, p in nets[name].params():
            blob += np.ascontiguousarray(p.data, dtype=dt).tobytes()
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    out = Path(path)
    tmp = out.with_suffix(out.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(head)).tobytes())
        fh.write(head)
        fh.write(bytes(blob))
    tmp.replace(out)


def load_checkpoint(path: str | Path) -> tuple[dict[str, Net], dict]:
    """Rebuild networks from a checkpoint; returns (nets, header)."""
    raw = Path(path).read_bytes()
    if len(raw) < 36 or raw[:32] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint (bad magic)")
    head_len = int(np.frombuffer(raw[32:36], dtype="<u4")[0])
    header = json.loads(raw[36:36 + head_len].decode("utf-8"))
    offset = 36 + head_len
    nets: dict[str, Net] = {}
    for name in header["order"]:
        entry = header["nets"][name]
        dtype = np.dtype(entry["dtype"])
        net = Net(entry["spec"], seed=0, dtype=dtype)
        for _, p in net.params():
            n_bytes = p.data.size * dtype.itemsize
            chunk = raw[offset:offset + n_bytes]
            if len(chunk) < n_bytes:
                raise ValueError(f"{path}: weight blob truncated in net {name!r}")
            p.data[...] = np.frombuffer(chunk, dtype=_LE[dtype.name]).reshape(p.shape)
            offset += n_bytes
        nets[name] = net
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after weight blob")
    return nets, header
