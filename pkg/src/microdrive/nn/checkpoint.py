"""Versioned binary checkpoints.

Layout: magic bytes, schema version (uint32 LE), sha256 digest of the
canonical architecture description, a JSON header (uint64 LE length
prefix) listing array names/shapes/dtypes plus scalar metadata, then the
raw little-endian array payload in header order.  Loading refuses any
file whose digest does not match the architecture it is being loaded
into, so weights can never be silently poured into the wrong net.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MDRVCKPT"
VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


def spec_digest(net_spec: dict) -> bytes:
    canon = json.dumps(net_spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).digest()


def _encode_arrays(entries: list[tuple[str, np.ndarray]]):
    header = []
    chunks = []
    for name, arr in entries:
        arr = np.asarray(arr)
        dt = str(arr.dtype)
        if dt not in _DTYPES:
            raise ValueError(f"unsupported checkpoint dtype {dt} for {name}")
        header.append({"name": name, "shape": list(arr.shape), "dtype": dt})
        chunks.append(np.ascontiguousarray(arr).astype(_DTYPES[dt]).tobytes())
    return header, b"".join(chunks)


def save_checkpoint(path, net_spec: dict, params: dict[str, np.ndarray],
                    optimizer_state: dict | None = None, meta: dict | None = None):
    """Write a checkpoint; parent directory must exist."""
    entries = [(f"param/{k}", v) for k, v in params.items()]
    opt_meta = None
    if optimizer_state is not None:
        opt_meta = {"t": optimizer_state["t"], "lr": optimizer_state["lr"]}
        entries += [(f"opt/m/{i}", m) for i, m in enumerate(optimizer_state["m"])]
        entries += [(f"opt/v/{i}", v) for i, v in enumerate(optimizer_state["v"])]
    arr_header, payload = _encode_arrays(entries)
    header = {
        "arrays": arr_header,
        "optimizer": opt_meta,
        "meta": meta or {},
    }
    hdr_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(spec_digest(net_spec))
        f.write(struct.pack("<Q", len(hdr_bytes)))
        f.write(hdr_bytes)
        f.write(payload)


def load_checkpoint(path, net_spec: dict):
    """Read a checkpoint back; raises on magic/version/digest mismatch.

    Returns (params dict, optimizer_state or None, meta dict).
    """
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    digest = raw[12:44]
    want = spec_digest(net_spec)
    if digest != want:
        raise ValueError(
            f"{path}: architecture digest mismatch "
            f"(file {digest.hex()[:12]}, expected {want.hex()[:12]})"
        )
    (hdr_len,) = struct.unpack_from("<Q", raw, 44)
    hdr_start = 52
    header = json.loads(raw[hdr_start : hdr_start + hdr_len])
    offset = hdr_start + hdr_len
    arrays = {}
    for ent in header["arrays"]:
        dt = np.dtype(_DTYPES[ent["dtype"]])
        count = int(np.prod(ent["shape"])) if ent["shape"] else 1
        nbytes = count * dt.itemsize
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=offset).reshape(ent["shape"])
        arrays[ent["name"]] = arr.astype(ent["dtype"])
        offset += nbytes
    params = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    opt_state = None
    if header["optimizer"] is not None:
        ms = sorted((k for k in arrays if k.startswith("opt/m/")), key=lambda s: int(s.rsplit("/", 1)[1]))
        vs = sorted((k for k in arrays if k.startswith("opt/v/")), key=lambda s: int(s.rsplit("/", 1)[1]))
        opt_state = {
            "t": header["optimizer"]["t"],
            "lr": header["optimizer"]["lr"],
            "m": [arrays[k] for k in ms],
            "v": [arrays[k] for k in vs],
        }
    return params, opt_state, header["meta"]


def assign_params(module, params: dict[str, np.ndarray]):
    """Copy a loaded parameter dict into a module by name, shape-checked."""
    named = dict(module.named_parameters())
    missing = set(named) - set(params)
    extra = set(params) - set(named)
    if missing or extra:
        raise ValueError(f"parameter name mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
    for name, var in named.items():
        src = np.asarray(params[name])
        if src.shape != var.data.shape:
            raise ValueError(f"shape mismatch for {name}: {src.shape} vs {var.data.shape}")
        var.data = src.astype(var.data.dtype)
