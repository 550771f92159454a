"""Checkpoint archives.

A checkpoint is a zip holding three members:

* ``spec.json``: policy architecture, environment config, and the
  observation-normalization statistics (exact JSON doubles, or null)
* ``params.bin``: every parameter and running-statistic array in
  serialization order; per array: u32 name length, UTF-8 name, u32 rank,
  u32 dims, then float32 data, all little-endian, C order
* ``meta.json``: run bookkeeping (seed, step count, ...)

Member timestamps are pinned so identical contents produce identical
bytes.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct
import zipfile
from pathlib import Path

import numpy as np

from matrix_trader.features import WindowStats
from matrix_trader.nets.inits import Parameters
from matrix_trader.nets.policies import CnnSpec, MlpSpec, empty_params

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _pack_params(params: Parameters) -> bytes:
    buf = io.BytesIO()
    for name, arr in params.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def _unpack_params(blob: bytes) -> list[tuple[str, np.ndarray]]:
    out = []
    off = 0
    total = len(blob)
    while off < total:
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(dims)
        off += 4 * count
        out.append((name, arr.astype(np.float32)))
    return out


def _spec_dict(spec) -> dict:
    d = {"kind": spec.kind}
    d.update(dataclasses.asdict(spec))
    return d


def _spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "cnn":
        d["channels"] = tuple(d["channels"])
        return CnnSpec(**d)
    if kind == "mlp":
        d["hidden"] = tuple(d["hidden"])
        return MlpSpec(**d)
    raise ValueError(f"unknown policy kind {kind!r}")


def _stats_dict(stats: WindowStats | None):
    if stats is None:
        return None
    return {"mean": stats.mean.tolist(), "std": stats.std.tolist()}


def _stats_from_dict(d) -> WindowStats | None:
    if d is None:
        return None
    return WindowStats(
        mean=np.asarray(d["mean"], dtype=np.float64),
        std=np.asarray(d["std"], dtype=np.float64),
    )


def _write_member(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o600 << 16
    zf.writestr(info, payload)


def save_checkpoint(
    path: str | Path,
    spec,
    params: Parameters,
    env_config: dict | None,
    stats: WindowStats | None,
    meta: dict,
) -> None:
    spec_doc = {
        "policy": _spec_dict(spec),
        "env": dict(env_config) if env_config else None,
        "normalization": _stats_dict(stats),
    }
    with zipfile.ZipFile(Path(path), "w") as zf:
        _write_member(zf, "spec.json", (json.dumps(spec_doc, indent=2) + "\n").encode())
        _write_member(zf, "params.bin", _pack_params(params))
        _write_member(zf, "meta.json", (json.dumps(meta, indent=2) + "\n").encode())


def load_checkpoint(path: str | Path):
    """Returns (spec, params, env_config dict | None, stats | None, meta)."""
    with zipfile.ZipFile(Path(path), "r") as zf:
        spec_doc = json.loads(zf.read("spec.json"))
        blob = zf.read("params.bin")
        meta = json.loads(zf.read("meta.json"))
    spec = _spec_from_dict(spec_doc["policy"])
    params = empty_params(spec)
    stored = _unpack_params(blob)
    stored_names = [n for n, _ in stored]
    if stored_names != params.names():
        raise ValueError(
            "checkpoint parameter names do not match the architecture: "
            f"{stored_names} vs {params.names()}"
        )
    for name, arr in stored:
        params.set_array(name, arr)
    return spec, params, spec_doc.get("env"), _stats_from_dict(spec_doc["normalization"]), meta
