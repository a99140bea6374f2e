"""Binary checkpoint format.

Layout (little-endian)::

    "IADI" | version u32 | kind u8 | n_tensors u32
    n_tensors x { name_len u32 | name utf-8 | rank u32 | dims u32[rank] | data f32[] }
    n_mels u32 | norm_mean f32[n_mels] | norm_std f32[n_mels]
    meta_len u32 | meta utf-8 JSON (model spec, label names)

The trailing metadata block is what lets a checkpoint be loaded without
out-of-band configuration.
"""
from __future__ import annotations

import json
import struct
from typing import List, Optional, Tuple

import numpy as np
import torch

from ..features import Normalizer
from .models import Classifier, ModelSpec, build_model

MAGIC = b"IADI"
VERSION = 1
KINDS = {"crnn": 0, "resblstm": 1}


def _u32(v):
    return struct.pack("<I", v)


def save_checkpoint(path, model: Classifier, normalizer: Optional[Normalizer] = None,
                    labels: Optional[List[str]] = None) -> None:
    state = model.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC + _u32(VERSION) + struct.pack("<B", KINDS[model.spec.kind]) + _u32(len(state)))
        for name, t in state.items():
            raw = name.encode("utf-8")
            arr = t.detach().cpu().numpy().astype("<f4")
            fh.write(_u32(len(raw)) + raw + _u32(arr.ndim))
            fh.write(b"".join(_u32(d) for d in arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())
        if normalizer is None:
            fh.write(_u32(0))
        else:
            fh.write(_u32(normalizer.mean.size))
            fh.write(normalizer.mean.astype("<f4").tobytes())
            fh.write(normalizer.std.astype("<f4").tobytes())
        meta = json.dumps({"spec": model.spec.to_dict(), "labels": labels or []}, sort_keys=True)
        raw = meta.encode("utf-8")
        fh.write(_u32(len(raw)) + raw)


def load_checkpoint(path) -> Tuple[Classifier, Optional[Normalizer], List[str]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an IADI checkpoint")
    pos = 4
    version, = struct.unpack_from("<I", data, pos); pos += 4
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    kind, = struct.unpack_from("<B", data, pos); pos += 1
    n, = struct.unpack_from("<I", data, pos); pos += 4
    tensors = {}
    for _ in range(n):
        ln, = struct.unpack_from("<I", data, pos); pos += 4
        name = data[pos : pos + ln].decode("utf-8"); pos += ln
        rank, = struct.unpack_from("<I", data, pos); pos += 4
        dims = struct.unpack_from(f"<{rank}I", data, pos); pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        tensors[name] = arr
    n_mels, = struct.unpack_from("<I", data, pos); pos += 4
    normalizer = None
    if n_mels:
        mean = np.frombuffer(data, dtype="<f4", count=n_mels, offset=pos).astype(np.float64)
        pos += 4 * n_mels
        std = np.frombuffer(data, dtype="<f4", count=n_mels, offset=pos).astype(np.float64)
        pos += 4 * n_mels
        normalizer = Normalizer(mean, std)
    ln, = struct.unpack_from("<I", data, pos); pos += 4
    meta = json.loads(data[pos : pos + ln].decode("utf-8"))
    spec = ModelSpec(**meta["spec"])
    if KINDS[spec.kind] != kind:
        raise ValueError(f"{path}: kind byte disagrees with metadata")
    model = build_model(spec)
    ref = model.state_dict()
    state = {k: torch.from_numpy(v.copy()).to(ref[k].dtype) for k, v in tensors.items()}
    model.load_state_dict(state)
    model.eval()
    return model, normalizer, meta["labels"]
