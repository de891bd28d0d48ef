"""Self-describing model container for float and INT8 parameter sets.

Layout: one JSON manifest line terminated by '\\n', then the raw tensor
payload, concatenated in manifest order, C-contiguous, little-endian.

The manifest carries:
  format       "exgmodel1"
  kind         "float" or "int8"
  channels, samples, pool_height, num_classes, seed
  tensors      list of {"name", "shape", "dtype"} in payload order
  quant        (int8 only) {"act_scale", "act_zero", "weight_scales"}

Float models store conv{i}_w, conv{i}_b (i = 1..5), dense_w, dense_b as
float32. INT8 models store the same names with int8 weight codes and int32
bias codes; weight_scales lists the per-tensor scales in the same order as
the weight tensors appear.
"""
from __future__ import annotations

import json

import numpy as np

from .epidenet import EpiDeNetParams
from .errors import RecordingFormatError
from .quantize import QuantTensor, QuantizedModel

__all__ = ["save_model", "load_model", "MODEL_FORMAT"]

MODEL_FORMAT = "exgmodel1"

_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int8": "|i1",
    "int32": "<i4",
}


def _tensor_entries(named):
    entries = []
    payload = []
    for name, arr in named:
        dtype = str(arr.dtype)
        if dtype not in _DTYPES:
            raise RecordingFormatError(f"tensor {name} has unsupported dtype {dtype}")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype})
        payload.append(np.ascontiguousarray(arr).astype(_DTYPES[dtype]).tobytes())
    return entries, b"".join(payload)


def save_model(path, model) -> None:
    """Write a float EpiDeNetParams or a QuantizedModel to disk."""
    if isinstance(model, EpiDeNetParams):
        kind = "float"
        named = [(k, v.astype(np.float32)) for k, v in model.tensors.items()]
        quant = None
        meta = model
    elif isinstance(model, QuantizedModel):
        kind = "int8"
        named = []
        for i, (qw, qb) in enumerate(zip(model.conv_w, model.conv_b), start=1):
            named.append((f"conv{i}_w", qw.codes))
            named.append((f"conv{i}_b", qb))
        named.append(("dense_w", model.dense_w.codes))
        named.append(("dense_b", model.dense_b))
        quant = {
            "act_scale": list(model.act_scale),
            "act_zero": list(model.act_zero),
            "weight_scales": [qw.scale for qw in model.conv_w] + [model.dense_w.scale],
        }
        meta = model
    else:
        raise RecordingFormatError(f"cannot serialize a {type(model).__name__}")
    entries, payload = _tensor_entries(named)
    manifest = {
        "format": MODEL_FORMAT,
        "kind": kind,
        "channels": meta.channels,
        "samples": meta.samples,
        "pool_height": meta.pool_height,
        "num_classes": meta.num_classes,
        "seed": meta.seed,
        "tensors": entries,
    }
    if quant is not None:
        manifest["quant"] = quant
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest).encode("ascii") + b"\n")
        fh.write(payload)


def load_model(path):
    """Read a model container; returns EpiDeNetParams or QuantizedModel."""
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    try:
        manifest = json.loads(header.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RecordingFormatError(f"unreadable model manifest: {exc}") from None
    if manifest.get("format") != MODEL_FORMAT:
        raise RecordingFormatError(
            f"unknown model format {manifest.get('format')!r} (expected {MODEL_FORMAT!r})"
        )
    tensors = {}
    offset = 0
    for entry in manifest["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise RecordingFormatError(
                f"payload truncated at byte {offset} while reading {entry['name']}"
            )
        tensors[entry["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise RecordingFormatError(f"{len(blob) - offset} trailing bytes after tensor payload")
    common = dict(
        channels=int(manifest["channels"]),
        samples=int(manifest["samples"]),
        pool_height=int(manifest["pool_height"]),
        num_classes=int(manifest["num_classes"]),
        seed=int(manifest.get("seed", 0)),
    )
    if manifest["kind"] == "float":
        return EpiDeNetParams(tensors=tensors, **common)
    if manifest["kind"] != "int8":
        raise RecordingFormatError(f"unknown model kind {manifest['kind']!r}")
    quant = manifest["quant"]
    scales = quant["weight_scales"]
    conv_w = tuple(
        QuantTensor(codes=tensors[f"conv{i}_w"], scale=float(scales[i - 1])) for i in range(1, 6)
    )
    conv_b = tuple(tensors[f"conv{i}_b"] for i in range(1, 6))
    return QuantizedModel(
        conv_w=conv_w,
        conv_b=conv_b,
        dense_w=QuantTensor(codes=tensors["dense_w"], scale=float(scales[5])),
        dense_b=tensors["dense_b"],
        act_scale=tuple(float(s) for s in quant["act_scale"]),
        act_zero=tuple(int(z) for z in quant["act_zero"]),
        **common,
    )
