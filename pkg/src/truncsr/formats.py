"""On-disk formats: raw float32 tensors, network checkpoints, PGM/PPM, CSV.

Raw tensor layout: a 16-byte little-endian header ``<4sIII`` holding the
magic ``b"F32T"``, the rank (1 or 2) and two dimensions (the second is 1
for vectors), followed by C-ordered little-endian float32 data.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .nn import MLP

MAGIC = b"F32T"
HEADER = struct.Struct("<4sIII")
NA = "NA"


class FormatError(ValueError):
    pass


def write_tensor(path, array: np.ndarray) -> None:
    a = np.asarray(array)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim > 2:
        raise FormatError(f"raw tensors hold rank 1 or 2, got {a.ndim}")
    d0 = a.shape[0]
    d1 = a.shape[1] if a.ndim == 2 else 1
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, a.ndim, d0, d1))
        f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, rank, d0, d1 = HEADER.unpack_from(raw)
    if magic != MAGIC or rank not in (1, 2):
        raise FormatError(f"{path}: not a raw tensor file")
    shape = (d0,) if rank == 1 else (d0, d1)
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER.size)
    if data.size != math.prod(shape):
        raise FormatError(f"{path}: expected {math.prod(shape)} values, found {data.size}")
    return data.reshape(shape).astype(np.float64)


def save_checkpoint(directory, nets: dict[str, MLP], meta: dict | None = None) -> Path:
    """One raw tensor per weight/bias plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format": "f32t-checkpoint/1", "meta": meta or {}, "networks": {}}
    for name, mlp in nets.items():
        layers = []
        for i, (w, b, act) in enumerate(zip(mlp.weights, mlp.biases, mlp.activations)):
            wf, bf = f"{name}.{i}.weight.f32", f"{name}.{i}.bias.f32"
            write_tensor(directory / wf, w)
            write_tensor(directory / bf, b)
            layers.append({"weight": wf, "bias": bf, "shape": list(w.shape),
                           "activation": act})
        manifest["networks"][name] = layers
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_checkpoint(directory) -> tuple[dict[str, MLP], dict]:
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint manifest in {directory}")
    manifest = json.loads(path.read_text())
    nets = {}
    for name, layers in manifest["networks"].items():
        ws, bs, acts = [], [], []
        for layer in layers:
            w = read_tensor(directory / layer["weight"])
            if list(w.shape) != layer["shape"]:
                raise FormatError(f"{name}: weight shape {w.shape} != manifest {layer['shape']}")
            ws.append(w)
            bs.append(read_tensor(directory / layer["bias"]).reshape(-1))
            acts.append(layer["activation"])
        nets[name] = MLP(ws, bs, acts)
    return nets, manifest.get("meta", {})


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Binary P5; ``image`` holds values in [0, 1]."""
    if maxval not in (255, 65535):
        raise FormatError("maxval must be 255 or 65535")
    img = np.asarray(image, np.float64)
    if img.ndim != 2:
        raise FormatError("PGM images are 2-D")
    q = np.round(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(q.astype(dtype).tobytes())


def _header_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        tokens.append(data[start:pos].decode("ascii"))
    return tokens, pos + 1  # exactly one whitespace byte precedes the raster


def read_pnm(path) -> np.ndarray:
    """Read binary PGM (P5) or PPM (P6) into [0, 1]; colour is reduced to BT.601 luma."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _header_tokens(data, 4)
    if magic not in ("P5", "P6"):
        raise FormatError(f"{path}: unsupported PNM type {magic}")
    w, h, maxval = int(w), int(h), int(maxval)
    channels = 3 if magic == "P6" else 1
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype=dtype, count=w * h * channels, offset=pos)
    img = raster.astype(np.float64) / maxval
    if channels == 3:
        img = img.reshape(h, w, 3) @ np.array([0.299, 0.587, 0.114])
    return img.reshape(h, w)


def fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            return NA
        return f"{float(v):.9g}"
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(k) for k in header]
            writer.writerow([fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
