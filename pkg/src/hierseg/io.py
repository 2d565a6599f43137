"""Readers and writers for the toolkit's file formats.

Binary formats are little-endian:

* ``.lmap``: ``b"COBL"``, u32 version (1), u32 height, u32 width, then
  ``height*width`` u32 labels in row-major order.
* ``.fmap``: ``b"COBF"``, u32 version (1), u32 height, u32 width, u32
  channels, then channel-major, row-major f32 values.

An oriented response stack is a K-channel ``.fmap`` whose channel ``k`` holds
the response to contours whose *tangent* (direction along the boundary) makes
angle ``k*pi/K`` with the image x axis, measured counter-clockwise with the
row axis pointing down.

JSON formats (``.sb.json``, ``.ucm.json``, ``.orient.json``) are documented on
the corresponding functions.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .partition import Boundary, SparseBoundaries, PartitionError

LMAP_MAGIC = b"COBL"
FMAP_MAGIC = b"COBF"
VERSION = 1


class FormatError(ValueError):
    """Raised for malformed or unsupported input files."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_header(data: bytes, magic: bytes, n_fields: int, path) -> tuple[int, ...]:
    size = 4 + 4 * n_fields
    if len(data) < size or data[:4] != magic:
        raise FormatError(f"{path}: not a {magic.decode()} file")
    fields = struct.unpack(f"<{n_fields}I", data[4:size])
    if fields[0] != VERSION:
        raise FormatError(f"{path}: unsupported version {fields[0]}")
    return fields[1:]


def write_lmap(path, labels) -> None:
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise FormatError("label map must be 2-D")
    if lab.size and (lab.min() < 0 or lab.max() > 0xFFFFFFFF):
        raise FormatError("labels do not fit in u32")
    header = LMAP_MAGIC + struct.pack("<3I", VERSION, *lab.shape)
    atomic_write_bytes(path, header + lab.astype("<u4").tobytes())


def read_lmap(path) -> np.ndarray:
    data = Path(path).read_bytes()
    h, w = _read_header(data, LMAP_MAGIC, 3, path)
    body = data[16:]
    if len(body) != 4 * h * w:
        raise FormatError(f"{path}: expected {h * w} labels, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<u4").reshape(h, w).astype(np.int64)


def write_fmap(path, values) -> None:
    """Write a 2-D map (one channel) or a ``(C, H, W)`` stack."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise FormatError("float map must be 2-D or (C, H, W)")
    c, h, w = arr.shape
    header = FMAP_MAGIC + struct.pack("<4I", VERSION, h, w, c)
    atomic_write_bytes(path, header + arr.astype("<f4").tobytes())


def read_fmap(path) -> np.ndarray:
    """Read a float map as a ``(C, H, W)`` float64 array."""
    data = Path(path).read_bytes()
    h, w, c = _read_header(data, FMAP_MAGIC, 4, path)
    body = data[20:]
    if len(body) != 4 * h * w * c:
        raise FormatError(f"{path}: expected {h * w * c} values, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(c, h, w).astype(np.float64)


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary (P5) PGM as floats in [0, 1]."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary (P5) PGM is supported")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval <= 0 or maxval > 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    body = data[pos:pos + w * h]
    if len(body) != w * h or h == 0 or w == 0:
        raise FormatError(f"{path}: truncated PGM data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w) / float(maxval)


def write_pgm(path, image) -> None:
    img = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + img.tobytes())


def sparse_to_json(sb: SparseBoundaries) -> dict:
    return {
        "height": sb.height,
        "width": sb.width,
        "region_count": sb.region_count,
        "entries": [
            {"a": a, "b": b, "strength": sb.entries[(a, b)].strength,
             "coords": sb.entries[(a, b)].coords.tolist()}
            for a, b in sb.pairs()
        ],
    }


def sparse_from_json(obj: dict) -> SparseBoundaries:
    try:
        entries = {}
        for e in obj["entries"]:
            a, b = int(e["a"]), int(e["b"])
            if not a < b:
                raise FormatError(f"entry pair ({a}, {b}) must satisfy a < b")
            coords = np.asarray(e["coords"], dtype=np.int64).reshape(-1, 2)
            if len(coords) == 0:
                raise FormatError(f"entry ({a}, {b}) has no coordinates")
            entries[(a, b)] = Boundary(float(e["strength"]), coords)
        return SparseBoundaries(int(obj["height"]), int(obj["width"]), int(obj["region_count"]), entries)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed sparse boundaries: {exc}") from None


def write_sparse(path, sb: SparseBoundaries) -> None:
    """Write ``{"height","width","region_count","entries":[{"a","b","strength","coords"}]}``
    with entries sorted by ``(a, b)``."""
    atomic_write_text(path, json.dumps(sparse_to_json(sb), separators=(",", ":")))


def read_sparse(path) -> SparseBoundaries:
    return sparse_from_json(_load_json(path))


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def write_hierarchy(path, h) -> None:
    """Write ``.ucm.json`` plus its finest partition as ``<stem>.lmap`` beside it."""
    path = Path(path)
    name = path.name[: -len(".ucm.json")] if path.name.endswith(".ucm.json") else path.stem
    lmap = path.with_name(name + ".lmap")
    write_lmap(lmap, h.finest)
    obj = {
        "height": int(h.finest.shape[0]),
        "width": int(h.finest.shape[1]),
        "region_count": h.region_count,
        "finest": lmap.name,
        "merges": [{"a": a, "b": b, "parent": p, "level": lvl} for a, b, p, lvl in h.merges],
    }
    atomic_write_text(path, json.dumps(obj, separators=(",", ":")))


def read_hierarchy(path):
    from .hierarchy import Hierarchy

    path = Path(path)
    obj = _load_json(path)
    try:
        finest_path = Path(obj["finest"])
        if not finest_path.is_absolute():
            finest_path = path.parent / finest_path
        finest = read_lmap(finest_path)
        merges = [(int(m["a"]), int(m["b"]), int(m["parent"]), float(m["level"])) for m in obj["merges"]]
        if finest.shape != (int(obj["height"]), int(obj["width"])):
            raise FormatError(f"{path}: finest partition shape {finest.shape} does not match header")
        if int(obj["region_count"]) != int(finest.max()) + 1:
            raise FormatError(f"{path}: region_count does not match the finest partition")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed hierarchy ({exc})") from None
    try:
        return Hierarchy(finest, merges)
    except PartitionError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_orientation(path, field) -> None:
    """Write ``{"height","width","bins","records":[{"row","col","bin","confidence"}]}``."""
    obj = {
        "height": field.height,
        "width": field.width,
        "bins": field.bins_count,
        "records": [
            {"row": int(r), "col": int(c), "bin": int(b), "confidence": float(q)}
            for r, c, b, q in zip(field.rows, field.cols, field.bins, field.confidence)
        ],
    }
    atomic_write_text(path, json.dumps(obj, separators=(",", ":")))


def read_orientation(path):
    from .orientation import OrientationField

    obj = _load_json(path)
    try:
        recs = obj["records"]
        return OrientationField(
            rows=np.array([r["row"] for r in recs], dtype=np.int64),
            cols=np.array([r["col"] for r in recs], dtype=np.int64),
            bins=np.array([r["bin"] for r in recs], dtype=np.int64),
            confidence=np.array([r["confidence"] for r in recs], dtype=np.float64),
            height=int(obj["height"]),
            width=int(obj["width"]),
            bins_count=int(obj.get("bins", 8)),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed orientation field ({exc})") from None


def write_tsv(path, header: list[str], rows) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> list[tuple[str, Path, list[Path]]]:
    """Parse a tab-separated manifest: ``id``, prediction path, ``;``-separated GT paths.

    Relative paths resolve against the manifest's directory.  Blank lines
    and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    base = path.parent
    items = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        gts = [base / p for p in parts[2].split(";") if p]
        if not gts:
            raise FormatError(f"{path}:{lineno}: no ground-truth paths")
        items.append((parts[0], base / parts[1], gts))
    return items
