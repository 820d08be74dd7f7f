"""File formats: PIMX distribution matrices, histogram CSV, JSON artifacts.

PIMX layout (all little-endian):
    magic bytes b"PIMX"
    u16 version (currently 1)
    u32 k, u64 d
    k*d float64 row-major matrix entries
    u32 length-prefixed UTF-8 JSON block holding row labels and kinds

Histogram CSV: first line is the metadata comment `# d=<d> total=<n>`,
then a `index,count` header and one row per nonzero outcome.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .model import (
    BitstringHistogram,
    DistributionMatrix,
    ErrorLabel,
    RowKind,
    SideHistograms,
)

__all__ = [
    "write_pimx",
    "read_pimx",
    "write_histogram_csv",
    "read_histogram_csv",
    "write_side_json",
    "read_side_json",
    "dump_json",
    "load_json",
]

PIMX_MAGIC = b"PIMX"
PIMX_VERSION = 1


def write_pimx(path: str | Path, pi: DistributionMatrix) -> None:
    """Serialize a distribution matrix to the PIMX binary format."""
    meta = {
        "labels": [label.to_json() for label in pi.labels],
        "row_kinds": [kind.value for kind in pi.row_kinds],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(PIMX_MAGIC)
        fh.write(struct.pack("<H", PIMX_VERSION))
        fh.write(struct.pack("<I", pi.k))
        fh.write(struct.pack("<Q", pi.d))
        fh.write(np.ascontiguousarray(pi.rows, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def read_pimx(path: str | Path) -> DistributionMatrix:
    """Read a PIMX file back into a DistributionMatrix."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PIMX_MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}, expected PIMX")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != PIMX_VERSION:
            raise InvalidInputError(f"{path}: unsupported PIMX version {version}")
        (k,) = struct.unpack("<I", fh.read(4))
        (d,) = struct.unpack("<Q", fh.read(8))
        payload = fh.read(8 * k * d)
        if len(payload) != 8 * k * d:
            raise InvalidInputError(f"{path}: truncated matrix payload")
        rows = np.frombuffer(payload, dtype="<f8").reshape(k, d).copy()
        (blob_len,) = struct.unpack("<I", fh.read(4))
        blob = fh.read(blob_len)
        if len(blob) != blob_len:
            raise InvalidInputError(f"{path}: truncated label block")
    meta = json.loads(blob.decode("utf-8"))
    labels = tuple(ErrorLabel.from_json(obj) for obj in meta["labels"])
    kinds = tuple(RowKind(v) for v in meta["row_kinds"])
    return DistributionMatrix(rows=rows, labels=labels, row_kinds=kinds)


def write_histogram_csv(path: str | Path, hist: BitstringHistogram) -> None:
    """Write a histogram as `index,count` CSV with a `# d= total=` header."""
    lines = [f"# d={hist.d} total={hist.total}", "index,count"]
    lines += [f"{int(i)},{int(c)}" for i, c in zip(hist.indices, hist.counts)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram_csv(path: str | Path) -> BitstringHistogram:
    """Read a histogram CSV written by `write_histogram_csv`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise InvalidInputError(f"{path}: missing `# d=<d> total=<n>` header line")
    meta = dict(
        item.split("=", 1) for item in lines[0].lstrip("# ").split() if "=" in item
    )
    try:
        d = int(meta["d"])
        total = int(meta["total"])
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"{path}: bad metadata line {lines[0]!r}") from exc
    if len(lines) < 2 or lines[1].replace(" ", "") != "index,count":
        raise InvalidInputError(f"{path}: missing `index,count` header")
    idx, cnt = [], []
    for ln_no, ln in enumerate(lines[2:], start=3):
        parts = ln.split(",")
        if len(parts) != 2:
            raise InvalidInputError(f"{path}:{ln_no}: expected `index,count`")
        try:
            idx.append(int(parts[0]))
            cnt.append(int(parts[1]))
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{ln_no}: non-integer field") from exc
    hist = BitstringHistogram(d=d, indices=idx, counts=cnt)
    if hist.total != total:
        raise InvalidInputError(
            f"{path}: counts sum to {hist.total}, header says {total}"
        )
    return hist


def write_side_json(path: str | Path, side: SideHistograms) -> None:
    """Write per-component reference histograms as one JSON document."""
    dump_json(
        path,
        {
            "d": side.d,
            "m": side.m,
            "histograms": [
                {
                    "indices": [int(i) for i in h.indices],
                    "counts": [int(c) for c in h.counts],
                }
                for h in side
            ],
        },
    )


def read_side_json(path: str | Path) -> SideHistograms:
    obj = load_json(path)
    try:
        d = int(obj["d"])
        hists = tuple(
            BitstringHistogram(d=d, indices=h["indices"], counts=h["counts"])
            for h in obj["histograms"]
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"{path}: malformed side-histogram file: {exc}") from exc
    side = SideHistograms(hists)
    if "m" in obj and int(obj["m"]) != side.m:
        raise InvalidInputError(
            f"{path}: header m={obj['m']} but histograms total {side.m}"
        )
    return side


def dump_json(path: str | Path, obj) -> None:
    """Write canonical JSON (sorted keys, fixed separators, trailing newline).

    The fixed layout makes repeated runs byte-identical, which the CLI
    determinism contract relies on.
    """
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
