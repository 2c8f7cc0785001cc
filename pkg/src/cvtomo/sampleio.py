"""File formats: CVQS sample files, CSV tables, PGM previews, metrics reports.

CVQS is this package's raw-sample container: a little-endian packed header

    magic "CVQS" | version u16 | angle f64 (rad) | count u64 | seed u64 | shard u32

(34 bytes) followed by `count` consecutive (f64, f64, f64) triples
(x_b, x_a1, x_a2). Everything else is plain text: CSV marginal/grid tables,
binary PGM (P5) previews and flat key=value metrics reports.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterator

import numpy as np

CVQS_MAGIC = b"CVQS"
CVQS_VERSION = 1
_HEADER = struct.Struct("<4sHdQQI")
HEADER_SIZE = _HEADER.size  # 34 bytes
TRIPLE_SIZE = 24


class CvqsFormatError(ValueError):
    """Malformed CVQS file; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


def write_samples(path, theta: float, triples: np.ndarray, seed: int, shard: int) -> None:
    triples = np.ascontiguousarray(triples, dtype="<f8")
    if triples.ndim != 2 or triples.shape[1] != 3:
        raise ValueError(f"triples must have shape (n, 3), got {triples.shape}")
    header = _HEADER.pack(CVQS_MAGIC, CVQS_VERSION, theta, triples.shape[0], seed, shard)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(triples.tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise CvqsFormatError("file too short for a CVQS header", len(raw))
    magic, version, theta, count, seed, shard = _HEADER.unpack(raw)
    if magic != CVQS_MAGIC:
        raise CvqsFormatError(f"bad magic {magic!r}", 0)
    if version != CVQS_VERSION:
        raise CvqsFormatError(f"unsupported CVQS version {version}", 4)
    return {"theta": theta, "count": count, "seed": seed, "shard": shard}


def stream_samples(path, chunk: int = 1_000_000) -> Iterator[np.ndarray]:
    """Yield (n, 3) blocks without loading the file; validates header and length."""
    header = read_header(path)
    count = header["count"]
    expected = HEADER_SIZE + count * TRIPLE_SIZE
    actual = Path(path).stat().st_size
    if actual != expected:
        offset = min(actual, expected)
        kind = "truncated payload" if actual < expected else "trailing bytes"
        raise CvqsFormatError(
            f"{kind}: file is {actual} bytes, header promises {expected}", offset
        )
    remaining = count
    with open(path, "rb") as fh:
        fh.seek(HEADER_SIZE)
        while remaining > 0:
            take = min(chunk, remaining)
            raw = fh.read(take * TRIPLE_SIZE)
            block = np.frombuffer(raw, dtype="<f8").reshape(take, 3)
            remaining -= take
            yield block


def read_all_samples(path) -> tuple[dict, np.ndarray]:
    header = read_header(path)
    blocks = list(stream_samples(path))
    if blocks:
        data = np.concatenate(blocks, axis=0)
    else:
        data = np.zeros((0, 3))
    return header, data


# ---------------------------------------------------------------------------
# text tables


def write_marginal_csv(path, centers, density, raw_counts, weight_sums) -> None:
    with open(path, "w") as fh:
        fh.write("x,density,raw_count,weight_sum\n")
        for x, d, n, w in zip(centers, density, raw_counts, weight_sums):
            fh.write(f"{x:.12g},{d:.12g},{int(n)},{w:.12g}\n")


def read_marginal_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.atleast_1d(data["x"]), np.atleast_1d(data["density"])


def write_wigner_csv(path, grid) -> None:
    with open(path, "w") as fh:
        fh.write("x,p,w\n")
        for i, x in enumerate(grid.xs):
            for j, p in enumerate(grid.ps):
                fh.write(f"{x:.12g},{p:.12g},{grid.values[i, j]:.12g}\n")


def write_pgm(path, grid) -> None:
    """Binary PGM preview; values affinely mapped to 0..255 with the original
    min/max recorded in the header comment."""
    values = grid.values
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    pixels = np.round((values - lo) / span * 255.0).astype(np.uint8)
    # image rows scan p from top to bottom, columns scan x left to right
    image = pixels.T[::-1]
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# min={lo:.12g} max={hi:.12g}\n".encode())
        fh.write(f"{image.shape[1]} {image.shape[0]}\n255\n".encode())
        fh.write(image.tobytes())


def format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_report(path, entries: dict) -> None:
    """Flat key=value report, keys emitted in sorted order for reproducibility."""
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={format_value(entries[key])}\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        out[key] = value
    return out
