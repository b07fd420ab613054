"""File writers: PGM snapshots with scale sidecars, strict JSON, sha256 manifest."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_snapshot", "write_json", "write_manifest", "jsonable"]

MANIFEST_NAME = "manifest.txt"


def _image(field: np.ndarray) -> np.ndarray:
    """Rows run top to bottom along decreasing y; 1D fields become a single row."""
    if field.ndim == 1:
        return field[None, :]
    return field.T[::-1]


def write_pgm(path: Path, field: np.ndarray) -> tuple[float, float]:
    """8-bit binary PGM (P5), min-max normalised; returns (min, max)."""
    img = _image(np.asarray(field, dtype=float))
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        px = np.rint((img - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        px = np.zeros(img.shape, dtype=np.uint8)
    h, w = px.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())
    return lo, hi


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_snapshot(directory: Path, name: str, t: float, field: np.ndarray) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    pgm = directory / f"{name}.pgm"
    lo, hi = write_pgm(pgm, field)
    side = directory / f"{name}.scale.txt"
    side.write_text(f"t = {t:.17e}\nmin = {lo:.17e}\nmax = {hi:.17e}\n"
                    "# pixel 0 maps to min, pixel 255 to max\n")
    return [pgm, side]


def jsonable(obj):
    """Plain JSON types; non-finite floats become None, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return obj.value  # enums
    return obj


def write_json(path: Path, obj) -> Path:
    Path(path).write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return Path(path)


def write_manifest(root: Path) -> Path:
    """One ``sha256  size  path`` line per file under ``root`` (sorted, manifest excluded)."""
    root = Path(root)
    lines = []
    for f in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = f.relative_to(root).as_posix()
        if rel == MANIFEST_NAME:
            continue
        data = f.read_bytes()
        lines.append(f"{hashlib.sha256(data).hexdigest()}  {len(data)}  {rel}")
    out = root / MANIFEST_NAME
    out.write_text("\n".join(lines) + ("\n" if lines else ""))
    return out
