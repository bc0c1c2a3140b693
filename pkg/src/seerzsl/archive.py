"""Flat binary tensor archive with a text manifest.

An archive is a pair of files sharing a stem: ``<stem>.bin`` holds the raw
little-endian float64 values of every tensor back to back, and
``<stem>.manifest`` lists one tensor per line as ``name<TAB>shape<TAB>offset``
(shape as space-separated extents, offset in bytes). Order is preserved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["save_arrays", "load_arrays"]


def save_arrays(stem: str | Path, arrays: dict[str, np.ndarray]) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    offset = 0
    with open(stem.with_suffix(".bin"), "wb") as fh:
        for name, arr in arrays.items():
            if "\t" in name or "\n" in name:
                raise ValueError(f"tensor name {name!r} may not contain tabs or newlines")
            data = np.ascontiguousarray(arr, dtype="<f8")
            shape = " ".join(str(s) for s in data.shape) or "0"
            lines.append(f"{name}\t{shape}\t{offset}")
            fh.write(data.tobytes())
            offset += data.nbytes
    stem.with_suffix(".manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_arrays(stem: str | Path) -> dict[str, np.ndarray]:
    stem = Path(stem)
    manifest = stem.with_suffix(".manifest")
    blob = stem.with_suffix(".bin").read_bytes()
    out: dict[str, np.ndarray] = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, shape_text, offset_text = line.split("\t")
        shape = tuple(int(s) for s in shape_text.split()) if shape_text != "0" else ()
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_text)
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        out[name] = arr.reshape(shape).astype(np.float64)
    return out
