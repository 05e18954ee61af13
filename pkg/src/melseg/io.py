"""File formats shared by the pipeline: BSP and segmentation CSVs, JSON model files."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import MalformedHeader, NonIntegerField, ValidationError

BSP_HEADER = "melody_id,note_index,ic"
SEGMENTATION_HEADER = "melody_id,note_index,boundary"


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=False) + "\n")


def format_ic(x: float) -> str:
    return f"{float(x):.9g}"


def bsp_to_csv(bsps) -> str:
    """Serialize ``{melody_id: values}`` (insertion order kept) as BSP CSV."""
    lines = [BSP_HEADER]
    for mid, values in bsps.items():
        lines.extend(f"{mid},{i},{format_ic(v)}" for i, v in enumerate(values))
    return "\n".join(lines) + "\n"


def segmentation_to_csv(segs) -> str:
    lines = [SEGMENTATION_HEADER]
    for mid, values in segs.items():
        lines.extend(f"{mid},{i},{int(v)}" for i, v in enumerate(values))
    return "\n".join(lines) + "\n"


def _read_indexed_csv(text: str, header: str, convert) -> dict[str, np.ndarray]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != header:
        raise MalformedHeader(f"line 1: expected header {header!r}")
    out: dict[str, list] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rsplit(",", 2)
        if len(parts) != 3:
            raise NonIntegerField(f"line {lineno}: expected 3 fields")
        mid, idx, val = parts
        try:
            idx = int(idx)
            val = convert(val)
        except ValueError:
            raise NonIntegerField(f"line {lineno}: bad value in {line!r}") from None
        seq = out.setdefault(mid, [])
        if idx != len(seq):
            raise ValidationError(
                f"line {lineno}: note_index {idx} out of order for melody {mid!r}")
        seq.append(val)
    return {k: np.asarray(v) for k, v in out.items()}


def read_bsp_csv(path) -> dict[str, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        bsps = _read_indexed_csv(text, BSP_HEADER, float)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from None
    for mid, v in bsps.items():
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError(f"{path}: melody {mid!r} has negative or non-finite IC")
    return {k: v.astype(float) for k, v in bsps.items()}


def read_segmentation_csv(path) -> dict[str, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        segs = _read_indexed_csv(text, SEGMENTATION_HEADER, int)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from None
    for mid, v in segs.items():
        if np.any((v != 0) & (v != 1)):
            raise ValidationError(f"{path}: melody {mid!r} has non-binary boundary values")
    return {k: v.astype(np.int8) for k, v in segs.items()}
