"""Versioned plain-text formats.

    VSL 1 <T> <K>          sub-patch logits, T rows of K numbers
    VSE 1 <M> <K>          ensemble logits, M rows of K numbers
    VSD 1 <N> <T> <d> <K>  dataset; per sample a label line then T rows of d numbers
    VSM 1 <K> <d>          linear patch classifier; K weight rows of d numbers,
                           then one bias row of K numbers

Floats are written with ``repr`` (shortest string that round-trips exactly).
Writes go to a temporary file in the target directory and are renamed into
place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from vsmooth.core import EnsembleLogits, LogitMatrix
from vsmooth.errors import MalformedHeader, NonFiniteValue, RowCountMismatch
from vsmooth.synth import PatchClassifier, SynthSample


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _fmt_row(values: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def _lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _header(lines: list[str], tags: Sequence[str], n_ints: dict[str, int]) -> tuple[str, list[int]]:
    if not lines:
        raise MalformedHeader("empty file", line=1)
    parts = lines[0].split()
    if len(parts) < 2 or parts[0] not in tags:
        raise MalformedHeader(f"expected one of {', '.join(tags)}, got {lines[0]!r}", line=1)
    tag = parts[0]
    if parts[1] != "1":
        raise MalformedHeader(f"unsupported {tag} version {parts[1]!r}", line=1)
    if len(parts) != 2 + n_ints[tag]:
        raise MalformedHeader(f"{tag} header needs {n_ints[tag]} integers", line=1)
    try:
        dims = [int(p) for p in parts[2:]]
    except ValueError:
        raise MalformedHeader(f"non-integer dimension in {lines[0]!r}", line=1) from None
    if any(v < 0 for v in dims):
        raise MalformedHeader("negative dimension", line=1)
    return tag, dims


def _row(line: str, lineno: int, width: int) -> list[float]:
    parts = line.split()
    if len(parts) != width:
        raise RowCountMismatch(f"expected {width} values, got {len(parts)}", line=lineno)
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise NonFiniteValue(f"unparseable number in {line!r}", line=lineno) from None
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteValue("non-finite value", line=lineno)
    return vals


def _matrix(lines: list[str], start: int, rows: int, width: int) -> np.ndarray:
    """Parse ``rows`` lines beginning at 0-based index ``start``."""
    if len(lines) < start + rows:
        raise RowCountMismatch(
            f"expected {rows} rows, file ends after {len(lines) - start}", line=len(lines) + 1
        )
    return np.array([_row(lines[start + i], start + i + 1, width) for i in range(rows)], dtype=np.float64)


def _no_trailing(lines: list[str], consumed: int) -> None:
    if len(lines) > consumed:
        raise RowCountMismatch("more rows than the header declares", line=consumed + 1)


def write_logits(path, logits: LogitMatrix | EnsembleLogits) -> None:
    tag = "VSE" if isinstance(logits, EnsembleLogits) else "VSL"
    v = logits.values
    body = "\n".join(_fmt_row(r) for r in v)
    atomic_write_text(path, f"{tag} 1 {v.shape[0]} {v.shape[1]}\n{body}\n")


def read_logits(path) -> LogitMatrix | EnsembleLogits:
    lines = _lines(path)
    tag, (rows, K) = _header(lines, ("VSL", "VSE"), {"VSL": 2, "VSE": 2})
    values = _matrix(lines, 1, rows, K)
    _no_trailing(lines, 1 + rows)
    return EnsembleLogits(values) if tag == "VSE" else LogitMatrix(values)


def write_dataset(path, samples: Sequence[SynthSample], K: int) -> None:
    T, d = samples[0].patches.shape
    out = [f"VSD 1 {len(samples)} {T} {d} {K}"]
    for s in samples:
        out.append(str(int(s.label)))
        out.extend(_fmt_row(r) for r in s.patches)
    atomic_write_text(path, "\n".join(out) + "\n")


def read_dataset(path) -> tuple[list[SynthSample], int]:
    lines = _lines(path)
    _, (N, T, d, K) = _header(lines, ("VSD",), {"VSD": 4})
    samples = []
    pos = 1
    for _ in range(N):
        if pos >= len(lines):
            raise RowCountMismatch(f"expected {N} samples", line=pos + 1)
        try:
            label = int(lines[pos].strip())
        except ValueError:
            raise RowCountMismatch(f"expected a label line, got {lines[pos]!r}", line=pos + 1) from None
        if not 0 <= label < K:
            raise MalformedHeader(f"label {label} outside [0, {K})", line=pos + 1)
        patches = _matrix(lines, pos + 1, T, d)
        samples.append(SynthSample(patches=patches, label=label))
        pos += 1 + T
    _no_trailing(lines, pos)
    return samples, K


def write_model(path, clf: PatchClassifier) -> None:
    rows = [_fmt_row(r) for r in clf.weights] + [_fmt_row(clf.bias)]
    atomic_write_text(path, f"VSM 1 {clf.K} {clf.d}\n" + "\n".join(rows) + "\n")


def read_model(path) -> PatchClassifier:
    lines = _lines(path)
    _, (K, d) = _header(lines, ("VSM",), {"VSM": 2})
    W = _matrix(lines, 1, K, d)
    b = _matrix(lines, 1 + K, 1, K)[0]
    _no_trailing(lines, 2 + K)
    return PatchClassifier(W, b)
