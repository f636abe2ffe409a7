"""File formats: feature dumps, JSON reports, JSONL train logs, CSV tables.

All writers go through atomic_write_text (write-temp-then-rename) so a
crashed run never leaves a half-written file, and all numeric output uses
17 significant digits so logs are diffable across platforms.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np


def fmt(x) -> str:
    """Format a float with full float64 round-trip precision."""
    return f"{float(x):.17g}"


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_feature_dump(path, features: np.ndarray, labels: np.ndarray, K: int) -> None:
    """Text dump: header `N d K`, then N lines of `label f_1 ... f_d`.

    Labels are 1-based class indices.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    N, d = features.shape
    lines = [f"{N} {d} {K}"]
    for lab, row in zip(labels, features):
        lines.append(str(int(lab)) + " " + " ".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_feature_dump(path):
    """Parse a feature dump; returns (features, labels, K).

    Raises ValueError naming the offending 1-based line on malformed input.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: line 1: expected header 'N d K', got {header!r}")
        try:
            N, d, K = (int(h) for h in header)
        except ValueError:
            raise ValueError(f"{path}: line 1: non-integer header {header!r}") from None
        features = np.empty((N, d), dtype=np.float64)
        labels = np.empty(N, dtype=np.int64)
        for i in range(N):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: line {i + 2}: unexpected end of file ({i} of {N} rows read)")
            parts = line.split()
            if len(parts) != d + 1:
                raise ValueError(f"{path}: line {i + 2}: expected {d + 1} fields, got {len(parts)}")
            try:
                labels[i] = int(parts[0])
                features[i] = [float(p) for p in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}: line {i + 2}: unparsable number") from None
            if not 1 <= labels[i] <= K:
                raise ValueError(f"{path}: line {i + 2}: label {labels[i]} outside 1..{K}")
    return features, labels, K


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_jsonl(path, records) -> None:
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, header, rows) -> None:
    """Comma-separated table; floats formatted at full precision."""
    lines = [",".join(header)]
    for row in rows:
        cells = [fmt(c) if isinstance(c, float) else str(c) for c in row]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_kv_block(path, mapping) -> None:
    """Flat `key value` text block (one pair per line)."""
    lines = []
    for key, value in mapping.items():
        cell = fmt(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} {cell}")
    atomic_write_text(path, "\n".join(lines) + "\n")
