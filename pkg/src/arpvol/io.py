"""
CSV/JSON readers and writers for matrices, sector maps, return panels and run manifests.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def write_matrix(M, path) -> None:
    """Write every entry as an ``i,j,value`` row."""
    M = np.asarray(M, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                w.writerow([i, j, repr(float(M[i, j]))])


def read_matrix(path) -> np.ndarray:
    """Read an ``i,j,value`` CSV; a single stored triangle is mirrored."""
    path = Path(path)
    entries = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["i", "j", "value"]:
            raise ValueError(f"{path}:1: expected header 'i,j,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i, j, v = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative index")
            entries[i, j] = v
    if not entries:
        raise ValueError(f"{path}: empty matrix")
    p = 1 + max(max(i, j) for i, j in entries)
    M = np.full((p, p), np.nan)
    for (i, j), v in entries.items():
        M[i, j] = v
    M = np.where(np.isnan(M), M.T, M)
    if np.isnan(M).any():
        i, j = np.argwhere(np.isnan(M))[0]
        raise ValueError(f"{path}: missing entry ({i}, {j})")
    return M


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def matrix_summary(M) -> dict:
    lam = np.linalg.eigvalsh(0.5 * (np.asarray(M) + np.asarray(M).T))
    return {"p": int(lam.size), "min_eigenvalue": float(lam[0]), "max_eigenvalue": float(lam[-1])}


def read_sectors(path, asset_ids=None) -> np.ndarray:
    """Read ``asset_id,sector_id`` and return sector labels ordered like ``asset_ids``.

    Without ``asset_ids`` the labels follow sorted asset ids.
    """
    path = Path(path)
    table = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["asset_id", "sector_id"]:
            raise ValueError(f"{path}:1: expected header 'asset_id,sector_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields")
            table[int(row[0])] = row[1].strip()
    ids = sorted(table) if asset_ids is None else list(asset_ids)
    missing = [a for a in ids if a not in table]
    if missing:
        raise ValueError(f"{path}: no sector for assets {missing[:5]}")
    return np.array([table[a] for a in ids])


def write_returns(panel, path) -> None:
    """Write a list of per-day ``(intervals, p)`` arrays as ``day,interval,asset_id,return``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "interval", "asset_id", "return"])
        for d, R in enumerate(panel):
            for k, row in enumerate(np.asarray(R)):
                for i, v in enumerate(row):
                    w.writerow([d, k, i, repr(float(v))])


def read_returns(path) -> list:
    path = Path(path)
    cells = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["day", "interval", "asset_id", "return"]:
            raise ValueError(f"{path}:1: expected header 'day,interval,asset_id,return'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cells[int(row[0]), int(row[1]), int(row[2])] = float(row[3])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
    if not cells:
        raise ValueError(f"{path}: no returns")
    days = 1 + max(k[0] for k in cells)
    p = 1 + max(k[2] for k in cells)
    out = []
    for d in range(days):
        m = 1 + max((k[1] for k in cells if k[0] == d), default=-1)
        R = np.full((m, p), np.nan)
        for (dd, k, i), v in cells.items():
            if dd == d:
                R[k, i] = v
        if np.isnan(R).any() or m == 0:
            raise ValueError(f"{path}: day {d} has missing cells")
        out.append(R)
    return out


def write_rows(rows, path, columns=None) -> None:
    """Write a list of dicts as CSV; an empty list still gets its header when ``columns`` is given."""
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
