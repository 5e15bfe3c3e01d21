"""Plain-text dataset directory format and numeric artifact persistence.

A dataset directory contains four UTF-8, LF-terminated files:

    edges.txt     one edge per line, ``u<TAB>v``, 0-based node ids
    features.txt  n lines of d space-separated decimal reals
    labels.txt    n lines, one integer label each
    meta.json     {"n": int, "d": int, "u": int, "name": str}

Floats are written with ``repr``, which round-trips float64 exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .graph import Graph


class DatasetError(ValueError):
    """Malformed dataset directory; message names the file and line."""


def _fail(path, lineno, msg):
    where = f"{path}:{lineno}" if lineno is not None else str(path)
    raise DatasetError(f"{where}: {msg}")


def load_dataset(dirpath) -> Graph:
    """Parse, validate, and clean a dataset directory into a Graph."""
    meta_path = os.path.join(dirpath, "meta.json")
    for name in ("edges.txt", "features.txt", "labels.txt", "meta.json"):
        if not os.path.exists(os.path.join(dirpath, name)):
            raise DatasetError(f"{dirpath}: missing {name}")
    with open(meta_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as e:
            _fail(meta_path, e.lineno, f"invalid JSON: {e.msg}")
    for key in ("n", "d", "u"):
        if key not in meta or not isinstance(meta[key], int) or meta[key] < 0:
            _fail(meta_path, None, f"meta field {key!r} must be a nonnegative int")
    n, d, u = meta["n"], meta["d"], meta["u"]

    edges_path = os.path.join(dirpath, "edges.txt")
    edge_list = []
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                _fail(edges_path, lineno, f"expected 'u<TAB>v', got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                _fail(edges_path, lineno, f"non-integer node id in {line!r}")
            if not (0 <= a < n and 0 <= b < n):
                _fail(edges_path, lineno, f"node id out of range [0, {n}): {line!r}")
            edge_list.append((a, b))

    features_path = os.path.join(dirpath, "features.txt")
    X = read_matrix_txt(features_path, expect_rows=n, expect_cols=d)

    labels_path = os.path.join(dirpath, "labels.txt")
    y = np.zeros(n, dtype=np.int64)
    with open(labels_path, encoding="utf-8") as fh:
        count = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if count >= n:
                _fail(labels_path, lineno, f"more than {n} labels")
            try:
                lab = int(line)
            except ValueError:
                _fail(labels_path, lineno, f"non-integer label {line!r}")
            if not (0 <= lab < u):
                _fail(labels_path, lineno, f"label {lab} out of range [0, {u})")
            y[count] = lab
            count += 1
    if count != n:
        _fail(labels_path, count + 1, f"expected {n} labels, found {count}")

    return Graph.from_edge_list(n=n, edge_list=edge_list, X=X, y=y, u=u)


def save_dataset(dirpath, g: Graph, name: str = "dataset") -> None:
    os.makedirs(dirpath, exist_ok=True)
    with open(os.path.join(dirpath, "edges.txt"), "w", encoding="utf-8") as fh:
        for a, b in g.edge_array():
            fh.write(f"{a}\t{b}\n")
    write_matrix_txt(os.path.join(dirpath, "features.txt"), g.X)
    with open(os.path.join(dirpath, "labels.txt"), "w", encoding="utf-8") as fh:
        for lab in g.y:
            fh.write(f"{lab}\n")
    meta = {"n": g.n, "d": g.d, "u": g.u, "name": name}
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def write_matrix_txt(path, M) -> None:
    """Space-separated text matrix; exact float64 round-trip via repr."""
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(" ".join(repr(v) for v in row.tolist()))
            fh.write("\n")


def read_matrix_txt(path, expect_rows=None, expect_cols=None) -> np.ndarray:
    rows = []
    ncols = expect_cols
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if ncols is None:
                ncols = len(parts)
            if len(parts) != ncols:
                _fail(path, lineno, f"expected {ncols} values, got {len(parts)}")
            try:
                rows.append(np.asarray(parts, dtype=np.float64))
            except ValueError:
                bad = next(p for p in parts if not _is_float(p))
                _fail(path, lineno, f"non-numeric token {bad!r}")
    if expect_rows is not None and len(rows) != expect_rows:
        _fail(path, len(rows) + 1, f"expected {expect_rows} rows, found {len(rows)}")
    if not rows:
        return np.zeros((0, ncols or 0), dtype=np.float64)
    return np.vstack(rows)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def write_subgraphs(path, sequences) -> None:
    """One line per sequence, ``target<TAB>id id ...``, q consecutive per node."""
    with open(path, "w", encoding="utf-8") as fh:
        for per_node in sequences:
            for seq in per_node:
                rest = " ".join(str(i) for i in seq.nodes[1:])
                fh.write(f"{seq.target}\t{rest}\n")


def read_subgraphs(path, n: int, q: int):
    """Inverse of :func:`write_subgraphs`; returns nested node-id lists."""
    from .sampler import SubgraphSequence

    flat = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            head, _, rest = line.partition("\t")
            try:
                target = int(head)
                ids = [int(t) for t in rest.split()] if rest.strip() else []
            except ValueError:
                _fail(path, lineno, f"non-integer node id in {line!r}")
            flat.append(SubgraphSequence(nodes=(target, *ids), target=target))
    if len(flat) != n * q:
        _fail(path, None, f"expected {n * q} sequences, found {len(flat)}")
    return [flat[i * q : (i + 1) * q] for i in range(n)]
