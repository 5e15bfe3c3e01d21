#!/usr/bin/env python3
"""Convert a citation network in the classic LINQS layout to the plain-text
dataset format (edges.txt / features.txt / labels.txt / meta.json).

Expected inputs (e.g. from the Cora archive):
    <name>.content   lines: <paper_id> <f_1 ... f_d> <label_string>
    <name>.cites     lines: <cited_id> <citing_id>

Usage:
    python scripts/convert_planetoid.py cora.content cora.cites data/cora --name cora
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sagt.data import save_dataset  # noqa: E402
from sagt.graph import Graph  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("content")
    parser.add_argument("cites")
    parser.add_argument("out_dir")
    parser.add_argument("--name", default="dataset")
    args = parser.parse_args()

    ids, rows, label_strings = [], [], []
    with open(args.content, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append(np.asarray(parts[1:-1], dtype=np.float64))
            label_strings.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = sorted(set(label_strings))
    y = np.asarray([classes.index(s) for s in label_strings], dtype=np.int64)
    X = np.vstack(rows)

    edges, skipped = [], 0
    with open(args.cites, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = index.get(parts[0]), index.get(parts[1])
            if a is None or b is None:
                skipped += 1
                continue
            edges.append((a, b))

    g = Graph.from_edge_list(len(ids), edges, X, y, u=len(classes))
    save_dataset(args.out_dir, g, name=args.name)
    print(f"wrote {args.out_dir}: n={g.n} d={g.d} u={g.u} "
          f"edges={g.num_edges} (skipped {skipped} dangling citations)")
    print("classes:", ", ".join(f"{i}={c}" for i, c in enumerate(classes)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
