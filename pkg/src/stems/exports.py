"""CSV export of inspectable internals: graph weights and attention patterns."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .graph import BuildingGraph


def write_graph_csv(graph: BuildingGraph, building_ids, path: str | Path) -> None:
    """N x N weight matrix with building ids as row and column headers."""
    ids = list(building_ids)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [str(i) for i in ids])
        for r, bid in enumerate(ids):
            writer.writerow([str(bid)] + [repr(float(v)) for v in graph.weights[r]])


def read_graph_csv(path: str | Path) -> tuple[list[int], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ids = [int(v) for v in rows[0][1:]]
    weights = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return ids, weights


def write_attention_csv(weights: np.ndarray, building_ids, path: str | Path) -> None:
    """Rows (building, head, offset, weight); offset 0 is the current step,
    negative offsets look back in time. Weights per (building, head) sum to 1."""
    n, heads, window = weights.shape
    ids = list(building_ids)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["building", "head", "offset", "weight"])
        for b in range(n):
            for h in range(heads):
                for w in range(window):
                    writer.writerow([ids[b], h, w - (window - 1),
                                     repr(float(weights[b, h, w]))])


def read_attention_csv(path: str | Path) -> tuple[list[int], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [(int(r["building"]), int(r["head"]), int(r["offset"]),
                 float(r["weight"])) for r in reader]
    ids = sorted({b for b, _, _, _ in rows})
    heads = max(h for _, h, _, _ in rows) + 1
    offsets = sorted({o for _, _, o, _ in rows})
    id_index = {b: i for i, b in enumerate(ids)}
    off_index = {o: i for i, o in enumerate(offsets)}
    out = np.zeros((len(ids), heads, len(offsets)))
    for b, h, o, w in rows:
        out[id_index[b], h, off_index[o]] = w
    return ids, out
