#!/usr/bin/env python3
"""Regenerates the bundled toy datasets under data/.

data/toy: 20 small graphs in TU format. Class 0 holds sparse graphs (paths,
cycles, trees), class 1 dense random graphs plus one 8-clique, so the clique
is the only graph the default density filter (0.9) removes.

data/toy_node: one 30-node graph with two planted communities, node labels and
two-column node features, for the node and link tasks.
"""
import argparse
import random
from pathlib import Path


def write_tu(out: Path, prefix: str, graphs, graph_labels=None):
    out.mkdir(parents=True, exist_ok=True)
    a_rows, indicator, attrs, node_labels = [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs, start=1):
        for u, v in g["edges"]:
            a_rows.append(f"{u + offset + 1}, {v + offset + 1}")
            a_rows.append(f"{v + offset + 1}, {u + offset + 1}")
        for i in range(g["n"]):
            indicator.append(str(gi))
            attrs.append(", ".join(f"{x:g}" for x in g["features"][i]))
            if "node_labels" in g:
                node_labels.append(str(g["node_labels"][i]))
        offset += g["n"]
    (out / f"{prefix}_A.txt").write_text("\n".join(a_rows) + "\n")
    (out / f"{prefix}_graph_indicator.txt").write_text("\n".join(indicator) + "\n")
    (out / f"{prefix}_node_attributes.txt").write_text("\n".join(attrs) + "\n")
    if node_labels:
        (out / f"{prefix}_node_labels.txt").write_text("\n".join(node_labels) + "\n")
    if graph_labels is not None:
        (out / f"{prefix}_graph_labels.txt").write_text("\n".join(str(y) for y in graph_labels) + "\n")


def features(n, rng):
    return [[1.0 if i % 3 == k else 0.0 for k in range(3)] for i in range(n)]


def sparse_graph(kind, n, rng):
    if kind == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if kind == "cycle":
        return [(i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i) for i in range(n)]
    return [(rng.randrange(i), i) for i in range(1, n)]  # random recursive tree


def dense_graph(n, p, rng):
    while True:
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        degree = [0] * n
        for u, v in edges:
            degree[u] += 1
            degree[v] += 1
        if min(degree) > 0:
            return edges


def toy_graphs(rng):
    graphs, labels = [], []
    kinds = ["path", "cycle", "tree"]
    for i in range(10):
        n = rng.randint(8, 12)
        graphs.append({"n": n, "edges": sparse_graph(kinds[i % 3], n, rng), "features": features(n, rng)})
        labels.append(0)
    for i in range(9):
        n = rng.randint(8, 12)
        graphs.append({"n": n, "edges": dense_graph(n, 0.55, rng), "features": features(n, rng)})
        labels.append(1)
    clique = [(u, v) for u in range(8) for v in range(u + 1, 8)]
    graphs.append({"n": 8, "edges": clique, "features": features(8, rng)})
    labels.append(1)
    return graphs, labels


def community_graph(rng):
    n = 30
    block = [0 if i < 15 else 1 for i in range(n)]
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = 0.35 if block[u] == block[v] else 0.04
            if rng.random() < p:
                edges.append((u, v))
    feats = [[round(rng.gauss(1.0 if block[i] else -1.0, 1.0), 3), 1.0] for i in range(n)]
    return {"n": n, "edges": edges, "features": feats, "node_labels": block}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    graphs, labels = toy_graphs(rng)
    write_tu(args.out / "toy", "TOY", graphs, labels)
    write_tu(args.out / "toy_node", "TOYNODE", [community_graph(rng)])


if __name__ == "__main__":
    main()
