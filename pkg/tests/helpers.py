"""Shared test utilities: brute-force graph oracles and random generators."""

from __future__ import annotations

import itertools

import numpy as np

from mida import Dag, LsemSpec


def all_dags(p: int):
    """Every labeled DAG on p nodes, by orienting/omitting each unordered pair."""
    pairs = list(itertools.combinations(range(1, p + 1), 2))
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = set()
        for (a, b), c in zip(pairs, choice):
            if c == 1:
                edges.add((a, b))
            elif c == 2:
                edges.add((b, a))
        if _acyclic(p, edges):
            yield Dag(p, frozenset(edges))


def _acyclic(p: int, edges: set[tuple[int, int]]) -> bool:
    indeg = {i: 0 for i in range(1, p + 1)}
    children = {i: [] for i in range(1, p + 1)}
    for i, j in edges:
        indeg[j] += 1
        children[i].append(j)
    frontier = [i for i, d in indeg.items() if d == 0]
    seen = 0
    while frontier:
        u = frontier.pop()
        seen += 1
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                frontier.append(v)
    return seen == p


def mec_classes(p: int) -> dict:
    """Partition of all p-node DAGs by (skeleton, v-structures)."""
    classes: dict = {}
    for dag in all_dags(p):
        key = (dag.skeleton(), dag.v_structures())
        classes.setdefault(key, []).append(dag)
    return classes


def consistent_extensions(cpdag) -> set[frozenset]:
    """Brute-force filter: orientations of the skeleton that are acyclic DAGs
    with exactly the CPDAG's v-structures and all its directed edges."""
    skeleton = sorted(tuple(sorted(e)) for e in cpdag.skeleton)
    target_v = cpdag.v_structures()
    out = set()
    for choice in itertools.product((0, 1), repeat=len(skeleton)):
        edges = set()
        for (a, b), c in zip(skeleton, choice):
            edges.add((a, b) if c == 0 else (b, a))
        if not _acyclic(cpdag.node_count, edges):
            continue
        if not set(cpdag.directed_edges) <= edges:
            continue
        dag = Dag(cpdag.node_count, frozenset(edges))
        if dag.v_structures() == target_v:
            out.add(dag.edges)
    return out


def random_dag(rng: np.random.Generator, p: int, edge_prob: float = 0.35) -> Dag:
    order = rng.permutation(np.arange(1, p + 1))
    edges = set()
    for a in range(p):
        for b in range(a + 1, p):
            if rng.random() < edge_prob:
                edges.add((int(order[a]), int(order[b])))
    return Dag(p, frozenset(edges))


def random_weighted_spec(
    rng: np.random.Generator,
    p: int,
    edge_prob: float = 0.35,
    error_family: str = "gaussian",
    standardized: bool = False,
) -> LsemSpec:
    from mida import standardize_spec

    dag = random_dag(rng, p, edge_prob)
    weights = np.zeros((p, p))
    for i, j in sorted(dag.edges):
        mag = rng.uniform(0.5, 1.0)
        weights[i - 1, j - 1] = mag if rng.random() < 0.5 else -mag
    spec = LsemSpec(
        dag=dag,
        weights=weights,
        error_variances=rng.uniform(0.5, 1.0, p),
        error_family=error_family,
    )
    return standardize_spec(spec) if standardized else spec
