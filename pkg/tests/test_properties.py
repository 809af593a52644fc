"""Property-based checks of the core invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from mida import (
    Dag,
    bh_select,
    covariance_of,
    dag_to_cpdag,
    decompose,
    enumerate_mec,
    parent_set_multiset,
    sample,
    total_effect,
)

from helpers import random_weighted_spec


@st.composite
def dags(draw, max_nodes=7):
    p = draw(st.integers(min_value=2, max_value=max_nodes))
    order = draw(st.permutations(list(range(1, p + 1))))
    edges = set()
    for a in range(p):
        for b in range(a + 1, p):
            if draw(st.booleans()):
                edges.add((order[a], order[b]))
    return Dag(p, frozenset(edges))


@settings(max_examples=40, deadline=None)
@given(dags())
def test_dag_is_member_of_its_own_class(dag):
    cpdag = dag_to_cpdag(dag)
    mec = enumerate_mec(cpdag)
    assert dag.edges in {d.edges for d in mec}
    assert all(d.skeleton() == dag.skeleton() for d in mec)
    assert all(d.v_structures() == dag.v_structures() for d in mec)


@settings(max_examples=25, deadline=None)
@given(dags(max_nodes=6))
def test_multiset_multiplicities_sum_to_mec_size(dag):
    cpdag = dag_to_cpdag(dag)
    size = len(enumerate_mec(cpdag))
    for node in range(1, dag.node_count + 1):
        assert parent_set_multiset(cpdag, node).mec_size == size


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_decomposition_identity_holds_for_any_draw(seed):
    rng = np.random.default_rng(seed)
    spec = random_weighted_spec(rng, int(rng.integers(4, 10)))
    sigma = covariance_of(spec)
    data = sample(spec, int(rng.integers(10, 120)), rng)
    size = int(rng.integers(1, 4))
    subset = tuple(sorted(
        rng.choice(np.arange(1, spec.p), size=size, replace=False).tolist()))
    dec = decompose(data, spec.p, subset, sigma, spec.means)
    assert dec.identity_gap < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_path_sums_agree_between_methods(seed):
    rng = np.random.default_rng(seed)
    spec = random_weighted_spec(rng, int(rng.integers(3, 9)))
    nodes = np.arange(1, spec.p + 1)
    src, dst = (int(x) for x in rng.choice(nodes, size=2, replace=False))
    held = {int(x) for x in rng.choice(nodes, size=1)} - {src, dst}
    assert abs(total_effect(spec, src, dst, held, method="linalg")
               - total_effect(spec, src, dst, held, method="paths")) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=40),
       st.floats(min_value=0.01, max_value=0.5))
def test_bh_selection_is_a_pvalue_lower_set(pvalues, alpha):
    selected = bh_select(pvalues, alpha)
    if selected:
        cutoff = max(pvalues[i] for i in selected)
        for i, p in enumerate(pvalues):
            if p < cutoff:
                assert i in selected
    k = len(selected)
    if k:
        assert sorted(pvalues)[k - 1] <= k * alpha / len(pvalues)
