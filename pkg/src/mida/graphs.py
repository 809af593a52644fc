"""DAGs, CPDAGs, Meek-rule closure and Markov-equivalence-class enumeration.

Nodes are 1-indexed everywhere. A CPDAG represents a Markov equivalence
class (MEC): two DAGs are Markov equivalent iff they share skeleton and
v-structures, and the CPDAG directs exactly the edges that every member
of the class directs the same way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import CapacityError, GraphFormatError, InvalidGraphError

Edge = tuple[int, int]


def _check_node(i: int, node_count: int) -> None:
    if not (1 <= i <= node_count):
        raise InvalidGraphError(f"node {i} out of range 1..{node_count}")


def _topological_order(node_count: int, edges: frozenset[Edge]) -> list[int]:
    """Kahn's algorithm; raises InvalidGraphError on a cycle."""
    indeg = {i: 0 for i in range(1, node_count + 1)}
    children: dict[int, list[int]] = {i: [] for i in indeg}
    for i, j in edges:
        indeg[j] += 1
        children[i].append(j)
    frontier = sorted(i for i, d in indeg.items() if d == 0)
    order: list[int] = []
    while frontier:
        u = frontier.pop(0)
        order.append(u)
        for v in sorted(children[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                frontier.append(v)
    if len(order) != node_count:
        raise InvalidGraphError("graph contains a directed cycle")
    return order


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on nodes 1..node_count."""

    node_count: int
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise InvalidGraphError("node_count must be positive")
        object.__setattr__(self, "edges", frozenset(self.edges))
        seen_pairs: set[frozenset[int]] = set()
        for i, j in self.edges:
            _check_node(i, self.node_count)
            _check_node(j, self.node_count)
            if i == j:
                raise InvalidGraphError(f"self-loop at node {i}")
            pair = frozenset((i, j))
            if pair in seen_pairs:
                raise InvalidGraphError(f"both orientations present between {i} and {j}")
            seen_pairs.add(pair)
        _topological_order(self.node_count, self.edges)

    def parents(self, j: int) -> frozenset[int]:
        _check_node(j, self.node_count)
        return frozenset(i for i, k in self.edges if k == j)

    def children(self, i: int) -> frozenset[int]:
        _check_node(i, self.node_count)
        return frozenset(k for a, k in self.edges if a == i)

    def topological_order(self) -> list[int]:
        return _topological_order(self.node_count, self.edges)

    def skeleton(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(e) for e in self.edges)

    def v_structures(self) -> frozenset[tuple[int, int, int]]:
        """Colliders i -> k <- j with i, j nonadjacent, canonicalized as (min, k, max)."""
        adj = self.skeleton()
        out = set()
        for k in range(1, self.node_count + 1):
            pa = sorted(self.parents(k))
            for i, j in itertools.combinations(pa, 2):
                if frozenset((i, j)) not in adj:
                    out.add((i, k, j))
        return frozenset(out)

    def induced_subgraph(self, nodes: list[int]) -> "Dag":
        """Sub-DAG on the given nodes, relabeled 1..len(nodes) in list order."""
        relabel = {v: r + 1 for r, v in enumerate(nodes)}
        keep = set(nodes)
        edges = frozenset(
            (relabel[i], relabel[j]) for i, j in self.edges if i in keep and j in keep
        )
        return Dag(len(nodes), edges)

    def to_text(self) -> str:
        lines = [f"p={self.node_count}"]
        lines += [f"{i} -> {j}" for i, j in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Dag":
        p, directed, undirected = _parse_graph_text(text)
        if undirected:
            raise GraphFormatError("undirected edges are not allowed in a DAG")
        return cls(p, frozenset(directed))


@dataclass(frozen=True)
class Cpdag:
    """Partially directed graph with directed and undirected edge sets.

    Valid instances have an acyclic directed part, disjoint edge sets on
    unordered pairs, and are closed under Meek rules R1-R4.
    """

    node_count: int
    directed_edges: frozenset[Edge]
    undirected_edges: frozenset[frozenset[int]]

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise InvalidGraphError("node_count must be positive")
        object.__setattr__(self, "directed_edges", frozenset(self.directed_edges))
        object.__setattr__(
            self, "undirected_edges", frozenset(frozenset(e) for e in self.undirected_edges)
        )
        dir_pairs: set[frozenset[int]] = set()
        for i, j in self.directed_edges:
            _check_node(i, self.node_count)
            _check_node(j, self.node_count)
            if i == j:
                raise InvalidGraphError(f"self-loop at node {i}")
            pair = frozenset((i, j))
            if pair in dir_pairs:
                raise InvalidGraphError(f"both orientations present between {i} and {j}")
            dir_pairs.add(pair)
        for pair in self.undirected_edges:
            if len(pair) != 2:
                raise InvalidGraphError(f"bad undirected edge {set(pair)}")
            a, b = sorted(pair)
            _check_node(a, self.node_count)
            _check_node(b, self.node_count)
            if pair in dir_pairs:
                raise InvalidGraphError(
                    f"edge {a}-{b} is both directed and undirected"
                )
        _topological_order(self.node_count, self.directed_edges)
        # Cycle-guarded closure coincides with the plain one on any graph whose
        # directed part cannot force a cycle, i.e. on every completed pattern.
        closed_dir, closed_undir = meek_closure(
            self.node_count, self.directed_edges, self.undirected_edges,
            guard_cycles=True,
        )
        if closed_dir != self.directed_edges or closed_undir != self.undirected_edges:
            raise InvalidGraphError("graph is not closed under Meek rules")

    @property
    def skeleton(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(e) for e in self.directed_edges) | self.undirected_edges

    def v_structures(self) -> frozenset[tuple[int, int, int]]:
        adj = self.skeleton
        parents: dict[int, list[int]] = {k: [] for k in range(1, self.node_count + 1)}
        for i, j in self.directed_edges:
            parents[j].append(i)
        out = set()
        for k, pa in parents.items():
            for i, j in itertools.combinations(sorted(pa), 2):
                if frozenset((i, j)) not in adj:
                    out.add((i, k, j))
        return frozenset(out)

    def chain_components(self) -> list[list[int]]:
        """Connected components of the undirected part, sorted node lists."""
        neighbors: dict[int, set[int]] = {}
        for pair in self.undirected_edges:
            a, b = sorted(pair)
            neighbors.setdefault(a, set()).add(b)
            neighbors.setdefault(b, set()).add(a)
        seen: set[int] = set()
        comps: list[list[int]] = []
        for start in sorted(neighbors):
            if start in seen:
                continue
            stack, comp = [start], set()
            while stack:
                u = stack.pop()
                if u in comp:
                    continue
                comp.add(u)
                stack.extend(neighbors[u] - comp)
            seen |= comp
            comps.append(sorted(comp))
        return comps

    def to_text(self) -> str:
        lines = [f"p={self.node_count}"]
        lines += [f"{i} -> {j}" for i, j in sorted(self.directed_edges)]
        lines += [f"{a} -- {b}" for a, b in sorted(tuple(sorted(e)) for e in self.undirected_edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Cpdag":
        p, directed, undirected = _parse_graph_text(text)
        return cls(p, frozenset(directed), frozenset(frozenset(e) for e in undirected))


@dataclass(frozen=True)
class ParentSetMultiset:
    """Distinct parent sets of one node across a MEC, with multiplicities."""

    entries: tuple[tuple[frozenset[int], int], ...]

    def __post_init__(self) -> None:
        for pa, mult in self.entries:
            if mult < 1:
                raise InvalidGraphError("multiplicity must be positive")
        object.__setattr__(
            self,
            "entries",
            tuple(sorted(self.entries, key=lambda e: tuple(sorted(e[0])))),
        )

    @property
    def mec_size(self) -> int:
        return sum(m for _, m in self.entries)

    @property
    def distinct_count(self) -> int:
        return len(self.entries)


def _parse_graph_text(text: str) -> tuple[int, set[Edge], set[tuple[int, int]]]:
    p: int | None = None
    directed: set[Edge] = set()
    undirected: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        compact = line.replace(" ", "").replace("\t", "")
        if compact.startswith("p="):
            if p is not None:
                raise GraphFormatError(f"line {lineno}: duplicate header")
            try:
                p = int(compact[2:])
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: bad node count") from exc
            continue
        if p is None:
            raise GraphFormatError(f"line {lineno}: missing 'p=<int>' header")
        if "->" in compact:
            lhs, rhs = compact.split("->", 1)
            kind = "directed"
        elif "--" in compact:
            lhs, rhs = compact.split("--", 1)
            kind = "undirected"
        else:
            raise GraphFormatError(f"line {lineno}: expected 'i -> j' or 'i -- j'")
        try:
            i, j = int(lhs), int(rhs)
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: bad node index") from exc
        if kind == "directed":
            directed.add((i, j))
        else:
            undirected.add((min(i, j), max(i, j)))
    if p is None:
        raise GraphFormatError("missing 'p=<int>' header")
    return p, directed, undirected


class _Pdag:
    """Mutable partially directed graph used by Meek closure and enumeration."""

    __slots__ = ("node_count", "directed", "undirected", "_adj", "_parents", "_children")

    def __init__(
        self,
        node_count: int,
        directed: frozenset[Edge] | set[Edge],
        undirected: frozenset[frozenset[int]] | set[frozenset[int]],
    ) -> None:
        self.node_count = node_count
        self.directed: set[Edge] = set(directed)
        self.undirected: set[frozenset[int]] = set(frozenset(e) for e in undirected)
        self._adj: dict[int, set[int]] = {i: set() for i in range(1, node_count + 1)}
        self._parents: dict[int, set[int]] = {i: set() for i in range(1, node_count + 1)}
        self._children: dict[int, set[int]] = {i: set() for i in range(1, node_count + 1)}
        for i, j in self.directed:
            self._adj[i].add(j)
            self._adj[j].add(i)
            self._parents[j].add(i)
            self._children[i].add(j)
        for pair in self.undirected:
            a, b = tuple(pair)
            self._adj[a].add(b)
            self._adj[b].add(a)

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def has_directed(self, a: int, b: int) -> bool:
        return (a, b) in self.directed

    def undirected_neighbors(self, a: int) -> list[int]:
        return sorted(b for b in self._adj[a] if frozenset((a, b)) in self.undirected)

    def reaches(self, src: int, dst: int) -> bool:
        """Directed reachability src ~> dst through currently directed edges."""
        if src == dst:
            return True
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            for v in self._children[u]:
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def orient(self, a: int, b: int) -> None:
        pair = frozenset((a, b))
        self.undirected.discard(pair)
        self.directed.add((a, b))
        self._parents[b].add(a)
        self._children[a].add(b)

    def unorient(self, a: int, b: int) -> None:
        self.directed.discard((a, b))
        self._parents[b].discard(a)
        self._children[a].discard(b)
        self.undirected.add(frozenset((a, b)))


def _meek_candidates(g: _Pdag, rule: int) -> list[Edge]:
    """Orientations (a, b) mandated by one Meek rule on the current graph."""
    out: list[Edge] = []
    if rule == 1:
        # R1: a -> b, b - c, a and c nonadjacent  =>  b -> c
        for a, b in sorted(g.directed):
            for c in g.undirected_neighbors(b):
                if c != a and not g.adjacent(a, c):
                    out.append((b, c))
    elif rule == 2:
        # R2: a -> c -> b with a - b  =>  a -> b
        for pair in sorted(g.undirected, key=sorted):
            a, b = sorted(pair)
            for x, y in ((a, b), (b, a)):
                if any(g.has_directed(x, c) and g.has_directed(c, y) for c in sorted(g._adj[x])):
                    out.append((x, y))
    elif rule == 3:
        # R3: a - b, a - c, a - d, c -> b, d -> b, c and d nonadjacent  =>  a -> b
        for pair in sorted(g.undirected, key=sorted):
            a, b = sorted(pair)
            for x, y in ((a, b), (b, a)):
                cand = [c for c in g.undirected_neighbors(x) if c != y and g.has_directed(c, y)]
                for c, d in itertools.combinations(cand, 2):
                    if not g.adjacent(c, d):
                        out.append((x, y))
                        break
    elif rule == 4:
        # R4: a - b, a - c, c -> d, d -> b, c and b nonadjacent, a and d adjacent  =>  a -> b
        for pair in sorted(g.undirected, key=sorted):
            a, b = sorted(pair)
            for x, y in ((a, b), (b, a)):
                hit = False
                for c in g.undirected_neighbors(x):
                    if c == y or g.adjacent(c, y):
                        continue
                    for d in sorted(g._children[c]):
                        if g.has_directed(d, y) and g.adjacent(x, d):
                            out.append((x, y))
                            hit = True
                            break
                    if hit:
                        break
    else:  # pragma: no cover
        raise ValueError(f"unknown Meek rule {rule}")
    return out


def meek_closure(
    node_count: int,
    directed: frozenset[Edge] | set[Edge],
    undirected: frozenset[frozenset[int]] | set[frozenset[int]],
    rule_order: tuple[int, ...] = (1, 2, 3, 4),
    guard_cycles: bool = False,
) -> tuple[frozenset[Edge], frozenset[frozenset[int]]]:
    """Apply Meek rules in the given order until nothing changes.

    The fixpoint does not depend on rule_order; the parameter exists so tests
    can verify that. With guard_cycles=True an orientation that would close a
    directed cycle is skipped instead of applied (used when repairing graphs
    built from conflicting constraint-test results).
    """
    g = _Pdag(node_count, directed, undirected)
    skipped: set[Edge] = set()
    changed = True
    while changed:
        changed = False
        for rule in rule_order:
            for a, b in _meek_candidates(g, rule):
                if frozenset((a, b)) not in g.undirected:
                    continue
                if guard_cycles and (a, b) in skipped:
                    continue
                if guard_cycles and g.reaches(b, a):
                    skipped.add((a, b))
                    continue
                g.orient(a, b)
                changed = True
    return frozenset(g.directed), frozenset(g.undirected)


def dag_to_cpdag(dag: Dag) -> Cpdag:
    """CPDAG of the Markov equivalence class of the given DAG.

    Edges on v-structures keep their orientation; everything else starts
    undirected and Meek rules propagate the remaining forced orientations.
    """
    directed: set[Edge] = set()
    for i, k, j in dag.v_structures():
        directed.add((i, k))
        directed.add((j, k))
    undirected = {frozenset(e) for e in dag.edges if (e[0], e[1]) not in directed}
    closed_dir, closed_undir = meek_closure(dag.node_count, directed, undirected)
    return Cpdag(dag.node_count, closed_dir, closed_undir)


def _component_orientations(
    cpdag: Cpdag, component: list[int]
) -> list[frozenset[Edge]]:
    """All orientations of one chain component's undirected edges that keep the
    graph acyclic and create no v-structure, given the CPDAG's directed edges."""
    comp = set(component)
    edges = sorted(
        tuple(sorted(pair)) for pair in cpdag.undirected_edges if set(pair) <= comp
    )
    g = _Pdag(cpdag.node_count, cpdag.directed_edges, [frozenset(e) for e in edges])
    results: list[frozenset[Edge]] = []
    chosen: list[Edge] = []

    def admissible(a: int, b: int) -> bool:
        # no directed cycle a ~> ... ~> a through b
        if g.reaches(b, a):
            return False
        # no new collider at b: existing w -> b with w, a nonadjacent
        for w in g._parents[b]:
            if w != a and not g.adjacent(w, a):
                return False
        return True

    def recurse(idx: int) -> None:
        if idx == len(edges):
            results.append(frozenset(chosen))
            return
        u, v = edges[idx]
        for a, b in ((u, v), (v, u)):
            if admissible(a, b):
                g.orient(a, b)
                chosen.append((a, b))
                recurse(idx + 1)
                chosen.pop()
                g.unorient(a, b)

    recurse(0)
    return results


def _checked_components(cpdag: Cpdag, max_component_size: int) -> list[list[int]]:
    comps = cpdag.chain_components()
    for comp in comps:
        if len(comp) > max_component_size:
            raise CapacityError(
                f"chain component {comp} has {len(comp)} nodes, "
                f"exceeding max_component_size={max_component_size}"
            )
    return comps


def enumerate_mec(cpdag: Cpdag, max_component_size: int = 12) -> list[Dag]:
    """All DAGs in the Markov equivalence class represented by the CPDAG.

    Chain components are oriented independently and combined; every candidate
    is verified globally (acyclic, v-structures unchanged) before being
    returned, so the output is exact even for unusual but valid inputs.
    """
    comps = _checked_components(cpdag, max_component_size)
    per_comp = [_component_orientations(cpdag, comp) for comp in comps]
    target_v = cpdag.v_structures()
    out: list[Dag] = []
    for combo in itertools.product(*per_comp) if per_comp else [()]:
        edges = set(cpdag.directed_edges)
        for oriented in combo:
            edges |= oriented
        try:
            dag = Dag(cpdag.node_count, frozenset(edges))
        except InvalidGraphError:
            continue
        if dag.v_structures() == target_v:
            out.append(dag)
    return out


def parent_set_multiset(
    cpdag: Cpdag, node: int, max_component_size: int = 12
) -> ParentSetMultiset:
    """Multiset of parent sets of `node` across the MEC of the CPDAG.

    Only the chain component containing the node affects which parent sets
    occur; the other components just multiply every multiplicity by their
    own orientation counts.
    """
    _check_node(node, cpdag.node_count)
    comps = _checked_components(cpdag, max_component_size)
    fixed_parents = frozenset(i for i, j in cpdag.directed_edges if j == node)
    own: list[list[int]] = [c for c in comps if node in set(c)]
    other_count = 1
    for comp in comps:
        if own and comp == own[0]:
            continue
        other_count *= len(_component_orientations(cpdag, comp))
    counts: dict[frozenset[int], int] = {}
    if not own:
        counts[fixed_parents] = 1
    else:
        for oriented in _component_orientations(cpdag, own[0]):
            pa = fixed_parents | {a for a, b in oriented if b == node}
            counts[pa] = counts.get(pa, 0) + 1
    entries = tuple((pa, m * other_count) for pa, m in counts.items())
    return ParentSetMultiset(entries)
