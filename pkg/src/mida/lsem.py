"""Linear structural equation models: specification, random generation per the
simulation protocol, exact covariance, sampling, and analytic causal effects.

Conventions: variables are X1..Xp with X1 the treatment and Xp the response;
weights[i-1, j-1] is the coefficient of Xi in the equation of Xj, nonzero
exactly when the DAG has the edge i -> j.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDataError, InvalidSpecError
from .graphs import Dag
from .linalg import spd_solve

ERROR_FAMILIES = ("gaussian", "uniform-centered", "rademacher-scaled")


@dataclass(frozen=True)
class LsemSpec:
    """Weighted DAG plus independent error variances, means, and error family."""

    dag: Dag
    weights: np.ndarray
    error_variances: np.ndarray
    error_family: str = "gaussian"
    means: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = self.dag.node_count
        w = np.asarray(self.weights, dtype=float)
        v = np.asarray(self.error_variances, dtype=float)
        mu = np.zeros(p) if self.means is None else np.asarray(self.means, dtype=float)
        if w.shape != (p, p):
            raise InvalidSpecError(f"weights must be {p}x{p}, got {w.shape}")
        if v.shape != (p,):
            raise InvalidSpecError(f"error_variances must have length {p}")
        if mu.shape != (p,):
            raise InvalidSpecError(f"means must have length {p}")
        if self.error_family not in ERROR_FAMILIES:
            raise InvalidSpecError(f"unknown error family {self.error_family!r}")
        if not np.all(v > 0):
            raise InvalidSpecError("error variances must be strictly positive")
        nz = {(i + 1, j + 1) for i, j in zip(*np.nonzero(w))}
        if nz != set(self.dag.edges):
            raise InvalidSpecError("sparsity pattern of weights does not match DAG edges")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "error_variances", v)
        object.__setattr__(self, "means", mu)
        self.weights.setflags(write=False)
        self.error_variances.setflags(write=False)
        self.means.setflags(write=False)

    @property
    def p(self) -> int:
        return self.dag.node_count

    def to_json(self) -> str:
        edges = [
            {"from": i, "to": j, "weight": float(self.weights[i - 1, j - 1])}
            for i, j in sorted(self.dag.edges)
        ]
        doc = {
            "p": self.p,
            "edges": edges,
            "error_variances": [float(x) for x in self.error_variances],
            "error_family": self.error_family,
            "means": [float(x) for x in self.means],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LsemSpec":
        doc = json.loads(text)
        p = int(doc["p"])
        weights = np.zeros((p, p))
        edges = set()
        for e in doc["edges"]:
            i, j = int(e["from"]), int(e["to"])
            weights[i - 1, j - 1] = float(e["weight"])
            edges.add((i, j))
        return cls(
            dag=Dag(p, frozenset(edges)),
            weights=weights,
            error_variances=np.asarray(doc["error_variances"], dtype=float),
            error_family=doc.get("error_family", "gaussian"),
            means=np.asarray(doc["means"], dtype=float) if "means" in doc else None,
        )


@dataclass(frozen=True)
class Dataset:
    """n x p observation matrix; column 1 is the treatment, column p the response."""

    matrix: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise InvalidDataError("matrix must be two-dimensional")
        n, p = m.shape
        if n < 2:
            raise InvalidDataError("need at least 2 rows")
        if p < 3:
            raise InvalidDataError("need at least 3 columns")
        if not np.all(np.isfinite(m)):
            raise InvalidDataError("matrix contains non-finite entries")
        labels = self.labels or tuple(f"X{j}" for j in range(1, p + 1))
        if len(labels) != p:
            raise InvalidDataError(f"expected {p} labels, got {len(labels)}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(labels))
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    def column(self, j: int) -> np.ndarray:
        """Column of variable Xj (1-indexed)."""
        return self.matrix[:, j - 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.labels)
        for row in self.matrix:
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        rows = [row for row in reader if row]
        if len(rows) < 2:
            raise InvalidDataError("CSV must have a header row and data rows")
        labels = tuple(h.strip() for h in rows[0])
        try:
            matrix = np.array([[float(x) for x in row] for row in rows[1:]])
        except ValueError as exc:
            raise InvalidDataError(f"non-numeric entry in CSV: {exc}") from exc
        return cls(matrix=matrix, labels=labels)


def covariance_of(spec: LsemSpec) -> np.ndarray:
    """Exact covariance of X implied by the generating equations."""
    p = spec.p
    imbt = np.eye(p) - spec.weights.T
    try:
        m = np.linalg.solve(imbt, np.eye(p))
    except np.linalg.LinAlgError as exc:  # unreachable for acyclic weights
        raise InvalidSpecError("I - B^T is singular") from exc
    sigma = m @ np.diag(spec.error_variances) @ m.T
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 * max(1.0, np.max(np.abs(sigma))):
        raise InvalidSpecError("covariance is not symmetric")
    sigma = (sigma + sigma.T) / 2.0
    if np.min(np.linalg.eigvalsh(sigma)) <= 0:
        raise InvalidSpecError("covariance is not positive definite")
    return sigma


def sample(spec: LsemSpec, n: int, rng: np.random.Generator) -> Dataset:
    """n i.i.d. draws generated in topological order; deterministic given rng state."""
    if n < 2:
        raise InvalidDataError("n must be at least 2")
    p = spec.p
    sd = np.sqrt(spec.error_variances)
    # Draw errors column-by-column in variable order so the result does not
    # depend on which topological order the DAG reports.
    eps = np.empty((n, p))
    for j in range(p):
        if spec.error_family == "gaussian":
            eps[:, j] = rng.standard_normal(n) * sd[j]
        elif spec.error_family == "uniform-centered":
            half = np.sqrt(3.0 * spec.error_variances[j])
            eps[:, j] = rng.uniform(-half, half, n)
        else:  # rademacher-scaled
            eps[:, j] = (2.0 * rng.integers(0, 2, n) - 1.0) * sd[j]
    centered = np.zeros((n, p))
    for node in spec.dag.topological_order():
        j = node - 1
        centered[:, j] = centered @ spec.weights[:, j] + eps[:, j]
    return Dataset(matrix=centered + spec.means[None, :])


def total_effect(
    spec: LsemSpec,
    source: int,
    target: int,
    held_fixed: frozenset[int] | set[int] = frozenset(),
    method: str = "linalg",
) -> float:
    """Total causal effect of X_source on X_target under an intervention that
    also holds X_j fixed for every j in held_fixed.

    Equals the sum over directed paths source -> target avoiding held_fixed of
    the products of edge weights. method="linalg" zeroes the columns of the
    intervened nodes and reads one entry of (I - B~^T)^{-1}; method="paths"
    sums paths by memoized depth-first traversal (the cross-check oracle).
    """
    held = frozenset(held_fixed)
    if source in held or target in held:
        raise InvalidSpecError("source/target may not be in held_fixed")
    p = spec.p
    if method == "linalg":
        b = spec.weights.copy()
        for node in held | {source}:
            b[:, node - 1] = 0.0
        rhs = np.zeros(p)
        rhs[source - 1] = 1.0
        x = np.linalg.solve(np.eye(p) - b.T, rhs)
        return float(x[target - 1])
    if method == "paths":
        memo: dict[int, float] = {}

        def downstream(u: int) -> float:
            if u == target:
                return 1.0
            if u in memo:
                return memo[u]
            total = 0.0
            for c in spec.dag.children(u):
                if c in held:
                    continue
                total += spec.weights[u - 1, c - 1] * downstream(c)
            memo[u] = total
            return total

        return downstream(source)
    raise ValueError(f"unknown method {method!r}")


def mediation_effect(spec: LsemSpec, j: int) -> float:
    """Portion of the treatment effect on the response that flows through Xj."""
    p = spec.p
    if not (2 <= j <= p - 1):
        raise InvalidSpecError(f"mediator index must be in 2..{p - 1}")
    return total_effect(spec, 1, j) * total_effect(spec, j, p)


def adjustment_effect(
    sigma: np.ndarray, i: int, k: int, adjust: frozenset[int] | set[int] = frozenset()
) -> float:
    """Population coefficient of X_i when regressing X_k on (X_i, X_adjust)."""
    adjust = frozenset(adjust)
    if i == k or i in adjust or k in adjust:
        raise InvalidSpecError("require i != k and i, k not in the adjustment set")
    order = [i - 1] + [a - 1 for a in sorted(adjust)]
    sub = sigma[np.ix_(order, order)]
    rhs = sigma[order, k - 1]
    coef = spd_solve(sub, rhs, context=f"adjustment regression on {sorted({i} | adjust)}")
    return float(coef[0])


def generate_random_lsem(
    p: int,
    expected_degree: float,
    p_treat: float = 0.2,
    p_resp: float = 0.1,
    rng: np.random.Generator | None = None,
    error_family: str = "gaussian",
    standardize: bool = True,
) -> LsemSpec:
    """Random LSEM following the simulation protocol.

    The mediator sub-DAG on X2..X_{p-1} is Erdos-Renyi with pair probability
    expected_degree/(p-3), giving (p-2)*expected_degree/2 edges and degree
    expected_degree on average. Edges X1 -> Xj are added with probability
    p_treat for each mediator, and Xj -> Xp with probability p_resp for
    j = 1 and each mediator. Weights are uniform on [-1,-0.5] u [0.5,1] and
    error variances uniform on [0.5,1]; with standardize=True the spec is then
    rescaled exactly so that every Var(Xi) = 1.
    """
    if rng is None:
        rng = np.random.default_rng()
    if p < 3:
        raise InvalidSpecError("p must be at least 3")
    if not expected_degree < p - 3:
        raise InvalidSpecError("expected_degree must be below p - 3")
    mediators = list(range(2, p))
    pairs = list(itertools.combinations(mediators, 2))
    prob = expected_degree / (p - 3)
    edges: set[tuple[int, int]] = set()
    draws = rng.random(len(pairs))
    for (i, j), u in zip(pairs, draws):
        if u < prob:
            edges.add((i, j))
    for j, u in zip(mediators, rng.random(len(mediators))):
        if u < p_treat:
            edges.add((1, j))
    for j, u in zip([1] + mediators, rng.random(len(mediators) + 1)):
        if u < p_resp:
            edges.add((j, p))
    dag = Dag(p, frozenset(edges))
    weights = np.zeros((p, p))
    for i, j in sorted(edges):
        mag = rng.uniform(0.5, 1.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        weights[i - 1, j - 1] = sign * mag
    variances = rng.uniform(0.5, 1.0, p)
    spec = LsemSpec(dag=dag, weights=weights, error_variances=variances,
                    error_family=error_family)
    return standardize_spec(spec) if standardize else spec


def standardize_spec(spec: LsemSpec) -> LsemSpec:
    """Rescale weights, error variances and means so every Var(Xi) equals 1.

    Replacing Xi by Xi/sd(Xi) maps B to S B S^{-1} and D to S^{-2} D with
    S = diag(sd); the DAG and sparsity pattern are unchanged.
    """
    sigma = covariance_of(spec)
    s = np.sqrt(np.diag(sigma))
    weights = spec.weights * s[:, None] / s[None, :]
    return LsemSpec(
        dag=spec.dag,
        weights=weights,
        error_variances=spec.error_variances / s**2,
        error_family=spec.error_family,
        means=spec.means / s,
    )
