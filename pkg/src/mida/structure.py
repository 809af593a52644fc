"""Treatment residualization and constraint-based CPDAG estimation.

The mediator CPDAG is learned on residuals of each mediator regressed on the
treatment, which removes the treatment's effect while preserving the mediator
sub-model. Structure learning is a PC-style skeleton search with Fisher-z
partial-correlation tests, v-structure orientation from separating sets, and
Meek-rule closure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidDataError, NumericalError
from .graphs import Cpdag, meek_closure
from .lsem import Dataset


@dataclass(frozen=True)
class PcConfig:
    alpha: float = 0.01
    max_cond_size: int = 3
    stable_variant: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if self.max_cond_size < 0:
            raise ValueError("max_cond_size must be nonnegative")


@dataclass
class PcDiagnostics:
    ci_test_count: int = 0
    orientation_conflicts: int = 0
    cycle_guard_skips: int = 0


@dataclass(frozen=True)
class FisherZResult:
    z: float
    p_value: float
    saturated: bool


def residualize_on_treatment(data: Dataset) -> Dataset:
    """Replace each mediator column by its residual from a simple regression
    (with intercept) on the treatment column; returns the mediator columns only.

    Needs at least three potential mediators so the output is a valid Dataset.
    """
    if data.n < 3:
        raise InvalidDataError("need at least 3 rows to residualize")
    if data.p < 5:
        raise InvalidDataError("need at least three potential mediators")
    x1 = data.column(1)
    x1c = x1 - x1.mean()
    var1 = float(x1c @ x1c) / data.n
    if var1 <= 0.0:
        raise InvalidDataError("treatment column has zero sample variance")
    med = data.matrix[:, 1 : data.p - 1]
    medc = med - med.mean(axis=0)
    slopes = (x1c @ medc) / (var1 * data.n)
    resid = medc - np.outer(x1c, slopes)
    return Dataset(matrix=resid, labels=data.labels[1 : data.p - 1])


def fisher_z(r: float, n: int, cond_size: int) -> FisherZResult:
    """Fisher-z test of a (partial) correlation against zero."""
    dof = n - cond_size - 3
    if dof < 1:
        raise InvalidDataError("need n - cond_size - 3 >= 1 for the Fisher-z test")
    if abs(r) >= 1.0:
        return FisherZResult(z=math.inf if r > 0 else -math.inf, p_value=0.0, saturated=True)
    z = math.sqrt(dof) * math.atanh(r)
    return FisherZResult(z=z, p_value=float(2.0 * norm.sf(abs(z))), saturated=False)


def fisher_z_pvalue(r: float, n: int, cond_size: int) -> float:
    return fisher_z(r, n, cond_size).p_value


def partial_correlation(sigma: np.ndarray, i: int, j: int, cond: tuple[int, ...]) -> float:
    """Partial correlation of variables i and j given cond (0-based indices).

    Accepts a correlation or covariance matrix. Uses the recursive formula for
    conditioning sets of size <= 1 and the precision-matrix formula otherwise.
    """

    def rho(a: int, b: int) -> float:
        return float(sigma[a, b] / math.sqrt(sigma[a, a] * sigma[b, b]))

    if not cond:
        return rho(i, j)
    if len(cond) == 1:
        k = cond[0]
        r_ij, r_ik, r_jk = rho(i, j), rho(i, k), rho(j, k)
        den = (1.0 - r_ik**2) * (1.0 - r_jk**2)
        if den <= 0.0:
            return math.copysign(1.0, r_ij - r_ik * r_jk)
        return float((r_ij - r_ik * r_jk) / math.sqrt(den))
    idx = [i, j, *cond]
    sub = sigma[np.ix_(idx, idx)]
    try:
        prec = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular correlation submatrix") from exc
    den = prec[0, 0] * prec[1, 1]
    if den <= 0.0:
        raise NumericalError("invalid precision matrix in partial correlation")
    return float(-prec[0, 1] / math.sqrt(den))


def _abs_z_from_rho(rho: np.ndarray, n: int, cond_size: int) -> np.ndarray:
    """|z| statistics of the Fisher-z test; +inf where the correlation saturates.

    Skeleton decisions compare |z| against the critical value rather than
    p-values against alpha, which keeps the rule exact for alphas far below
    the smallest positive float.
    """
    rho = np.clip(rho, -1.0, 1.0)
    dof = n - cond_size - 3
    saturated = np.abs(rho) >= 1.0
    z = np.zeros_like(rho)
    np.arctanh(rho, out=z, where=~saturated)
    absz = np.sqrt(dof) * np.abs(z)
    absz[saturated] = np.inf
    return absz


def _level_candidates(
    pool_i: list[int], pool_j: list[int], level: int
) -> list[tuple[int, ...]]:
    """Conditioning sets of the given size from both adjacency pools, deduplicated
    preserving first occurrence (i-side subsets first)."""
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    for pool in (pool_i, pool_j):
        if len(pool) < level:
            continue
        for sub in itertools.combinations(pool, level):
            if sub not in seen:
                seen.add(sub)
                out.append(sub)
    return out


def _batched_pcor(corr: np.ndarray, i: int, j: int, subs: list[tuple[int, ...]]) -> np.ndarray:
    """Partial correlations of (i, j) given each conditioning set (all same size)."""
    level = len(subs[0])
    if level == 1:
        k = np.fromiter((s[0] for s in subs), dtype=int)
        den = (1.0 - corr[i, k] ** 2) * (1.0 - corr[j, k] ** 2)
        num = corr[i, j] - corr[i, k] * corr[j, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = np.where(den > 0.0, num / np.sqrt(np.maximum(den, 1e-300)),
                           np.sign(num))
        return rho
    idx = np.array([[i, j, *s] for s in subs])
    mats = corr[idx[:, :, None], idx[:, None, :]]
    try:
        prec = np.linalg.inv(mats)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular correlation submatrix") from exc
    den = prec[:, 0, 0] * prec[:, 1, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(den > 0.0, -prec[:, 0, 1] / np.sqrt(np.maximum(den, 1e-300)), 1.0)
    return rho


def _skeleton(
    corr: np.ndarray, n: int, config: PcConfig, diag: PcDiagnostics
) -> tuple[list[set[int]], dict[frozenset[int], frozenset[int]]]:
    m = corr.shape[0]
    adj: list[set[int]] = [set(range(m)) - {v} for v in range(m)]
    sepsets: dict[frozenset[int], frozenset[int]] = {}
    zcrit = float(norm.isf(config.alpha / 2.0))

    # Level 0 in one shot from the marginal correlations.
    z0 = _abs_z_from_rho(corr.copy(), n, 0)
    for i in range(m):
        for j in range(i + 1, m):
            diag.ci_test_count += 1
            if z0[i, j] < zcrit:
                adj[i].discard(j)
                adj[j].discard(i)
                sepsets[frozenset((i, j))] = frozenset()

    for level in range(1, config.max_cond_size + 1):
        snapshot = [sorted(a) for a in adj]
        if all(len(a) - 1 < level for a in snapshot):
            break
        removals: list[tuple[int, int, frozenset[int]]] = []
        pairs = [(i, j) for i in range(m) for j in sorted(adj[i]) if i < j]
        for i, j in pairs:
            if config.stable_variant:
                pool_i = [v for v in snapshot[i] if v != j]
                pool_j = [v for v in snapshot[j] if v != i]
            else:
                if j not in adj[i]:
                    continue
                pool_i = [v for v in sorted(adj[i]) if v != j]
                pool_j = [v for v in sorted(adj[j]) if v != i]
            subs = _level_candidates(pool_i, pool_j, level)
            if not subs:
                continue
            rho = _batched_pcor(corr, i, j, subs)
            absz = _abs_z_from_rho(rho, n, level)
            diag.ci_test_count += len(subs)
            qualifying = np.nonzero(absz < zcrit)[0]
            if qualifying.size == 0:
                continue
            if config.stable_variant:
                # Canonical choice: the separating set with the largest p-value
                # (smallest |z|), which does not depend on enumeration order.
                pick = int(qualifying[np.argmin(absz[qualifying])])
                removals.append((i, j, frozenset(subs[pick])))
            else:
                pick = int(qualifying[0])
                adj[i].discard(j)
                adj[j].discard(i)
                sepsets[frozenset((i, j))] = frozenset(subs[pick])
        for i, j, sep in removals:
            adj[i].discard(j)
            adj[j].discard(i)
            sepsets[frozenset((i, j))] = sep
    return adj, sepsets


def _orient_v_structures(
    adj: list[set[int]],
    sepsets: dict[frozenset[int], frozenset[int]],
    stable: bool,
    diag: PcDiagnostics,
) -> set[tuple[int, int]]:
    m = len(adj)
    requested: dict[tuple[int, int], bool] = {}
    for k in range(m):
        nb = sorted(adj[k])
        for i, j in itertools.combinations(nb, 2):
            if j in adj[i]:
                continue
            sep = sepsets.get(frozenset((i, j)))
            if sep is None or k in sep:
                continue
            for a in (i, j):
                if requested.get((k, a)):
                    diag.orientation_conflicts += 1
                    if stable:
                        # Cancelled for good: the outcome is a set property of
                        # the requests, so relabeling columns cannot change it.
                        requested[(k, a)] = False
                        requested[(a, k)] = False
                    else:
                        requested[(k, a)] = False
                        requested[(a, k)] = True  # last writer wins
                elif requested.get((a, k)) is None:
                    requested[(a, k)] = True
    return {edge for edge, keep in requested.items() if keep}


def estimate_cpdag_with_diagnostics(
    data: Dataset, config: PcConfig
) -> tuple[Cpdag, PcDiagnostics]:
    """PC-style CPDAG estimate of the (mediator) dataset, with test counters."""
    if data.n <= config.max_cond_size + 3:
        raise InvalidDataError("need n > max_cond_size + 3")
    sds = data.matrix.std(axis=0)
    if np.any(sds <= 0.0):
        raise InvalidDataError("constant column in data")
    corr = np.corrcoef(data.matrix.T)
    diag = PcDiagnostics()
    adj, sepsets = _skeleton(corr, data.n, config, diag)
    oriented = _orient_v_structures(adj, sepsets, config.stable_variant, diag)

    m = data.p
    directed: set[tuple[int, int]] = set()
    blocked: set[frozenset[int]] = set()
    # Apply orientations in canonical order, skipping any that would close a
    # directed cycle among those already applied.
    children: dict[int, set[int]] = {v: set() for v in range(m)}

    def reaches(src: int, dst: int) -> bool:
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            for v in children[u]:
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    for a, b in sorted(oriented):
        if frozenset((a, b)) in blocked:
            continue
        if reaches(b, a):
            diag.cycle_guard_skips += 1
            blocked.add(frozenset((a, b)))
            continue
        directed.add((a, b))
        children[a].add(b)

    undirected = {
        frozenset((i, j))
        for i in range(m)
        for j in adj[i]
        if i < j and (i, j) not in directed and (j, i) not in directed
    }
    dir_edges = {(a + 1, b + 1) for a, b in directed}
    undir_edges = {frozenset((a + 1, b + 1)) for a, b in (tuple(e) for e in undirected)}
    closed_dir, closed_undir = meek_closure(m, dir_edges, undir_edges, guard_cycles=True)
    return Cpdag(m, closed_dir, closed_undir), diag


def estimate_cpdag(data: Dataset, config: PcConfig) -> Cpdag:
    return estimate_cpdag_with_diagnostics(data, config)[0]
