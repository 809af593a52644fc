"""Monte-Carlo experiment driver: coverage, precision/recall, FDR and
concentration-rate studies at desk scale.

Every stochastic task derives its generator from the master seed and its own
coordinates (study id, sample-size index, DAG index, replication index), so
results do not depend on scheduling or the number of worker threads.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MidaError
from .estimator import (
    MidaResult,
    infer,
    plug_in_avar,
    population_mida_target,
    theta1j_test,
)
from .graphs import Cpdag, dag_to_cpdag, parent_set_multiset
from .lsem import LsemSpec, covariance_of, generate_random_lsem, mediation_effect, sample
from .structure import PcConfig, estimate_cpdag, residualize_on_treatment
from .subset_ols import fit_subset, uniform_diagnostics

log = logging.getLogger(__name__)

GRAPH_MODES = ("estimated", "true_cpdag", "true_dag", "empty")

# Stream tags keeping the RNG coordinates of different studies disjoint.
_DAG_STREAM = 1
_DATA_STREAM = 2
_RATE_STREAM = 3
_SUBSET_STREAM = 5


@dataclass(frozen=True)
class ExperimentConfig:
    p: int = 50
    d: float = 3.0
    r: int = 5
    n_list: tuple[int, ...] = (500, 2000)
    replications: int = 200
    alpha_pc: float = 0.01
    max_cond_size: int = 3
    pc_stable: bool = False
    level: float = 0.95
    seed: int = 0
    graph_mode: str = "true_cpdag"
    output_dir: str = "."
    error_family: str = "gaussian"
    p_treat: float = 0.2
    p_resp: float = 0.1
    threads: int = 1
    max_component_size: int = 12

    def __post_init__(self) -> None:
        if self.p < 5:
            raise ConfigError("p must be at least 5")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")
        if self.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"graph_mode must be one of {GRAPH_MODES}")
        if self.r < 1:
            raise ConfigError("r must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    def with_overrides(self, overrides: dict[str, object]) -> "ExperimentConfig":
        doc = dataclasses.asdict(self)
        names = {f.name: f for f in dataclasses.fields(self)}
        for key, value in overrides.items():
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            doc[key] = value
        return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True)
class CoverageRow:
    p: int
    n: int
    group: str
    median_coverage: float
    mean_coverage: float
    coverage_sd: float
    avg_length: float
    count: int
    excluded: int


@dataclass(frozen=True)
class CoverageReport:
    rows: tuple[CoverageRow, ...]
    rows_true_eta: tuple[CoverageRow, ...]


@dataclass(frozen=True)
class RateCheckResult:
    rows: tuple[tuple[int, int, int, str, float], ...]
    slopes: dict[str, float]


@dataclass
class _DagBundle:
    """Per-DAG precomputation shared across replications."""

    index: int
    spec: LsemSpec
    sigma: np.ndarray
    true_cpdag: Cpdag
    mode_graph: Cpdag | None
    parent_sets: dict[int, list[tuple[frozenset[int], int]]]
    eta_true: dict[int, float]
    eta_cpdag: dict[int, float]
    group_value: dict[int, float]


def _fmt(x: object) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path: str, header: str, rows: list[list[object]]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _mediator_graph(config: ExperimentConfig, spec: LsemSpec) -> tuple[Cpdag, Cpdag | None]:
    sub = spec.dag.induced_subgraph(list(range(2, spec.p)))
    true_cpdag = dag_to_cpdag(sub)
    if config.graph_mode == "true_cpdag":
        return true_cpdag, true_cpdag
    if config.graph_mode == "true_dag":
        return true_cpdag, Cpdag(sub.node_count, sub.edges, frozenset())
    if config.graph_mode == "empty":
        return true_cpdag, Cpdag(sub.node_count, frozenset(), frozenset())
    return true_cpdag, None  # estimated per replication


def _variable_parent_sets(
    cpdag: Cpdag, j: int, max_component_size: int
) -> list[tuple[frozenset[int], int]]:
    psm = parent_set_multiset(cpdag, j - 1, max_component_size)
    return [(frozenset(m + 1 for m in pa), mult) for pa, mult in psm.entries]


def _make_bundle(config: ExperimentConfig, t: int) -> _DagBundle:
    rng = np.random.default_rng((config.seed, _DAG_STREAM, t))
    spec = generate_random_lsem(
        config.p, config.d, config.p_treat, config.p_resp, rng,
        error_family=config.error_family,
    )
    sigma = covariance_of(spec)
    true_cpdag, mode_graph = _mediator_graph(config, spec)
    parent_sets: dict[int, list[tuple[frozenset[int], int]]] = {}
    eta_true: dict[int, float] = {}
    eta_cpdag: dict[int, float] = {}
    group_value: dict[int, float] = {}
    for j in range(2, config.p):
        if mode_graph is not None:
            parent_sets[j] = _variable_parent_sets(mode_graph, j, config.max_component_size)
        theta_pop, aver_pop, eta_pop = population_mida_target(
            sigma, true_cpdag, j, config.max_component_size
        )
        eta_true[j] = mediation_effect(spec, j)
        eta_cpdag[j] = eta_pop
        group_value[j] = max(abs(theta_pop), abs(aver_pop))
    return _DagBundle(
        index=t, spec=spec, sigma=sigma, true_cpdag=true_cpdag,
        mode_graph=mode_graph, parent_sets=parent_sets,
        eta_true=eta_true, eta_cpdag=eta_cpdag, group_value=group_value,
    )


def _estimate_all_mediators(
    config: ExperimentConfig, bundle: _DagBundle, data
) -> dict[int, MidaResult]:
    """One replication: MIDA for every mediator, against the mode's graph."""
    if bundle.mode_graph is None:
        residuals = residualize_on_treatment(data)
        pc = PcConfig(
            alpha=config.alpha_pc,
            max_cond_size=config.max_cond_size,
            stable_variant=config.pc_stable,
        )
        graph = estimate_cpdag(residuals, pc)
        parent_sets = {
            j: _variable_parent_sets(graph, j, config.max_component_size)
            for j in range(2, config.p)
        }
    else:
        parent_sets = bundle.parent_sets
    out: dict[int, MidaResult] = {}
    for j in range(2, config.p):
        theta1j = theta1j_test(data, j)[0]
        sets = parent_sets[j]
        total = sum(m for _, m in sets)
        weighted = 0.0
        entries = []
        for pa, mult in sets:
            subset = (j, 1, *sorted(pa - {1, j}))
            beta = float(fit_subset(data, response=config.p, subset=subset).beta_hat[0])
            entries.append((pa, mult, beta))
            weighted += mult * beta
        aver = weighted / total
        eta = theta1j * aver
        avar = plug_in_avar(data, j, theta1j, aver, sets)
        inf = infer(eta, avar, data.n, config.level)
        out[j] = MidaResult(
            j=j, theta1j_hat=theta1j,
            theta_multiset=tuple(sorted(entries, key=lambda e: tuple(sorted(e[0])))),
            aver_theta=aver, eta_hat=eta, avar_hat=avar,
            t_stat=inf.t_stat, p_value=inf.p_value,
            ci_low=inf.ci_low, ci_high=inf.ci_high,
            level=config.level, n=data.n,
        )
    return out


def _run_tasks(tasks, worker, threads: int):
    """Run worker over tasks, returning results in task order."""
    if threads <= 1:
        return [worker(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def _assign_groups(bundles: list[_DagBundle]) -> dict[tuple[int, int], str]:
    """Split all (dag, mediator) cells into three near-equal groups by the
    magnitude of the larger estimator component."""
    cells = [
        (t, j, bundle.group_value[j])
        for t, bundle in enumerate(bundles)
        for j in sorted(bundle.group_value)
    ]
    order = sorted(range(len(cells)), key=lambda idx: (cells[idx][2], idx))
    m = len(cells)
    base, extra = divmod(m, 3)
    sizes = [base + (1 if g < extra else 0) for g in range(3)]
    labels = ["low"] * sizes[0] + ["medium"] * sizes[1] + ["high"] * sizes[2]
    out: dict[tuple[int, int], str] = {}
    for rank, idx in enumerate(order):
        t, j, _ = cells[idx]
        out[(t, j)] = labels[rank]
    return out


def run_coverage(config: ExperimentConfig) -> CoverageReport:
    """Confidence-interval coverage study; writes coverage.csv (coverage of the
    identifiable target) and coverage_true_eta.csv (coverage of the raw
    mediation effect) under config.output_dir."""
    bundles = [_make_bundle(config, t) for t in range(config.r)]
    groups = _assign_groups(bundles)
    mediators = list(range(2, config.p))
    rows: list[CoverageRow] = []
    rows_true: list[CoverageRow] = []

    for ni, n in enumerate(config.n_list):
        hits_cpdag: dict[tuple[int, int], list[bool]] = {}
        hits_true: dict[tuple[int, int], list[bool]] = {}
        lengths: dict[tuple[int, int], list[float]] = {}
        excluded_by_group = {"low": 0, "medium": 0, "high": 0}

        def task(coords):
            t, k = coords
            bundle = bundles[t]
            rng = np.random.default_rng((config.seed, _DATA_STREAM, ni, t, k))
            data = sample(bundle.spec, n, rng)
            try:
                return t, _estimate_all_mediators(config, bundle, data)
            except MidaError as exc:
                log.warning("replication (t=%d, k=%d, n=%d) failed: %s", t, k, n, exc)
                return t, None

        tasks = [(t, k) for t in range(config.r) for k in range(config.replications)]
        for t, results in _run_tasks(tasks, task, config.threads):
            bundle = bundles[t]
            if results is None:
                for j in mediators:
                    excluded_by_group[groups[(t, j)]] += 1
                continue
            for j, res in results.items():
                key = (t, j)
                hits_cpdag.setdefault(key, []).append(
                    res.ci_low <= bundle.eta_cpdag[j] <= res.ci_high
                )
                hits_true.setdefault(key, []).append(
                    res.ci_low <= bundle.eta_true[j] <= res.ci_high
                )
                lengths.setdefault(key, []).append(res.ci_high - res.ci_low)

        for target_hits, sink in ((hits_cpdag, rows), (hits_true, rows_true)):
            per_group: dict[str, list[tuple[float, float]]] = {
                "low": [], "medium": [], "high": []
            }
            for key, hits in sorted(target_hits.items()):
                cov = 100.0 * float(np.mean(hits))
                avg_len = float(np.mean(lengths[key]))
                per_group[groups[key]].append((cov, avg_len))
            for group in ("low", "medium", "high"):
                vals = per_group[group]
                covs = np.array([c for c, _ in vals])
                lens = np.array([l for _, l in vals])
                sink.append(CoverageRow(
                    p=config.p, n=n, group=group,
                    median_coverage=float(np.median(covs)) if covs.size else math.nan,
                    mean_coverage=float(np.mean(covs)) if covs.size else math.nan,
                    coverage_sd=float(np.std(covs, ddof=1)) if covs.size > 1 else 0.0,
                    avg_length=float(np.mean(lens)) if lens.size else math.nan,
                    count=len(vals),
                    excluded=excluded_by_group[group],
                ))

    header = "p,n,group,median_coverage,mean_coverage,coverage_sd,avg_length,count,excluded"
    out = os.path.join(config.output_dir, "coverage.csv")
    _write_csv(out, header, [[r.p, r.n, r.group, r.median_coverage, r.mean_coverage,
                              r.coverage_sd, r.avg_length, r.count, r.excluded]
                             for r in rows])
    out_true = os.path.join(config.output_dir, "coverage_true_eta.csv")
    _write_csv(out_true, header, [[r.p, r.n, r.group, r.median_coverage, r.mean_coverage,
                                   r.coverage_sd, r.avg_length, r.count, r.excluded]
                                  for r in rows_true])
    return CoverageReport(rows=tuple(rows), rows_true_eta=tuple(rows_true))


def precision_recall_at_k(ranked: list[int], truth: set[int]) -> list[tuple[int, float, float]]:
    """Precision and recall of the top-k prefixes of a ranked cell list."""
    out = []
    hits = 0
    for k, cell in enumerate(ranked, start=1):
        if cell in truth:
            hits += 1
        recall = hits / len(truth) if truth else 0.0
        out.append((k, hits / k, recall))
    return out


def fscore(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _rank_cells(values: np.ndarray, descending: bool) -> list[int]:
    key = -values if descending else values
    return list(np.lexsort((np.arange(values.size), key)))


def run_pr_fscore(
    config: ExperimentConfig,
    rankings: tuple[str, ...] = ("estimate", "pvalue"),
    thresholds: tuple[float, ...] = (0.001, 0.01, 0.05, 0.1),
) -> None:
    """Precision-recall curves for the requested rankings and p-value
    thresholding statistics; writes pr.csv and fscore.csv."""
    for ranking in rankings:
        if ranking not in ("estimate", "pvalue"):
            raise ConfigError(f"unknown ranking {ranking!r}")
    bundles = [_make_bundle(config, t) for t in range(config.r)]
    mediators = list(range(2, config.p))
    cells = [(t, j) for t in range(config.r) for j in mediators]
    truth = {idx for idx, (t, j) in enumerate(cells)
             if abs(bundles[t].eta_true[j]) > 1e-12}
    pr_rows: list[list[object]] = []
    fs_rows: list[list[object]] = []

    for ni, n in enumerate(config.n_list):
        setting = f"p{config.p}_d{_fmt(config.d)}_n{n}"

        cell_index = {cell: idx for idx, cell in enumerate(cells)}

        def task(k):
            est = np.empty(len(cells))
            pval = np.empty(len(cells))
            for t in range(config.r):
                rng = np.random.default_rng((config.seed, _DATA_STREAM, ni, t, k))
                data = sample(bundles[t].spec, n, rng)
                results = _estimate_all_mediators(config, bundles[t], data)
                for j, res in results.items():
                    est[cell_index[(t, j)]] = abs(res.eta_hat)
                    pval[cell_index[(t, j)]] = res.p_value
            return est, pval

        per_rep = _run_tasks(list(range(config.replications)), task, config.threads)

        m = len(cells)
        curves = {"estimate": np.zeros((m, 2)), "pvalue": np.zeros((m, 2))}
        fs_acc = {thr: np.zeros(5) for thr in thresholds}
        opt_acc = 0.0
        for est, pval in per_rep:
            rank_est = _rank_cells(est, descending=True)
            rank_p = _rank_cells(pval, descending=False)
            for method, ranked in (("estimate", rank_est), ("pvalue", rank_p)):
                for k, prec, rec in precision_recall_at_k(ranked, truth):
                    curves[method][k - 1, 0] += prec
                    curves[method][k - 1, 1] += rec
            opt_acc += max(
                fscore(prec, rec) for _, prec, rec in precision_recall_at_k(rank_p, truth)
            )
            for thr in thresholds:
                selected = {int(i) for i in np.nonzero(pval <= thr)[0]}
                tp = len(selected & truth)
                prec = tp / len(selected) if selected else 0.0
                rec = tp / len(truth) if truth else 0.0
                fs_acc[thr] += np.array([len(truth), len(selected), rec, prec,
                                         fscore(prec, rec)])

        reps = float(config.replications)
        for method in rankings:
            for k in range(m):
                pr_rows.append([setting, k + 1, method,
                                curves[method][k, 0] / reps,
                                curves[method][k, 1] / reps])
        for thr in thresholds:
            tgt, est_size, rec, prec, f1 = fs_acc[thr] / reps
            fs_rows.append([config.p, n, thr, tgt, est_size, rec, prec, f1,
                            opt_acc / reps])

    _write_csv(os.path.join(config.output_dir, "pr.csv"),
               "setting,k,method,precision,recall", pr_rows)
    _write_csv(os.path.join(config.output_dir, "fscore.csv"),
               "p,n,threshold,target_size,est_size,recall,precision,fscore,optimal_fscore",
               fs_rows)


def bh_select(pvalues, alpha: float) -> list[int]:
    """Benjamini-Hochberg step-up selection; returns selected indices."""
    pv = np.asarray(pvalues, dtype=float)
    if pv.size == 0:
        return []
    if np.any((pv < 0) | (pv > 1)):
        raise ConfigError("p-values must lie in [0, 1]")
    m = pv.size
    order = np.argsort(pv, kind="stable")
    ranked = pv[order]
    below = np.nonzero(ranked <= (np.arange(1, m + 1) * alpha / m))[0]
    if below.size == 0:
        return []
    k = int(below[-1]) + 1
    return sorted(int(i) for i in order[:k])


def run_fdr(
    config: ExperimentConfig,
    bh_alpha: float = 0.05,
    screen_level: float = 0.01,
) -> None:
    """Empirical FDR and power of BH selection with and without screening on
    the treatment-to-mediator effect; writes fdr.csv."""
    bundles = [_make_bundle(config, t) for t in range(config.r)]
    mediators = list(range(2, config.p))
    cells = [(t, j) for t in range(config.r) for j in mediators]
    truth_eta = {idx for idx, (t, j) in enumerate(cells)
                 if abs(bundles[t].eta_true[j]) > 1e-12}
    truth_cpdag = {idx for idx, (t, j) in enumerate(cells)
                   if abs(bundles[t].eta_cpdag[j]) > 1e-12}
    rows: list[list[object]] = []

    for ni, n in enumerate(config.n_list):

        cell_index = {cell: idx for idx, cell in enumerate(cells)}

        def task(k):
            pval = np.empty(len(cells))
            screen_p = np.empty(len(cells))
            for t in range(config.r):
                rng = np.random.default_rng((config.seed, _DATA_STREAM, ni, t, k))
                data = sample(bundles[t].spec, n, rng)
                results = _estimate_all_mediators(config, bundles[t], data)
                for j, res in results.items():
                    pval[cell_index[(t, j)]] = res.p_value
                    screen_p[cell_index[(t, j)]] = theta1j_test(data, j)[2]
            return pval, screen_p

        per_rep = _run_tasks(list(range(config.replications)), task, config.threads)
        stats = {("bh", "eta"): [], ("bh", "eta_cpdag"): [],
                 ("screened_bh", "eta"): [], ("screened_bh", "eta_cpdag"): []}
        for pval, screen_p in per_rep:
            plain = set(bh_select(pval, bh_alpha))
            survivors = [i for i in range(len(cells)) if screen_p[i] <= screen_level]
            selected_within = bh_select(pval[survivors], bh_alpha) if survivors else []
            screened = {survivors[i] for i in selected_within}
            for name, selected in (("bh", plain), ("screened_bh", screened)):
                for target_name, truth in (("eta", truth_eta), ("eta_cpdag", truth_cpdag)):
                    fp = len(selected - truth)
                    fdp = fp / len(selected) if selected else 0.0
                    power = len(selected & truth) / len(truth) if truth else 0.0
                    stats[(name, target_name)].append((fdp, power))
        for (name, target_name), vals in stats.items():
            arr = np.array(vals)
            rows.append([config.p, n, bh_alpha, name, target_name,
                         float(arr[:, 0].mean()), float(arr[:, 1].mean())])

    _write_csv(os.path.join(config.output_dir, "fdr.csv"),
               "p,n,alpha,pipeline,target,empirical_fdr,power", rows)


def run_rate_check(
    config: ExperimentConfig,
    subsets_per_n: int = 12,
    max_subset_size: int = 4,
) -> RateCheckResult:
    """Median sup diagnostics over a fixed subset collection as n grows,
    with log-log slopes for the first-order and remainder terms; writes
    rates.csv."""
    rng = np.random.default_rng((config.seed, _SUBSET_STREAM))
    spec = generate_random_lsem(config.p, config.d, config.p_treat, config.p_resp,
                                rng, error_family=config.error_family)
    sigma = covariance_of(spec)
    response = config.p
    covariates = list(range(1, config.p))
    subsets: list[tuple[int, ...]] = []
    seen = set()
    while len(subsets) < subsets_per_n:
        size = int(rng.integers(1, max_subset_size + 1))
        sub = tuple(sorted(rng.choice(covariates, size=size, replace=False).tolist()))
        if sub not in seen:
            seen.add(sub)
            subsets.append(sub)
    q_n = max(len(s) for s in subsets)

    stat_names = ("sup_beta_err", "sup_psi_mean", "sup_remainder",
                  "sup_sigma_dev", "sup_sigma_inv_dev")
    rows: list[tuple[int, int, int, str, float]] = []
    medians: dict[str, list[float]] = {name: [] for name in stat_names}
    for ni, n in enumerate(config.n_list):

        def task(k):
            data = sample(spec, n, np.random.default_rng((config.seed, _RATE_STREAM, ni, k)))
            diag = uniform_diagnostics(data, response, subsets, sigma, spec.means)
            return [getattr(diag, name) for name in stat_names]

        vals = np.array(_run_tasks(list(range(config.replications)), task, config.threads))
        for col, name in enumerate(stat_names):
            med = float(np.median(vals[:, col]))
            medians[name].append(med)
            rows.append((n, q_n, len(subsets), name, med))

    slopes: dict[str, float] = {}
    logn = np.log(np.asarray(config.n_list, dtype=float))
    for name in ("sup_psi_mean", "sup_remainder"):
        slopes[name] = float(np.polyfit(logn, np.log(medians[name]), 1)[0])
    _write_csv(os.path.join(config.output_dir, "rates.csv"),
               "n,q_n,L_n,stat,median_value",
               [list(row) for row in rows])
    return RateCheckResult(rows=tuple(rows), slopes=slopes)
