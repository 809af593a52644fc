"""Mediation-effect estimation over the equivalence class of a mediator CPDAG.

For mediator Xj the estimator multiplies the simple regression coefficient of
Xj on X1 by the multiplicity-weighted average of adjusted coefficients
beta_{jp | Pa(Xj) u {X1}}, with Pa(Xj) ranging over the parent sets of Xj in
the DAGs of the equivalence class. X1 is always part of the adjustment set:
no mediator is a direct cause of the treatment, so conditioning on X1 never
biases the coefficient and removes confounding through the treatment.

Node conventions: the mediator CPDAG has node m for variable X_{m+1}; all
public indices here are variable indices (mediators are 2..p-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DegenerateVarianceError, InvalidDataError
from .graphs import Cpdag, ParentSetMultiset, parent_set_multiset
from .linalg import spd_solve
from .lsem import Dataset
from .subset_ols import fit_subset


@dataclass(frozen=True)
class MidaResult:
    j: int
    theta1j_hat: float
    theta_multiset: tuple[tuple[frozenset[int], int, float], ...]
    aver_theta: float
    eta_hat: float
    avar_hat: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    level: float
    n: int

    @property
    def mec_size(self) -> int:
        return sum(m for _, m, _ in self.theta_multiset)

    @property
    def n_parent_sets(self) -> int:
        return len(self.theta_multiset)

    @property
    def se(self) -> float:
        return math.sqrt(self.avar_hat / self.n)

    CSV_HEADER = (
        "j,theta1j_hat,aver_theta,eta_hat,se,t_stat,p_value,"
        "ci_low,ci_high,n_parent_sets,mec_size"
    )

    def csv_row(self) -> str:
        cells = [
            str(self.j),
            *(f"{v:.10g}" for v in (
                self.theta1j_hat, self.aver_theta, self.eta_hat, self.se,
                self.t_stat, self.p_value, self.ci_low, self.ci_high,
            )),
            str(self.n_parent_sets),
            str(self.mec_size),
        ]
        return ",".join(cells)


@dataclass(frozen=True)
class Inference:
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class InfluenceSample:
    """Per-observation influence values for the two estimator components."""

    z_jp: np.ndarray
    z_1j: np.ndarray


def _mediator_parent_sets(
    cpdag_mediators: Cpdag, j: int, max_component_size: int
) -> list[tuple[frozenset[int], int]]:
    """Parent sets of mediator Xj as variable indices, with multiplicities."""
    psm: ParentSetMultiset = parent_set_multiset(
        cpdag_mediators, j - 1, max_component_size
    )
    return [(frozenset(m + 1 for m in pa), mult) for pa, mult in psm.entries]


def infer(eta_hat: float, avar_hat: float, n: int, level: float) -> Inference:
    """Wald test of a zero effect and a two-sided confidence interval."""
    if not (0.0 < level < 1.0):
        raise InvalidDataError("level must be in (0, 1)")
    if avar_hat <= 0.0:
        raise DegenerateVarianceError("plug-in asymptotic variance is not positive")
    se = math.sqrt(avar_hat / n)
    t = eta_hat / se
    p = float(2.0 * norm.sf(abs(t)))
    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    return Inference(t_stat=t, p_value=p, ci_low=eta_hat - z * se, ci_high=eta_hat + z * se)


def plug_in_avar(
    data: Dataset,
    j: int,
    theta1j_hat: float,
    aver_theta: float,
    parent_sets: list[tuple[frozenset[int], int]],
) -> float:
    """Plug-in estimate of the asymptotic variance of sqrt(n) * eta_hat.

    Mean square of per-observation values combining the influence of the
    simple regression (scaled by aver_theta) and of the averaged adjusted
    coefficients (scaled by theta1j_hat), everything centered by sample means
    and built from sample covariances.
    """
    n, p = data.n, data.p
    xc = data.matrix - data.matrix.mean(axis=0)
    sigma_hat = xc.T @ xc / n
    var1 = sigma_hat[0, 0]
    r_j_on_1 = xc[:, j - 1] - (sigma_hat[j - 1, 0] / var1) * xc[:, 0]
    values = aver_theta * xc[:, 0] * r_j_on_1 / var1

    mec_size = sum(m for _, m in parent_sets)
    second = np.zeros(n)
    for pa, mult in parent_sets:
        subset = (j, 1, *sorted(pa - {1, j}))
        idx = [v - 1 for v in subset]
        sub = sigma_hat[np.ix_(idx, idx)]
        xs = xc[:, idx]
        alpha = spd_solve(sub, np.eye(len(idx))[:, 0], context=f"avar subset {subset}")
        resid_coef = spd_solve(sub, sigma_hat[idx, p - 1], context=f"avar subset {subset}")
        r_p_on_s = xc[:, p - 1] - xs @ resid_coef
        second += mult * (xs @ alpha) * r_p_on_s
    values = values + (theta1j_hat / mec_size) * second
    return float(np.mean(values**2))


def mida_estimate(
    data: Dataset,
    cpdag_mediators: Cpdag,
    j: int,
    level: float = 0.95,
    max_component_size: int = 12,
) -> MidaResult:
    """Estimate the mediation effect of Xj with Wald inference.

    The mediator CPDAG determines the multiset of adjustment sets; all
    regressions run on the original data (centering happens inside the fits).
    """
    p = data.p
    if not (2 <= j <= p - 1):
        raise InvalidDataError(f"mediator index must be in 2..{p - 1}")
    if cpdag_mediators.node_count != p - 2:
        raise InvalidDataError(
            f"mediator CPDAG has {cpdag_mediators.node_count} nodes, expected {p - 2}"
        )
    theta1j = float(fit_subset(data, response=j, subset=(1,)).beta_hat[0])
    parent_sets = _mediator_parent_sets(cpdag_mediators, j, max_component_size)
    entries = []
    total_mult = 0
    weighted = 0.0
    for pa, mult in parent_sets:
        subset = (j, 1, *sorted(pa - {1, j}))
        beta = float(fit_subset(data, response=p, subset=subset).beta_hat[0])
        entries.append((pa, mult, beta))
        weighted += mult * beta
        total_mult += mult
    aver = weighted / total_mult
    eta = theta1j * aver
    avar = plug_in_avar(data, j, theta1j, aver, parent_sets)
    inf = infer(eta, avar, data.n, level)
    return MidaResult(
        j=j,
        theta1j_hat=theta1j,
        theta_multiset=tuple(sorted(entries, key=lambda e: tuple(sorted(e[0])))),
        aver_theta=aver,
        eta_hat=eta,
        avar_hat=avar,
        t_stat=inf.t_stat,
        p_value=inf.p_value,
        ci_low=inf.ci_low,
        ci_high=inf.ci_high,
        level=level,
        n=data.n,
    )


def theta1j_test(data: Dataset, j: int) -> tuple[float, float, float]:
    """Simple-regression coefficient of Xj on X1 with its influence-based
    standard error and two-sided p-value; used for screening."""
    n = data.n
    xc = data.matrix - data.matrix.mean(axis=0)
    var1 = float(xc[:, 0] @ xc[:, 0]) / n
    if var1 <= 0.0:
        raise InvalidDataError("treatment column has zero sample variance")
    cov1j = float(xc[:, 0] @ xc[:, j - 1]) / n
    theta = cov1j / var1
    resid = xc[:, j - 1] - theta * xc[:, 0]
    values = xc[:, 0] * resid / var1
    avar = float(np.mean(values**2))
    if avar <= 0.0:
        raise DegenerateVarianceError("degenerate screening variance")
    se = math.sqrt(avar / n)
    p = float(2.0 * norm.sf(abs(theta / se)))
    return theta, se, p


def population_mida_target(
    sigma: np.ndarray,
    cpdag_mediators: Cpdag,
    j: int,
    max_component_size: int = 12,
) -> tuple[float, float, float]:
    """Population analogue (theta_1j, aver, eta) for a given mediator CPDAG.

    This is the identifiable target: the estimator converges to it whenever
    the CPDAG argument is the true mediator CPDAG.
    """
    p = sigma.shape[0]
    theta1j = float(sigma[0, j - 1] / sigma[0, 0])
    parent_sets = _mediator_parent_sets(cpdag_mediators, j, max_component_size)
    total = 0
    weighted = 0.0
    for pa, mult in parent_sets:
        subset = [j - 1, 0, *sorted(v - 1 for v in pa - {1, j})]
        sub = sigma[np.ix_(subset, subset)]
        rhs = sigma[subset, p - 1]
        beta = float(spd_solve(sub, rhs)[0])
        weighted += mult * beta
        total += mult
    aver = weighted / total
    return theta1j, aver, theta1j * aver


def influence_values(
    data: Dataset,
    sigma: np.ndarray,
    means: np.ndarray,
    cpdag_true: Cpdag,
    j: int,
    max_component_size: int = 12,
) -> InfluenceSample:
    """Per-observation influence values built from population quantities.

    Simulation-mode diagnostic: uses the true covariance and means, and the
    true mediator CPDAG's parent-set multiset.
    """
    p = data.p
    mu = np.asarray(means, dtype=float)
    xt = data.matrix - mu[None, :]
    parent_sets = _mediator_parent_sets(cpdag_true, j, max_component_size)
    mec_size = sum(m for _, m in parent_sets)
    z_jp = np.zeros(data.n)
    for pa, mult in parent_sets:
        subset = (j, 1, *sorted(pa - {1, j}))
        idx = [v - 1 for v in subset]
        sub = sigma[np.ix_(idx, idx)]
        xs = xt[:, idx]
        alpha = spd_solve(sub, np.eye(len(idx))[:, 0])
        coeffs = spd_solve(sub, sigma[idx, p - 1])
        resid = xt[:, p - 1] - xs @ coeffs
        z_jp += mult * (xs @ alpha) * resid
    z_jp /= mec_size
    resid_j = xt[:, j - 1] - (sigma[0, j - 1] / sigma[0, 0]) * xt[:, 0]
    z_1j = xt[:, 0] * resid_j / sigma[0, 0]
    return InfluenceSample(z_jp=z_jp, z_1j=z_1j)


def sample_w(rho: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of the limit statistic W under a doubly-degenerate effect.

    (W1, W2) is standard bivariate normal with correlation rho and
    W = W1 W2 / sqrt(W1^2 + W2^2 + 2 rho W1 W2); the denominator vanishes only
    when both coordinates do, in which case 0 is returned.
    """
    if not (-1.0 < rho < 1.0):
        raise InvalidDataError("rho must be in (-1, 1)")
    if m < 1:
        raise InvalidDataError("m must be at least 1")
    z1 = rng.standard_normal(m)
    z2 = rng.standard_normal(m)
    w1 = z1
    w2 = rho * z1 + math.sqrt(1.0 - rho**2) * z2
    sq = w1**2 + w2**2 + 2.0 * rho * w1 * w2
    denom = np.sqrt(np.maximum(sq, 0.0))
    return np.where(denom > 0.0, w1 * w2 / np.where(denom > 0.0, denom, 1.0), 0.0)
