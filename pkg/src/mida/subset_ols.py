"""Model-free centered OLS over arbitrary covariate subsets.

For a response Y and covariate subset S the estimator is
beta_hat_S = SigmaHat_S^{-1} SigmaHat_{S,Y} with all quantities centered by
sample means, and its target is beta_S = Sigma_S^{-1} Sigma_{S,Y}. The error
beta_hat_S - beta_S splits exactly, for every dataset, into a mean of i.i.d.
influence terms plus two remainders:

    beta_hat_S - beta_S = mean_i Psi_S(Z_i) + T_nS + R_nS
    Psi_S(Z) = Sigma_S^{-1} Xt_S (Yt - Xt_S' beta_S)          (zero mean)
    T_nS     = (SigmaHat_S^{-1} - Sigma_S^{-1})(SigmaTil_SY - SigmaTil_S beta_S)
    R_nS     = SigmaHat_S^{-1}(GammaHat_S beta_S - GammaHat_SY)

where tilde quantities center by population means, hats by sample means, and
GammaHat collects the rank-one mean-shift terms (SigmaHat = SigmaTil - GammaHat).
This module computes the decomposition, uniform sup diagnostics over subset
collections, and the deterministic envelope bounds that describe their rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDataError, NumericalError
from .linalg import spd_solve, spectral_norm
from .lsem import Dataset


@dataclass(frozen=True)
class SubsetFit:
    """Centered OLS fit of the response on one covariate subset."""

    subset: tuple[int, ...]
    beta_hat: np.ndarray
    sigma_hat_S: np.ndarray
    sigma_hat_SY: np.ndarray


@dataclass(frozen=True)
class AleDecomposition:
    """Exact split of beta_hat_S - beta_S into influence mean and remainders."""

    subset: tuple[int, ...]
    beta_hat: np.ndarray
    beta_target: np.ndarray
    psi_mean: np.ndarray
    t_term: np.ndarray
    r_term: np.ndarray
    sigma_tilde_S: np.ndarray
    gamma_hat_S: np.ndarray
    sigma_tilde_SY: np.ndarray
    gamma_hat_SY: np.ndarray

    @property
    def identity_gap(self) -> float:
        """Max-abs of (beta_hat - beta_target) - (psi_mean + t_term + r_term)."""
        lhs = self.beta_hat - self.beta_target
        rhs = self.psi_mean + self.t_term + self.r_term
        return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class EnvelopeParams:
    """User-supplied constants for the deterministic rate envelopes."""

    K_S: float
    Ktilde_S: float
    lambda_inf: float
    lambda_sup: float
    lambdatilde_inf: float
    lambdatilde_sup: float
    sigma_Y: float
    sigma_X: float
    c: float
    c_star: float

    def __post_init__(self) -> None:
        for name in ("K_S", "Ktilde_S", "lambda_inf", "lambda_sup",
                     "lambdatilde_inf", "lambdatilde_sup", "sigma_Y", "sigma_X"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.c < 0 or self.c_star < 0:
            raise ValueError("c and c_star must be nonnegative")
        if self.lambda_inf > self.lambda_sup:
            raise ValueError("lambda_inf must not exceed lambda_sup")


@dataclass(frozen=True)
class EnvelopeBounds:
    eps1: float
    eps2: float
    eta1: float
    eta2: float
    delta: float
    first_order_bound: float
    remainder_bound: float
    r_n: float
    cstar_condition_holds: bool


@dataclass(frozen=True)
class UniformDiagnostics:
    """Sup (over a subset collection) of the decomposition error magnitudes."""

    r_n: float
    sup_beta_err: float
    sup_psi_mean: float
    sup_remainder: float
    sup_sigma_dev: float
    sup_sigma_inv_dev: float


def _columns(data: Dataset, indices: tuple[int, ...]) -> np.ndarray:
    return data.matrix[:, [j - 1 for j in indices]]


def _check_subset(data: Dataset, response: int, subset: tuple[int, ...]) -> None:
    if response in subset:
        raise InvalidDataError("response may not appear in the covariate subset")
    if len(set(subset)) != len(subset):
        raise InvalidDataError("subset contains duplicate indices")
    if len(subset) >= data.n:
        raise InvalidDataError("subset size must be below the sample size")
    for j in (response,) + subset:
        if not (1 <= j <= data.p):
            raise InvalidDataError(f"variable index {j} out of range 1..{data.p}")


def fit_subset(data: Dataset, response: int, subset: tuple[int, ...] | list[int]) -> SubsetFit:
    """Centered OLS of the response column on the subset columns."""
    subset = tuple(subset)
    _check_subset(data, response, subset)
    n = data.n
    x = _columns(data, subset)
    y = data.column(response)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sigma_hat = xc.T @ xc / n
    sigma_hat_y = xc.T @ yc / n
    beta = spd_solve(sigma_hat, sigma_hat_y, context=f"OLS on subset {subset}")
    return SubsetFit(subset=subset, beta_hat=beta, sigma_hat_S=sigma_hat,
                     sigma_hat_SY=sigma_hat_y)


def population_beta(sigma: np.ndarray, response: int, subset: tuple[int, ...] | list[int]) -> np.ndarray:
    """Target coefficients Sigma_S^{-1} Sigma_{S,Y} from a population covariance."""
    subset = tuple(subset)
    idx = [j - 1 for j in subset]
    sub = sigma[np.ix_(idx, idx)]
    rhs = sigma[idx, response - 1]
    return spd_solve(sub, rhs, context=f"population regression on {subset}")


def population_residual_coeffs(
    sigma: np.ndarray, i: int, subset: tuple[int, ...] | list[int]
) -> np.ndarray:
    """Coefficients c with population residual R_{i|S} = Xi - mu_i - c'(X_S - mu_S)."""
    subset = tuple(subset)
    idx = [j - 1 for j in subset]
    sub = sigma[np.ix_(idx, idx)]
    rhs = sigma[idx, i - 1]
    return spd_solve(sub, rhs, context=f"residual regression of {i} on {subset}")


def decompose(
    data: Dataset,
    response: int,
    subset: tuple[int, ...] | list[int],
    true_sigma: np.ndarray,
    true_means: np.ndarray,
) -> AleDecomposition:
    """Evaluate every term of the exact first-order decomposition."""
    subset = tuple(subset)
    _check_subset(data, response, subset)
    n = data.n
    idx = [j - 1 for j in subset]
    x = _columns(data, subset)
    y = data.column(response)
    mu_s = np.asarray(true_means, dtype=float)[idx]
    mu_y = float(np.asarray(true_means, dtype=float)[response - 1])
    sigma_s = true_sigma[np.ix_(idx, idx)]
    beta_target = population_beta(true_sigma, response, subset)

    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sigma_hat = xc.T @ xc / n
    sigma_hat_y = xc.T @ yc / n
    beta_hat = spd_solve(sigma_hat, sigma_hat_y, context=f"OLS on subset {subset}")

    xt = x - mu_s[None, :]
    yt = y - mu_y
    sigma_til = xt.T @ xt / n
    sigma_til_y = xt.T @ yt / n
    dbar = x.mean(axis=0) - mu_s
    gamma_hat = np.outer(dbar, dbar)
    gamma_hat_y = (y.mean() - mu_y) * dbar

    # mean of Psi_S(Z_i) = Sigma_S^{-1} (SigmaTil_SY - SigmaTil_S beta_S)
    score_mean = sigma_til_y - sigma_til @ beta_target
    psi_mean = spd_solve(sigma_s, score_mean, context="population covariance")
    t_term = spd_solve(sigma_hat, score_mean) - psi_mean
    r_term = spd_solve(sigma_hat, gamma_hat @ beta_target - gamma_hat_y)
    return AleDecomposition(
        subset=subset,
        beta_hat=beta_hat,
        beta_target=beta_target,
        psi_mean=psi_mean,
        t_term=t_term,
        r_term=r_term,
        sigma_tilde_S=sigma_til,
        gamma_hat_S=gamma_hat,
        sigma_tilde_SY=sigma_til_y,
        gamma_hat_SY=gamma_hat_y,
    )


def psi_values(
    data: Dataset,
    response: int,
    subset: tuple[int, ...] | list[int],
    true_sigma: np.ndarray,
    true_means: np.ndarray,
) -> np.ndarray:
    """Per-observation influence vectors Psi_S(Z_i), an n x |S| array."""
    subset = tuple(subset)
    idx = [j - 1 for j in subset]
    x = _columns(data, subset)
    y = data.column(response)
    mu = np.asarray(true_means, dtype=float)
    xt = x - mu[idx][None, :]
    yt = y - mu[response - 1]
    beta_target = population_beta(true_sigma, response, subset)
    resid = yt - xt @ beta_target
    scores = xt * resid[:, None]
    sigma_s = true_sigma[np.ix_(idx, idx)]
    return spd_solve(sigma_s, scores.T).T


def uniform_diagnostics(
    data: Dataset,
    response: int,
    subsets: list[tuple[int, ...]],
    true_sigma: np.ndarray,
    true_means: np.ndarray,
) -> UniformDiagnostics:
    """Sup over the subset collection of the decomposition error magnitudes."""
    if not subsets:
        raise InvalidDataError("need at least one subset")
    sup_beta = sup_psi = sup_rem = sup_dev = sup_inv = 0.0
    for subset in subsets:
        dec = decompose(data, response, subset, true_sigma, true_means)
        idx = [j - 1 for j in subset]
        sigma_s = true_sigma[np.ix_(idx, idx)]
        sigma_hat = dec.sigma_tilde_S - dec.gamma_hat_S
        inv_dev = np.linalg.inv(sigma_hat) - np.linalg.inv(sigma_s)
        sup_beta = max(sup_beta, float(np.linalg.norm(dec.beta_hat - dec.beta_target)))
        sup_psi = max(sup_psi, float(np.linalg.norm(dec.psi_mean)))
        sup_rem = max(sup_rem, float(np.linalg.norm(dec.t_term + dec.r_term)))
        sup_dev = max(sup_dev, spectral_norm(sigma_hat - sigma_s))
        sup_inv = max(sup_inv, spectral_norm(inv_dev))
    r_n = max(len(s) for s in subsets) + math.log(len(subsets))
    return UniformDiagnostics(
        r_n=r_n,
        sup_beta_err=sup_beta,
        sup_psi_mean=sup_psi,
        sup_remainder=sup_rem,
        sup_sigma_dev=sup_dev,
        sup_sigma_inv_dev=sup_inv,
    )


DIAGNOSTICS_CSV_HEADER = ("n,q_n,L_n,sup_beta_err,sup_psi_mean,sup_remainder,"
                          "sup_sigma_dev,sup_sigma_inv_dev,replication,seed")


def diagnostics_csv(records) -> str:
    """CSV text for (n, q_n, L_n, UniformDiagnostics, replication, seed) records."""
    lines = [DIAGNOSTICS_CSV_HEADER]
    for n, q_n, l_n, diag, replication, seed in records:
        lines.append(",".join([
            str(n), str(q_n), str(l_n),
            f"{diag.sup_beta_err:.10g}", f"{diag.sup_psi_mean:.10g}",
            f"{diag.sup_remainder:.10g}", f"{diag.sup_sigma_dev:.10g}",
            f"{diag.sup_sigma_inv_dev:.10g}", str(replication), str(seed),
        ]))
    return "\n".join(lines) + "\n"


def envelope(params: EnvelopeParams, n: int, q_n: int, L_n: int) -> EnvelopeBounds:
    """Deterministic envelope quantities controlling the decomposition terms.

    r_n = q_n + log L_n enters every bound; the first-order bound shrinks like
    sqrt(r_n/n) and the remainder bound like r_n/n (up to the same constants).
    """
    if n < 1 or q_n < 0 or L_n < 1:
        raise ValueError("need n >= 1, q_n >= 0, L_n >= 1")
    r = q_n + math.log(L_n)
    rt = r + 1.0
    cbar = params.c + 1.0
    k = params.K_S
    kt = params.Ktilde_S
    k_star = 2.0 * k / params.lambda_inf**2
    c_s = math.sqrt(2.0) * params.sigma_Y / math.sqrt(params.lambda_inf)
    eps1 = cbar * k * (math.sqrt(r / n) + r / n)
    eps2 = cbar * kt * (math.sqrt(rt / n) + rt / n)
    eta1 = 32.0 * cbar * k * r / n + params.lambda_sup / n
    eta2 = 32.0 * cbar * kt * rt / n + params.lambdatilde_sup / n
    delta = cbar * k_star * (math.sqrt(r / n) + 33.0 * r / n) \
        + 2.0 * params.lambda_sup / (n * params.lambda_inf**2)
    first_order = (eps1 * c_s + eps2) / params.lambda_inf
    remainder = delta * (eps1 * c_s + eps2) \
        + (delta + 1.0 / params.lambda_inf) * (eta1 * c_s + eta2)
    cstar_ok = (
        (params.c_star + 1.0) * k * (math.sqrt(r / n) + 33.0 * r / n)
        + params.lambda_sup / n
        <= 0.5 * params.lambda_inf
    )
    return EnvelopeBounds(
        eps1=eps1, eps2=eps2, eta1=eta1, eta2=eta2, delta=delta,
        first_order_bound=first_order, remainder_bound=remainder,
        r_n=r, cstar_condition_holds=cstar_ok,
    )


@dataclass(frozen=True)
class FunctionalStat:
    """A linear functional of subset coefficients with its plug-in scale."""

    estimate: float
    target: float
    sigma_hat_xi: float
    n: int

    @property
    def t_stat(self) -> float:
        if self.sigma_hat_xi <= 0:
            raise NumericalError("degenerate functional scale estimate")
        return math.sqrt(self.n) * (self.estimate - self.target) / self.sigma_hat_xi


def linear_functional(
    data: Dataset,
    response: int,
    weights: list[tuple[tuple[int, ...], np.ndarray]],
    true_sigma: np.ndarray,
    true_means: np.ndarray,
) -> FunctionalStat:
    """Evaluate sum_S a_S' beta_hat_S with its influence-based scale estimate.

    The scale is the sample standard deviation of the per-observation values
    xi_i = sum_S a_S' Psi_S(Z_i).
    """
    est = 0.0
    target = 0.0
    xi = np.zeros(data.n)
    for subset, a in weights:
        a = np.asarray(a, dtype=float)
        fit = fit_subset(data, response, subset)
        est += float(a @ fit.beta_hat)
        target += float(a @ population_beta(true_sigma, response, subset))
        xi += psi_values(data, response, subset, true_sigma, true_means) @ a
    sigma_hat = float(np.std(xi, ddof=1))
    return FunctionalStat(estimate=est, target=target, sigma_hat_xi=sigma_hat, n=data.n)
