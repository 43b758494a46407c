"""One-factor confirmatory factor analysis fitted by maximum likelihood.

The model is x = lambda * xi + delta with factor variance fixed (default 1),
so the implied covariance is ``sigma2 * L L' + diag(theta)``. Fitting minimises

    F = log|Sigma| + tr(S Sigma^-1) - log|S| - p

with a BFGS quasi-Newton iteration on (loadings, log error variances).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .errors import (
    InsufficientSampleError,
    NotAtMinimumError,
    NumericalError,
    SingularCovarianceError,
)
from .indices import IndexBundle

MANIFEST_NAMES = ("h", "two_g_over_3", "h_i", "sqrt_ar", "sqrt_articles", "sqrt_cit_over_2")
MANIFEST_LABELS = ("h-index", "2g/3-index", "hI-index", "sqrt(AR)", "sqrt(papers)", "sqrt(citations/2)")
N_MANIFEST = len(MANIFEST_NAMES)
INIT_EPS = 1e-6


@dataclass(frozen=True)
class ManifestVector:
    h: float = 0.0
    two_g_over_3: float = 0.0
    h_i: float = 0.0
    sqrt_ar: float = 0.0
    sqrt_articles: float = 0.0
    sqrt_cit_over_2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in MANIFEST_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ManifestVector":
        values = [float(v) for v in values]
        if len(values) != N_MANIFEST:
            raise ValueError(f"expected {N_MANIFEST} manifest values, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in MANIFEST_NAMES}


def manifest_vector(bundle: IndexBundle, citation_alpha: float = 2.0) -> ManifestVector:
    """Map an index bundle onto the six transformed indicators.

    Paper and citation counts enter as sqrt(N) and sqrt(C / alpha) so they
    are on the same scale as h; g enters as 2g/3.
    """
    return ManifestVector(
        h=float(bundle.h),
        two_g_over_3=2.0 * bundle.g / 3.0,
        h_i=float(bundle.h_i),
        sqrt_ar=math.sqrt(bundle.ar_sum),
        sqrt_articles=math.sqrt(bundle.n_papers),
        sqrt_cit_over_2=math.sqrt(bundle.n_citations / citation_alpha),
    )


def as_matrix(vectors) -> np.ndarray:
    """Stack manifest vectors (or array rows) into an (n, p) float array."""
    if isinstance(vectors, np.ndarray):
        x = np.asarray(vectors, dtype=float)
    else:
        rows = [v.as_array() if isinstance(v, ManifestVector) else np.asarray(v, dtype=float) for v in vectors]
        x = np.array(rows, dtype=float).reshape(len(rows), -1) if rows else np.empty((0, N_MANIFEST))
    if x.ndim != 2:
        raise ValueError("manifest data must be two-dimensional")
    return x


@dataclass(frozen=True)
class SampleCovariance:
    matrix: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def sample_covariance(vectors) -> SampleCovariance:
    x = as_matrix(vectors)
    n = x.shape[0]
    if n < 2:
        raise InsufficientSampleError(f"insufficient sample: need at least 2 vectors, got {n}")
    centered = x - x.mean(axis=0)
    s = centered.T @ centered / (n - 1)
    return SampleCovariance(matrix=(s + s.T) / 2.0, n=n)


@dataclass(frozen=True)
class CfaParams:
    loadings: np.ndarray
    error_variances: np.ndarray
    factor_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float))
        object.__setattr__(self, "error_variances", np.asarray(self.error_variances, dtype=float))
        if self.loadings.shape != self.error_variances.shape:
            raise ValueError("loadings and error variances must have the same length")
        if not self.factor_variance > 0:
            raise ValueError("factor variance must be positive")

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.loadings, self.error_variances])

    @classmethod
    def from_vector(cls, z, factor_variance: float = 1.0) -> "CfaParams":
        z = np.asarray(z, dtype=float)
        p = z.shape[0] // 2
        return cls(z[:p], z[p:], factor_variance)


def implied_covariance(params: CfaParams) -> np.ndarray:
    lam = params.loadings
    return params.factor_variance * np.outer(lam, lam) + np.diag(params.error_variances)


def _as_matrix_s(s) -> np.ndarray:
    return s.matrix if isinstance(s, SampleCovariance) else np.asarray(s, dtype=float)


def _logdet_pd(a: np.ndarray, what: str) -> float:
    sign, logdet = np.linalg.slogdet(a)
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularCovarianceError(f"singular covariance: {what} is not positive definite")
    return float(logdet)


def _inverse(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("singular covariance: implied matrix not invertible") from exc


def discrepancy_f(params: CfaParams, s) -> float:
    s_mat = _as_matrix_s(s)
    sigma = implied_covariance(params)
    logdet_sigma = _logdet_pd(sigma, "implied covariance")
    logdet_s = _logdet_pd(s_mat, "sample covariance")
    inv = _inverse(sigma)
    return float(logdet_sigma + np.sum(s_mat * inv) - logdet_s - s_mat.shape[0])


def log_likelihood(params: CfaParams, s, n: int) -> float:
    """Normal-theory log-likelihood kernel -n/2 [log|Sigma| + tr(S Sigma^-1)]."""
    s_mat = _as_matrix_s(s)
    sigma = implied_covariance(params)
    return float(-0.5 * n * (_logdet_pd(sigma, "implied covariance") + np.sum(s_mat * _inverse(sigma))))


def _residual_weight(params: CfaParams, s_mat: np.ndarray):
    sigma = implied_covariance(params)
    _logdet_pd(sigma, "implied covariance")
    inv = _inverse(sigma)
    return inv, inv - inv @ s_mat @ inv


def gradient_f(params: CfaParams, s) -> np.ndarray:
    """dF/d(loadings, error variances) with the factor variance held fixed.

    Uses dF = tr[(Sigma^-1 - Sigma^-1 S Sigma^-1) dSigma].
    """
    s_mat = _as_matrix_s(s)
    _logdet_pd(s_mat, "sample covariance")
    _, m = _residual_weight(params, s_mat)
    g_lam = 2.0 * params.factor_variance * (m @ params.loadings)
    g_theta = np.diag(m).copy()
    return np.concatenate([g_lam, g_theta])


def hessian_f(params: CfaParams, s) -> np.ndarray:
    """Exact second derivatives of F in (loadings, error variances)."""
    s_mat = _as_matrix_s(s)
    inv, m = _residual_weight(params, s_mat)
    p = params.p
    lam = params.loadings
    phi = params.factor_variance
    eye = np.eye(p)
    derivs = []
    for j in range(p):
        d = np.outer(eye[j], lam)
        derivs.append(phi * (d + d.T))
    for j in range(p):
        derivs.append(np.outer(eye[j], eye[j]))
    a = inv @ s_mat @ inv
    # d2F/da db = tr(M Sigma_ab) + tr[(-V Sb V + V Sb A + A Sb V) Sa], V = Sigma^-1, A = V S V
    k = 2 * p
    h = np.zeros((k, k))
    inv_d = [inv @ d for d in derivs]
    a_d = [a @ d for d in derivs]
    for i in range(k):
        for j in range(i, k):
            val = -np.sum(inv_d[j] * inv_d[i].T) + np.sum(inv_d[j] * a_d[i].T) + np.sum(a_d[j] * inv_d[i].T)
            h[i, j] = h[j, i] = val
    # second derivative of Sigma is nonzero only in the loading block
    h[:p, :p] += 2.0 * phi * m
    return (h + h.T) / 2.0


@dataclass(frozen=True)
class FitStatistics:
    chi_square: float
    df: int
    gfi: float
    nfi: float
    nnfi: float
    cfi: float
    baseline_chi_square: float
    baseline_df: int
    degenerate_baseline: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class CfaFit:
    params: CfaParams
    standard_errors: np.ndarray
    error_variance_se: np.ndarray
    standardized_loadings: np.ndarray
    r_squared: np.ndarray
    f_min: float
    statistics: FitStatistics
    n: int
    converged: bool
    iterations: int
    gradient_norm: float
    labels: tuple[str, ...] = field(default=MANIFEST_LABELS)

    @property
    def loadings(self) -> np.ndarray:
        return self.params.loadings

    @property
    def chi_square(self) -> float:
        return self.statistics.chi_square

    @property
    def df(self) -> int:
        return self.statistics.df

    @property
    def gfi(self) -> float:
        return self.statistics.gfi

    @property
    def nfi(self) -> float:
        return self.statistics.nfi

    @property
    def nnfi(self) -> float:
        return self.statistics.nnfi

    @property
    def cfi(self) -> float:
        return self.statistics.cfi

    def significant(self) -> np.ndarray:
        """Loadings at least twice their standard error."""
        return np.abs(self.loadings) >= 2.0 * self.standard_errors

    def to_dict(self) -> dict:
        return {
            "loadings": self.params.loadings.tolist(),
            "error_variances": self.params.error_variances.tolist(),
            "factor_variance": self.params.factor_variance,
            "standard_errors": self.standard_errors.tolist(),
            "error_variance_se": self.error_variance_se.tolist(),
            "standardized_loadings": self.standardized_loadings.tolist(),
            "r_squared": self.r_squared.tolist(),
            "f_min": self.f_min,
            "n": self.n,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "labels": list(self.labels),
            "statistics": self.statistics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "CfaFit":
        return cls(
            params=CfaParams(d["loadings"], d["error_variances"], d["factor_variance"]),
            standard_errors=np.asarray(d["standard_errors"], dtype=float),
            error_variance_se=np.asarray(d["error_variance_se"], dtype=float),
            standardized_loadings=np.asarray(d["standardized_loadings"], dtype=float),
            r_squared=np.asarray(d["r_squared"], dtype=float),
            f_min=float(d["f_min"]),
            statistics=FitStatistics(**d["statistics"]),
            n=int(d["n"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            gradient_norm=float(d["gradient_norm"]),
            labels=tuple(d["labels"]),
        )


def initial_params(s_mat: np.ndarray, factor_variance: float = 1.0) -> CfaParams:
    diag = np.diag(s_mat)
    lam = np.sqrt(np.maximum(diag / 2.0, INIT_EPS) / factor_variance)
    theta = np.maximum(diag / 2.0, INIT_EPS)
    return CfaParams(lam, theta, factor_variance)


def _check_pd(s_mat: np.ndarray):
    if s_mat.ndim != 2 or s_mat.shape[0] != s_mat.shape[1]:
        raise NumericalError("sample covariance must be square")
    if not np.allclose(s_mat, s_mat.T, atol=1e-12 * max(1.0, np.abs(s_mat).max())):
        raise NumericalError("sample covariance must be symmetric")
    try:
        np.linalg.cholesky(s_mat)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "singular covariance: sample covariance is not positive definite; "
            "use more researchers or drop constant columns"
        ) from exc


def _minimise(s_mat, start: CfaParams, tol: float, max_iter: int):
    """BFGS with Armijo backtracking on z = (loadings, log theta).

    Convergence is judged on the max-norm of the gradient in the natural
    (loadings, theta) coordinates.
    """
    p = start.p
    phi = start.factor_variance

    def unpack(z):
        # an overlong trial step overflows here; the line search halves it
        with np.errstate(over="raise"):
            return CfaParams(z[:p], np.exp(z[p:]), phi)

    def evaluate(z):
        params = unpack(z)
        f = discrepancy_f(params, s_mat)
        g_nat = gradient_f(params, s_mat)
        g = g_nat.copy()
        g[p:] *= params.error_variances
        return f, g, g_nat

    z = np.concatenate([start.loadings, np.log(start.error_variances)])
    f, g, g_nat = evaluate(z)
    h_inv = np.eye(2 * p)
    first = True
    iterations = 0
    while np.max(np.abs(g_nat)) >= tol and iterations < max_iter:
        iterations += 1
        d = -h_inv @ g
        slope = float(g @ d)
        if slope >= 0:
            h_inv = np.eye(2 * p)
            d = -g
            slope = float(g @ d)
        step = 1.0
        noise = 1e-13 * (1.0 + abs(f))
        accepted = False
        for _ in range(60):
            z_new = z + step * d
            try:
                f_new, g_new, g_nat_new = evaluate(z_new)
            except (SingularCovarianceError, FloatingPointError):
                step *= 0.5
                continue
            if not np.isfinite(f_new):
                step *= 0.5
                continue
            if f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            # near the optimum F differences drown in rounding; fall back on the gradient
            if f_new <= f + noise and np.max(np.abs(g_nat_new)) < np.max(np.abs(g_nat)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if np.allclose(h_inv, np.eye(2 * p)):
                break
            h_inv = np.eye(2 * p)
            first = True
            continue
        s_vec = z_new - z
        y_vec = g_new - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-300:
            if first:
                h_inv = np.eye(2 * p) * (sy / float(y_vec @ y_vec))
                first = False
            rho = 1.0 / sy
            v = np.eye(2 * p) - rho * np.outer(s_vec, y_vec)
            h_inv = v @ h_inv @ v.T + rho * np.outer(s_vec, s_vec)
        z, f, g, g_nat = z_new, f_new, g_new, g_nat_new
    converged = bool(np.max(np.abs(g_nat)) < tol)
    return unpack(z), f, converged, iterations, float(np.max(np.abs(g_nat)))


def standard_errors(fit_params: CfaParams, s, multiplier: int) -> tuple[np.ndarray, np.ndarray]:
    """Asymptotic SEs from (2 / multiplier) * inverse Hessian of F.

    Returns (loading SEs, error-variance SEs). ``multiplier`` is n or n - 1.
    """
    h = hessian_f(fit_params, s)
    h = (h + h.T) / 2.0
    eig = np.linalg.eigvalsh(h)
    if eig.min() <= 1e-12 * max(1.0, eig.max()):
        raise NotAtMinimumError("not at a minimum: Hessian of F is not positive definite")
    acov = 2.0 / multiplier * np.linalg.inv(h)
    se = np.sqrt(np.diag(acov))
    p = fit_params.p
    return se[:p], se[p:]


def baseline_discrepancy(s_mat: np.ndarray) -> float:
    """F for the independence model Sigma = diag(S), which is its exact ML fit."""
    return float(np.sum(np.log(np.diag(s_mat))) - _logdet_pd(s_mat, "sample covariance"))


def fit_statistics(f_min: float, n: int, s, fitted_sigma: np.ndarray,
                   multiplier: int | None = None, n_free: int | None = None) -> FitStatistics:
    s_mat = _as_matrix_s(s)
    p = s_mat.shape[0]
    if multiplier is None:
        multiplier = n - 1
    if n_free is None:
        n_free = 2 * p
    df_m = p * (p + 1) // 2 - n_free
    df_b = p * (p - 1) // 2
    chi_m = multiplier * f_min
    chi_b = multiplier * baseline_discrepancy(s_mat)

    a = np.linalg.solve(fitted_sigma, s_mat)
    resid = a - np.eye(p)
    gfi = 1.0 - np.trace(resid @ resid) / np.trace(a @ a)

    if chi_b <= 0:
        warnings.warn("baseline chi-square is zero; incremental fit indices set to 1", RuntimeWarning)
        return FitStatistics(chi_m, df_m, float(gfi), 1.0, 1.0, 1.0, chi_b, df_b, True)
    nfi = (chi_b - chi_m) / chi_b
    if df_m > 0:
        denom = chi_b / df_b - 1.0
        nnfi = (chi_b / df_b - chi_m / df_m) / denom if denom != 0 else 1.0
    else:
        nnfi = 1.0
    cfi_denom = max(chi_b - df_b, chi_m - df_m, 0.0)
    cfi = 1.0 - max(chi_m - df_m, 0.0) / cfi_denom if cfi_denom > 0 else 1.0
    return FitStatistics(float(chi_m), df_m, float(gfi), float(nfi), float(nnfi), float(cfi),
                         float(chi_b), df_b, False)


def fit(s: SampleCovariance, config: RunConfig | None = None, factor_variance: float = 1.0) -> CfaFit:
    """Fit the one-factor model to ``s`` by maximum likelihood.

    Non-convergence is reported through ``converged=False``, not raised.
    Loadings are sign-flipped so they sum to a positive number.
    """
    config = config or RunConfig()
    s_mat = _as_matrix_s(s)
    _check_pd(s_mat)
    n = s.n if isinstance(s, SampleCovariance) else None
    if n is None:
        raise ValueError("fit needs a SampleCovariance carrying the sample size")
    start = initial_params(s_mat, factor_variance)
    params, f_min, converged, iterations, gnorm = _minimise(s_mat, start, config.tol, config.max_iter)
    if params.loadings.sum() < 0:
        params = CfaParams(-params.loadings, params.error_variances, params.factor_variance)

    mult = config.multiplier(n)
    try:
        se, theta_se = standard_errors(params, s_mat, mult)
    except NotAtMinimumError:
        se = np.full(params.p, np.nan)
        theta_se = np.full(params.p, np.nan)

    sigma = implied_covariance(params)
    std = params.loadings * math.sqrt(params.factor_variance) / np.sqrt(np.diag(sigma))
    stats = fit_statistics(max(f_min, 0.0), n, s_mat, sigma, multiplier=mult)
    return CfaFit(
        params=params,
        standard_errors=se,
        error_variance_se=theta_se,
        standardized_loadings=std,
        r_squared=std ** 2,
        f_min=max(f_min, 0.0),
        statistics=stats,
        n=n,
        converged=converged,
        iterations=iterations,
        gradient_norm=gnorm,
    )


def anderson_rubin_scores(fit_result: CfaFit, vectors) -> np.ndarray:
    """Factor scores whose sample variance reproduces the factor variance.

    Weights are Theta^-1 L scaled by (L' Theta^-1 Sigma Theta^-1 L)^-1/2 with
    the fitted Sigma; data are centred on their own mean.
    """
    params = fit_result.params
    theta = params.error_variances
    if np.any(theta <= 0) or not np.all(np.isfinite(theta)):
        raise SingularCovarianceError("singular error covariance: Theta has non-positive entries")
    x = as_matrix(vectors)
    sigma = implied_covariance(params)
    w = params.loadings / theta
    q = float(w @ sigma @ w)
    scale = math.sqrt(params.factor_variance / q)
    centered = x - x.mean(axis=0)
    return centered @ w * scale


def draw_manifest(loadings: Sequence[float], error_variances: Sequence[float], n: int,
                  rng: np.random.Generator, means: Sequence[float] | None = None,
                  factor_variance: float = 1.0) -> np.ndarray:
    """Sample n rows from x = mean + L xi + delta with normal xi and delta."""
    lam = np.asarray(loadings, dtype=float)
    theta = np.asarray(error_variances, dtype=float)
    mu = np.zeros_like(lam) if means is None else np.asarray(means, dtype=float)
    xi = rng.normal(0.0, math.sqrt(factor_variance), size=n)
    delta = rng.normal(0.0, 1.0, size=(n, lam.shape[0])) * np.sqrt(theta)
    return mu + np.outer(xi, lam) + delta
