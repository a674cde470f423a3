"""Parametric families on {0,1}^d: product, logistic conditionals, Gaussian copula.

Each family supports fitting to a weighted particle sample and batch
sampling.  The product and logistic families additionally support exact
pointwise log-mass evaluation; the Gaussian copula does not (its mass is a
d-dimensional orthant integral), so it is sampling-only.

Fitting notes
-------------
* The logistic conditionals family is fit row by row: component i is a
  penalized weighted logistic regression on components 1..i-1 plus an
  intercept.  Predictors that are only weakly correlated with the response
  are dropped from the regression, which keeps the Newton iterations well
  conditioned and the fitted matrix sparse.
* The Gaussian copula is fit by method of moments: thresholds from the
  univariate normal quantile, pairwise correlations by a Newton iteration on
  the bivariate normal CDF with bisection as a fallback, and an eigenvalue
  repair that evenly lowers the local correlations whenever the assembled
  matrix is not positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri, owens_t

from .errors import ContractViolation, DomainError, InvalidParamsError

CLIP_FLOOR = 1e-6
PD_EPS = 1e-9
NEWTON_PENALTY = 1e-4
NEWTON_DELTA = 1e-6
NEWTON_MAX_ITER = 50
CORR_SCREEN = 0.075


def default_clip(n: int) -> float:
    """Marginal clipping width for an n-particle sample."""
    return max(1.0 / (2.0 * n), CLIP_FLOOR)


def log_sigmoid(z):
    """log l(z) for the logistic function l, stable for large |z|."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


# ---------------------------------------------------------------------------
# Weighted samples and moments


@dataclass
class WeightedSample:
    """n binary particles with nonnegative weights summing to one."""

    X: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X)
        w = np.asarray(self.w, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ContractViolation(f"particle matrix must be (n, d) with n >= 1, got {X.shape}")
        if w.shape != (X.shape[0],):
            raise ContractViolation("weight vector length must match particle count")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ContractViolation("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractViolation(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if X.dtype != np.uint8:
            X = np.asarray(X)
            if np.any((X != 0) & (X != 1)):
                raise ContractViolation("particles must be 0/1 valued")
            X = X.astype(np.uint8)
        self.X = X
        self.w = w

    @classmethod
    def uniform(cls, X: np.ndarray) -> "WeightedSample":
        n = np.asarray(X).shape[0]
        return cls(X, np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def means(self) -> np.ndarray:
        return self.w @ self.X.astype(np.float64)

    def second_moments(self) -> np.ndarray:
        Xf = self.X.astype(np.float64)
        return Xf.T @ (Xf * self.w[:, None])

    def correlations(self) -> np.ndarray:
        """Weighted sample correlation matrix; degenerate components get 0."""
        m = self.means()
        cov = self.second_moments() - np.outer(m, m)
        var = np.clip(np.diag(cov), 0.0, None)
        sd = np.sqrt(var)
        denom = np.outer(sd, sd)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(denom > 1e-12, cov / np.where(denom > 0, denom, 1.0), 0.0)
        np.fill_diagonal(corr, 1.0)
        return corr


@dataclass(frozen=True)
class SampleWithMass:
    """A single draw together with the natural log of its mass."""

    y: np.ndarray
    log_p: float


# ---------------------------------------------------------------------------
# Product family


@dataclass(frozen=True)
class ProductParams:
    """Independent Bernoulli components with marginal vector m in (0,1)^d."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.ndim != 1 or m.size < 1:
            raise ContractViolation("marginal vector must be one-dimensional and non-empty")
        if np.any(m <= 0.0) or np.any(m >= 1.0):
            raise ContractViolation("marginals must lie strictly inside (0, 1)")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @property
    def dim(self) -> int:
        return self.m.shape[0]


def product_fit(sample: WeightedSample, eps_clip: float | None = None) -> ProductParams:
    """Weighted sample mean, clamped away from the 0/1 boundary."""
    if eps_clip is None:
        eps_clip = default_clip(sample.n)
    return ProductParams(np.clip(sample.means(), eps_clip, 1.0 - eps_clip))


def product_sample_many(params: ProductParams, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """n independent draws, returned with their exact log masses."""
    m = params.m
    Y = (rng.random((n, params.dim)) < m).astype(np.uint8)
    logp = Y @ np.log(m) + (1 - Y) @ np.log1p(-m)
    return Y, logp


def product_sample(params: ProductParams, rng: np.random.Generator) -> SampleWithMass:
    Y, logp = product_sample_many(params, 1, rng)
    return SampleWithMass(Y[0], float(logp[0]))


def product_logpmf_many(params: ProductParams, Y: np.ndarray) -> np.ndarray:
    if Y.shape[1] != params.dim:
        raise ContractViolation(f"dimension mismatch: expected {params.dim}, got {Y.shape[1]}")
    return Y @ np.log(params.m) + (1 - Y) @ np.log1p(-params.m)


def product_logpmf(params: ProductParams, y) -> float:
    y = np.asarray(y, dtype=np.uint8)
    if y.shape != (params.dim,):
        raise ContractViolation(f"dimension mismatch: expected {params.dim}, got {y.shape}")
    return float(product_logpmf_many(params, y[None, :])[0])


# ---------------------------------------------------------------------------
# Logistic conditionals family


@dataclass(frozen=True)
class LogisticConditionalsParams:
    """Lower-triangular matrix A driving the chain-rule logistic conditionals.

    Row i holds the regression coefficients of component i on components
    j < i; the diagonal entry is the intercept.
    """

    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ContractViolation(f"parameter matrix must be square, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ContractViolation("parameter matrix must be finite")
        if np.any(np.triu(A, k=1) != 0.0):
            raise ContractViolation("entries above the diagonal must be zero")
        A = A.copy()
        A.flags.writeable = False
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def logistic_sample_many(
    params: LogisticConditionalsParams, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Chain-rule sampling; the log mass accumulates as a by-product."""
    A = params.A
    d = params.dim
    Y = np.zeros((n, d), dtype=np.uint8)
    logp = np.zeros(n)
    U = rng.random((n, d))
    for i in range(d):
        z = A[i, i] + Y[:, :i].astype(np.float64) @ A[i, :i]
        yi = U[:, i] < expit(z)
        Y[:, i] = yi
        logp += np.where(yi, log_sigmoid(z), log_sigmoid(-z))
    return Y, logp


def logistic_sample(params: LogisticConditionalsParams, rng: np.random.Generator) -> SampleWithMass:
    Y, logp = logistic_sample_many(params, 1, rng)
    return SampleWithMass(Y[0], float(logp[0]))


def logistic_logpmf_many(params: LogisticConditionalsParams, Y: np.ndarray) -> np.ndarray:
    if Y.shape[1] != params.dim:
        raise ContractViolation(f"dimension mismatch: expected {params.dim}, got {Y.shape[1]}")
    A = params.A
    strict = np.tril(A, k=-1)
    Z = Y.astype(np.float64) @ strict.T + np.diag(A)
    return np.where(Y == 1, log_sigmoid(Z), log_sigmoid(-Z)).sum(axis=1)


def logistic_logpmf(params: LogisticConditionalsParams, y) -> float:
    y = np.asarray(y, dtype=np.uint8)
    if y.shape != (params.dim,):
        raise ContractViolation(f"dimension mismatch: expected {params.dim}, got {y.shape}")
    return float(logistic_logpmf_many(params, y[None, :])[0])


def logistic_fit(
    sample: WeightedSample,
    a_init: LogisticConditionalsParams | None = None,
    eps: float = NEWTON_PENALTY,
    delta_newton: float = NEWTON_DELTA,
    max_iter: int = NEWTON_MAX_ITER,
    corr_screen: float = CORR_SCREEN,
    eps_clip: float | None = None,
) -> LogisticConditionalsParams:
    """Row-wise penalized Newton-Raphson fit of the conditional regressions.

    The quadratic penalty eps keeps the iteration convergent under complete
    or quasi-complete separation.  If a row fails to converge the penalty is
    escalated twice (x10 each time); if that still fails the row falls back
    to an intercept-only fit matching the weighted marginal, which is always
    valid.
    """
    if eps <= 0:
        raise ContractViolation("penalty eps must be positive")
    n, d = sample.n, sample.dim
    if eps_clip is None:
        eps_clip = default_clip(n)
    Xf = sample.X.astype(np.float64)
    w = sample.w
    xbar = sample.means()
    xclamped = np.clip(xbar, eps_clip, 1.0 - eps_clip)
    corr = sample.correlations()

    A = np.zeros((d, d))
    A_prev = a_init.A if a_init is not None else None
    for i in range(d):
        # Degenerate response column: intercept-only closed form.
        if xbar[i] <= eps_clip or xbar[i] >= 1.0 - eps_clip:
            A[i, i] = float(logit(xclamped[i]))
            continue
        preds = np.flatnonzero(np.abs(corr[i, :i]) >= corr_screen)
        Z = np.column_stack([Xf[:, preds], np.ones(n)])
        y = Xf[:, i]
        a0 = np.zeros(preds.size + 1)
        if A_prev is not None:
            a0[:-1] = A_prev[i, preds]
            a0[-1] = A_prev[i, i]
        a = _newton_logistic(Z, y, w, a0, eps, delta_newton, max_iter)
        if a is None:
            A[i, i] = float(logit(xclamped[i]))
        else:
            A[i, preds] = a[:-1]
            A[i, i] = a[-1]
    return LogisticConditionalsParams(A)


def _newton_logistic(Z, y, w, a0, eps, delta, max_iter) -> np.ndarray | None:
    """Penalized Newton for one weighted logistic regression; None on failure."""
    k = Z.shape[1]
    eye = np.eye(k)
    penalty = eps
    for _attempt in range(3):
        a = a0.copy()
        for _ in range(max_iter):
            p = expit(Z @ a)
            q = p * (1.0 - p)
            H = Z.T @ (Z * (w * q)[:, None]) + penalty * eye
            rhs = Z.T @ (w * (y - p)) - penalty * a
            try:
                step = np.linalg.solve(H, rhs)
            except np.linalg.LinAlgError:
                break
            a = a + step
            if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > 1e6:
                break
            if np.max(np.abs(step)) < delta:
                return a
        penalty *= 10.0
    return None


# ---------------------------------------------------------------------------
# Normal CDFs


def phi1(x: float) -> float:
    """Standard normal CDF."""
    return float(ndtr(x))


def phi1_inv(p: float) -> float:
    """Standard normal quantile; p must lie in the open unit interval."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile argument must be in (0, 1), got {p!r}")
    return float(ndtri(p))


def phi2(x1: float, x2: float, sigma: float) -> float:
    """Bivariate standard-normal CDF P(X <= x1, Y <= x2) at correlation sigma.

    Evaluated through Owen's T function, which gives absolute errors of
    order 1e-14 uniformly in sigma; the boundary correlations +-1 reduce to
    the Frechet bounds.
    """
    if not -1.0 <= sigma <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1], got {sigma!r}")
    if sigma == 1.0:
        return float(ndtr(min(x1, x2)))
    if sigma == -1.0:
        return float(max(0.0, ndtr(x1) + ndtr(x2) - 1.0))
    if sigma == 0.0:
        return float(ndtr(x1) * ndtr(x2))
    den = math.sqrt((1.0 - sigma) * (1.0 + sigma))
    if x1 == 0.0 and x2 == 0.0:
        return 0.25 + math.asin(sigma) / (2.0 * math.pi)
    if x1 == 0.0:
        return float(0.5 * ndtr(x2) - owens_t(x2, -sigma / den))
    if x2 == 0.0:
        return float(0.5 * ndtr(x1) - owens_t(x1, -sigma / den))
    a1 = (x2 - sigma * x1) / (x1 * den)
    a2 = (x1 - sigma * x2) / (x2 * den)
    beta = 0.5 if x1 * x2 < 0.0 else 0.0
    val = 0.5 * (ndtr(x1) + ndtr(x2)) - owens_t(x1, a1) - owens_t(x2, a2) - beta
    return float(min(1.0, max(0.0, val)))


def bvn_density(x1: float, x2: float, sigma: float) -> float:
    """Density of the bivariate standard normal with correlation sigma."""
    s2 = max(1.0 - sigma * sigma, 1e-300)
    quad = (x1 * x1 - 2.0 * sigma * x1 * x2 + x2 * x2) / (2.0 * s2)
    return math.exp(-quad) / (2.0 * math.pi * math.sqrt(s2))


# ---------------------------------------------------------------------------
# Gaussian copula family


@dataclass
class GaussianCopulaParams:
    """Thresholds a and correlation matrix Sigma of the dichotomized normal."""

    a: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        S = np.asarray(self.sigma, dtype=np.float64)
        if a.ndim != 1 or S.shape != (a.size, a.size):
            raise ContractViolation("thresholds and correlation matrix must have matching dimension")
        if not np.allclose(S, S.T, atol=1e-12):
            raise ContractViolation("correlation matrix must be symmetric")
        if not np.allclose(np.diag(S), 1.0, atol=1e-12):
            raise ContractViolation("correlation matrix must have a unit diagonal")
        if np.any(np.abs(S) > 1.0 + 1e-12):
            raise ContractViolation("correlations must lie in [-1, 1]")
        self.a = a
        self.sigma = S
        self._factor: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def factor(self) -> np.ndarray:
        """Lower-triangular L with L L' = Sigma, cached per parameter set."""
        if self._factor is None:
            try:
                self._factor = np.linalg.cholesky(self.sigma)
            except np.linalg.LinAlgError:
                # The eigenvalue repair can leave Sigma singular to machine
                # precision; a hair of diagonal jitter restores factorability.
                try:
                    self._factor = np.linalg.cholesky(self.sigma + 1e-10 * np.eye(self.dim))
                except np.linalg.LinAlgError as exc:
                    raise InvalidParamsError("correlation matrix could not be factorized") from exc
        return self._factor


def repair_correlation(sigma: np.ndarray) -> np.ndarray:
    """Evenly lower the local correlations until positive definite.

    Replaces Sigma by (Sigma + |l| I) / (1 + |l|) with l the smallest
    eigenvalue, which preserves the unit diagonal.  No-op when the matrix is
    already comfortably positive definite.
    """
    lam = float(np.linalg.eigvalsh(sigma)[0])
    if lam > PD_EPS:
        return sigma
    out = (sigma + abs(lam) * np.eye(sigma.shape[0])) / (1.0 + abs(lam))
    np.fill_diagonal(out, 1.0)
    return out


def copula_fit(
    sample: WeightedSample,
    sigma_init: np.ndarray | None = None,
    delta_newton: float = NEWTON_DELTA,
    max_iter: int = NEWTON_MAX_ITER,
    eps_clip: float | None = None,
    corr_screen: float = CORR_SCREEN,
) -> GaussianCopulaParams:
    """Method-of-moments fit of the dichotomized Gaussian.

    Thresholds come from the univariate quantile of the clamped means.  Each
    retained pairwise correlation solves Phi2(a_i, a_j; s) = second moment by
    Newton steps, switching to bisection on [-1 + 1e-8, 1 - 1e-8] whenever a
    step leaves [-1, 1] or the density underflows.  Pairs whose weighted
    sample correlation is below corr_screen are fixed at zero, mirroring the
    predictor screening of the logistic fit.
    """
    n, d = sample.n, sample.dim
    if eps_clip is None:
        eps_clip = default_clip(n)
    xbar = np.clip(sample.means(), eps_clip, 1.0 - eps_clip)
    xij = sample.second_moments()
    corr = sample.correlations()
    a = ndtri(xbar)
    S = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            if abs(corr[i, j]) < corr_screen:
                continue
            start = 0.0
            if sigma_init is not None and -1.0 < sigma_init[i, j] < 1.0:
                start = float(sigma_init[i, j])
            s = _solve_pair_correlation(a[i], a[j], xij[i, j], start, delta_newton, max_iter)
            S[i, j] = S[j, i] = s
    S = repair_correlation(S)
    return GaussianCopulaParams(a, S)


def _solve_pair_correlation(ai, aj, target, start, delta, max_iter) -> float:
    """Solve Phi2(ai, aj; s) = target for s; Newton with bisection fallback."""
    s = start
    for _ in range(max_iter):
        dens = bvn_density(ai, aj, s)
        if dens < 1e-12:
            break
        step = (phi2(ai, aj, s) - target) / dens
        s_new = s - step
        if not -1.0 <= s_new <= 1.0:
            break
        if abs(s_new - s) < delta:
            return s_new
        s = s_new
    lo, hi = -1.0 + 1e-8, 1.0 - 1e-8
    if phi2(ai, aj, lo) - target >= 0.0:
        return lo
    if phi2(ai, aj, hi) - target <= 0.0:
        return hi
    while hi - lo > delta:
        mid = 0.5 * (lo + hi)
        if phi2(ai, aj, mid) - target < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def copula_sample_many(params: GaussianCopulaParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws by thresholding correlated normals; no mass is returned."""
    L = params.factor()
    V = rng.standard_normal((n, params.dim)) @ L.T
    return (V <= params.a).astype(np.uint8)


def copula_sample(params: GaussianCopulaParams, rng: np.random.Generator) -> np.ndarray:
    return copula_sample_many(params, 1, rng)[0]


# ---------------------------------------------------------------------------
# Debug dump

FamilyParams = ProductParams | LogisticConditionalsParams | GaussianCopulaParams


def dump_params(params: FamilyParams) -> str:
    """Text dump of fitted parameters, one matrix row per line."""

    def fmt(row):
        return " ".join(repr(float(v)) for v in np.atleast_1d(row))

    if isinstance(params, ProductParams):
        return "family=product\n" + fmt(params.m) + "\n"
    if isinstance(params, LogisticConditionalsParams):
        return "family=logistic\n" + "".join(fmt(r) + "\n" for r in params.A)
    if isinstance(params, GaussianCopulaParams):
        return "family=copula\n" + fmt(params.a) + "\n" + "".join(fmt(r) + "\n" for r in params.sigma)
    raise ContractViolation(f"unknown family parameter type: {type(params)!r}")
