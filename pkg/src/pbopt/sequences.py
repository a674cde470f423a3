"""Associated distribution sequences and importance-weight machinery.

Three one-parameter sequences interpolate between the uniform distribution
(rho = 0) and the uniform distribution on the set of maximizers
(rho -> infinity):

* tempered            pi_rho(x) proportional to exp(rho f(x))
* level_set           uniform on {x : f(x) >= fstar - 1/rho}
* logistic_potential  pi_rho(x) proportional to l(rho (f(x) - fstar))

Since the global maximum f(x*) is unknown at run time, the level-set and
logistic-potential sequences plug in the best objective value observed so
far (SequenceKind.fstar), updated monotonically by the callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateWeightsError, DomainError, GuardError
from .families import log_sigmoid

KINDS = ("tempered", "level_set", "logistic_potential")

STEP_TOL = 1e-8
BISECT_MAX_ITER = 200
ENUMERATION_GUARD_DIM = 20


@dataclass(frozen=True)
class SequenceKind:
    tag: str
    fstar: float = 0.0

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ContractViolation(f"unknown sequence kind {self.tag!r}; expected one of {KINDS}")
        if not math.isfinite(self.fstar):
            raise ContractViolation("fstar must be finite")


@dataclass(frozen=True)
class StepResult:
    alpha: float
    w_new: np.ndarray
    ess_new: float
    saturated: bool = False


def default_alpha_max(rho: float) -> float:
    return 100.0 * (rho + 1.0)


def log_target(kind: SequenceKind, fvals: np.ndarray, rho: float) -> np.ndarray:
    """Unnormalized log mass of pi_rho at states with the given objective values."""
    f = np.asarray(fvals, dtype=np.float64)
    if rho < 0:
        raise DomainError(f"sequence parameter must be nonnegative, got {rho!r}")
    if kind.tag == "tempered":
        return rho * f
    if kind.tag == "level_set":
        if rho == 0.0:
            return np.zeros_like(f)
        return np.where(f >= kind.fstar - 1.0 / rho, 0.0, -np.inf)
    return log_sigmoid(rho * (f - kind.fstar))


def log_weight_update(kind: SequenceKind, fvals: np.ndarray, rho: float, alpha: float) -> np.ndarray:
    """Log of the incremental importance weights moving from rho to rho + alpha."""
    f = np.asarray(fvals, dtype=np.float64)
    if alpha < 0:
        raise ContractViolation(f"step length must be nonnegative, got {alpha!r}")
    if kind.tag == "tempered":
        return alpha * f
    if kind.tag == "level_set":
        if rho + alpha <= 0.0:
            raise DomainError("level-set update requires rho + alpha > 0")
        return np.where(f >= kind.fstar - 1.0 / (rho + alpha), 0.0, -np.inf)
    return log_sigmoid((rho + alpha) * (f - kind.fstar)) - log_sigmoid(rho * (f - kind.fstar))


def reweight(w: np.ndarray, log_u: np.ndarray) -> np.ndarray:
    """w'_k proportional to w_k exp(log_u_k), with max-subtraction for safety."""
    w = np.asarray(w, dtype=np.float64)
    log_u = np.asarray(log_u, dtype=np.float64)
    live = (w > 0) & (log_u > -np.inf)
    if not live.any():
        raise DegenerateWeightsError("reweighting annihilated every particle")
    shift = log_u[live].max()
    u = np.where(live, w * np.exp(np.where(live, log_u - shift, 0.0)), 0.0)
    total = u.sum()
    if total <= 0.0 or not math.isfinite(total):
        raise DegenerateWeightsError("reweighting annihilated every particle")
    return u / total


def ess(w: np.ndarray) -> float:
    """Effective sample size [n sum w_k^2]^-1, in [1/n, 1]."""
    w = np.asarray(w, dtype=np.float64)
    return float(1.0 / (w.size * (w @ w)))


def find_step_length(
    kind: SequenceKind,
    w: np.ndarray,
    fvals: np.ndarray,
    rho: float,
    beta: float,
    alpha_max: float | None = None,
    tol: float = STEP_TOL,
) -> StepResult:
    """Step length alpha lowering the effective sample size by the ratio beta.

    For the tempered and logistic-potential sequences the ESS after
    reweighting is continuous and decreasing in alpha, so the equation is
    solved by bisection on [0, alpha_max].  For the level-set sequence the
    ESS is a step function of alpha; the solver instead keeps the smallest
    super-level set holding at least a beta-fraction of the current ESS,
    breaking ties at the boundary value by ascending particle index.

    If alpha_max cannot reduce the ESS to the target (e.g. all objective
    values equal), the result carries alpha_max and the saturated flag.
    """
    if not 0.0 < beta < 1.0:
        raise ContractViolation(f"beta must lie in (0, 1), got {beta!r}")
    w = np.asarray(w, dtype=np.float64)
    f = np.asarray(fvals, dtype=np.float64)
    if alpha_max is None:
        alpha_max = default_alpha_max(rho)
    if alpha_max <= 0:
        raise ContractViolation("alpha_max must be positive")
    if kind.tag == "level_set":
        return _step_level_set(kind, w, f, rho, beta, alpha_max, tol)
    return _step_bisection(kind, w, f, rho, beta, alpha_max, tol)


def _step_bisection(kind, w, f, rho, beta, alpha_max, tol) -> StepResult:
    target = beta * ess(w)

    def ess_at(alpha):
        return ess(reweight(w, log_weight_update(kind, f, rho, alpha)))

    if ess_at(alpha_max) > target + tol:
        w_new = reweight(w, log_weight_update(kind, f, rho, alpha_max))
        return StepResult(alpha_max, w_new, ess(w_new), saturated=True)
    lo, hi = 0.0, alpha_max
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        val = ess_at(mid)
        if abs(val - target) <= tol:
            lo = hi = mid
            break
        if val > target:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    w_new = reweight(w, log_weight_update(kind, f, rho, alpha))
    return StepResult(alpha, w_new, ess(w_new), saturated=False)


def _step_level_set(kind, w, f, rho, beta, alpha_max, tol) -> StepResult:
    n = w.size
    target = beta * ess(w)
    order = np.lexsort((np.arange(n), -f))
    cw = w[order]
    s1 = np.cumsum(cw)
    s2 = np.cumsum(cw * cw)
    with np.errstate(invalid="ignore", divide="ignore"):
        ess_prefix = np.where(s2 > 0, s1 * s1 / (n * s2), 0.0)
    hits = np.flatnonzero(ess_prefix >= target)
    m = int(hits[0]) + 1 if hits.size else n
    keep = order[:m]
    mask = np.zeros(n, dtype=bool)
    mask[keep] = True
    w_new = np.where(mask, w, 0.0)
    w_new /= w_new.sum()
    boundary = f[order[m - 1]]
    if boundary >= kind.fstar:
        return StepResult(alpha_max, w_new, ess(w_new), saturated=True)
    alpha = 1.0 / (kind.fstar - boundary) - rho
    alpha = min(max(alpha, tol), alpha_max)
    return StepResult(alpha, w_new, ess(w_new), saturated=False)


def expected_diversity(pmf: np.ndarray, n: int) -> float:
    """Expected fraction of distinct states in an n-sample from pi.

    `pmf` is the full enumeration of pi over {0,1}^d.  Finds the smallest
    c with sum(floor(c pi(x))) >= n by bisection and returns
    min(1, count{x : c pi(x) >= 1} / n).
    """
    p = np.asarray(pmf, dtype=np.float64)
    if p.ndim != 1:
        raise ContractViolation("pmf must be a flat enumeration vector")
    if p.size > (1 << ENUMERATION_GUARD_DIM):
        raise GuardError(f"enumeration limited to 2^{ENUMERATION_GUARD_DIM} states, got {p.size}")
    if n < 1:
        raise ContractViolation("sample size must be at least 1")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ContractViolation("pmf must be nonnegative and sum to 1")
    pos = p[p > 0]

    def count(c):
        return np.floor(c * pos * (1.0 + 1e-12) + 1e-12).sum()

    lo, hi = 0.0, float(n + pos.size)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if count(mid) >= n:
            hi = mid
        else:
            lo = mid
    c_n = hi
    covered = int(np.sum(c_n * pos * (1.0 + 1e-9) >= 1.0))
    return min(1.0, covered / n)
