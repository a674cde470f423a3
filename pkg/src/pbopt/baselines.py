"""Comparison optimizers: cross-entropy method, simulated annealing, k-opt search.

All three are driven by the same quadratic objective machinery as the
sequential Monte Carlo sampler and return the same RunRecord shape, so the
benchmark harness can mix them freely.
"""

from __future__ import annotations

import itertools
import math
import sys as _sys
import time
from dataclasses import dataclass

import numpy as np

from . import families as fam
from . import objective as obj_mod
from .errors import ContractViolation
from .objective import QuadraticObjective
from .records import RunRecord

FAMILIES = ("product", "logistic", "copula")


# ---------------------------------------------------------------------------
# Cross-entropy method


@dataclass
class CeConfig:
    n: int
    beta: float = 0.8  # fraction discarded; elite fraction is 1 - beta
    tau: float = 0.5  # lag blending the previous parameter into the new fit
    family: str = "logistic"
    max_iters: int = 1000
    stagnation_limit: int = 30
    d_star: int = 12
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ContractViolation("particle count must be at least 2")
        if not 0.0 < self.beta < 1.0:
            raise ContractViolation("beta must lie in (0, 1)")
        if not 0.0 <= self.tau < 1.0:
            raise ContractViolation("tau must lie in [0, 1)")
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown family {self.family!r}; expected one of {FAMILIES}")

    def elite_size(self) -> int:
        return max(1, math.ceil(self.n * (1.0 - self.beta)))


def blend_params(prev, fitted, tau: float):
    """Convex combination (1 - tau) * fitted + tau * prev, componentwise.

    Blended copula correlation matrices are repaired again since convexity
    of the parametrization does not guarantee positive definiteness.
    """
    if type(prev) is not type(fitted):
        raise ContractViolation("blend requires parameters of the same family kind")
    if tau == 0.0:
        return fitted
    if isinstance(prev, fam.ProductParams):
        if prev.dim != fitted.dim:
            raise ContractViolation("blend requires matching dimensions")
        return fam.ProductParams((1.0 - tau) * fitted.m + tau * prev.m)
    if isinstance(prev, fam.LogisticConditionalsParams):
        if prev.dim != fitted.dim:
            raise ContractViolation("blend requires matching dimensions")
        return fam.LogisticConditionalsParams((1.0 - tau) * fitted.A + tau * prev.A)
    if isinstance(prev, fam.GaussianCopulaParams):
        if prev.dim != fitted.dim:
            raise ContractViolation("blend requires matching dimensions")
        a = (1.0 - tau) * fitted.a + tau * prev.a
        sigma = fam.repair_correlation((1.0 - tau) * fitted.sigma + tau * prev.sigma)
        return fam.GaussianCopulaParams(a, sigma)
    raise ContractViolation(f"unknown family parameter type: {type(prev)!r}")


def _uniform_family(family: str, d: int):
    if family == "product":
        return fam.ProductParams(np.full(d, 0.5))
    if family == "logistic":
        return fam.LogisticConditionalsParams(np.zeros((d, d)))
    return fam.GaussianCopulaParams(np.zeros(d), np.eye(d))


def _sample_family(params, n, rng):
    if isinstance(params, fam.ProductParams):
        return fam.product_sample_many(params, n, rng)[0]
    if isinstance(params, fam.LogisticConditionalsParams):
        return fam.logistic_sample_many(params, n, rng)[0]
    return fam.copula_sample_many(params, n, rng)


def _fit_family(family, elite_sample, prev, clip):
    if family == "product":
        return fam.product_fit(elite_sample, eps_clip=clip)
    if family == "logistic":
        return fam.logistic_fit(elite_sample, a_init=prev, eps_clip=clip)
    return fam.copula_fit(elite_sample, sigma_init=prev.sigma, eps_clip=clip)


def ce_optimize(obj: QuadraticObjective, cfg: CeConfig, algorithm: str = "ce", problem: str = "") -> RunRecord:
    """Cross-entropy optimization: sample, keep the elite, refit, blend, repeat.

    Stops when the fitted family has degenerated to fewer than d_star random
    components (the remaining subcube is then solved exactly), when the best
    value has stagnated for stagnation_limit iterations, or at max_iters.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    d = obj.dim
    theta = _uniform_family(cfg.family, d)
    clip = fam.default_clip(cfg.n)
    m = cfg.elite_size()
    best_f = -math.inf
    best_x = np.zeros(d, dtype=np.uint8)
    evaluations = 0
    stagnant = 0
    iterations = 0
    for _ in range(cfg.max_iters):
        iterations += 1
        Y = _sample_family(theta, cfg.n, rng)
        f = obj_mod.evaluate_many(obj, Y)
        evaluations += cfg.n
        it_best = int(np.argmax(f))
        if f[it_best] > best_f:
            best_f = float(f[it_best])
            best_x = Y[it_best].copy()
            stagnant = 0
        else:
            stagnant += 1
        order = np.lexsort((np.arange(cfg.n), -f))
        elite = Y[order[:m]]
        xbar = elite.mean(axis=0)
        free = (xbar > clip) & (xbar < 1.0 - clip)
        if int(free.sum()) < cfg.d_star:
            pinned = np.round(xbar).astype(np.uint8)
            if free.any():
                sub, const = obj_mod.restrict(obj, free, pinned)
                bx, bv = obj_mod.exhaustive_argmax(sub)
                cand = pinned.copy()
                cand[free] = bx
                cand_f = bv + const
                evaluations += 1 << int(free.sum())
            else:
                cand = pinned
                cand_f = obj_mod.evaluate(obj, cand)
                evaluations += 1
            if cand_f > best_f:
                best_f, best_x = float(cand_f), cand
            break
        fitted = _fit_family(cfg.family, fam.WeightedSample.uniform(elite), theta, clip)
        theta = blend_params(theta, fitted, cfg.tau)
        if cfg.verbose:
            print(f"{iterations}\t{m}\t{best_f:.8g}", file=_sys.stderr)
        if stagnant >= cfg.stagnation_limit:
            break
    return RunRecord(
        algorithm=algorithm,
        problem=problem,
        seed=cfg.seed,
        best_x=tuple(int(b) for b in best_x),
        best_f=best_f,
        evaluations=evaluations,
        wall_seconds=time.perf_counter() - t0,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Simulated annealing


@dataclass
class SaConfig:
    budget: int | None = None  # evaluation budget
    budget_seconds: float | None = None  # wall-clock budget (alternative)
    window: int = 500
    gain: float = 0.01
    rho0: float = 1e-6
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.budget is None and self.budget_seconds is None:
            raise ContractViolation("either an evaluation or a wall-clock budget is required")
        if self.budget is not None and self.budget <= 0:
            raise ContractViolation("evaluation budget must be positive")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ContractViolation("wall-clock budget must be positive")
        if self.window < 1:
            raise ContractViolation("acceptance window must be at least 1")


def sa_schedule_target(progress: float) -> float:
    """Target windowed acceptance rate (1 + u)^-5 for normalized progress u."""
    return (1.0 + progress) ** -5


def sa_optimize(
    obj: QuadraticObjective, cfg: SaConfig, algorithm: str = "sa", problem: str = "", _trace=None
) -> RunRecord:
    """Single-chain annealing with uniform single-flip proposals.

    The inverse temperature follows a multiplicative controller
    rho <- rho * exp(gain * (windowed acceptance - target)) that steers the
    windowed mean acceptance probability onto the schedule target.  The
    window statistic averages acceptance probabilities, not realized
    accept/reject outcomes, which removes binomial noise from the control
    signal.  `_trace`, when given, collects (delta, rho, u, accepted) per
    step for test instrumentation.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    d = obj.dim
    F = obj.coeffs
    diag = np.diag(F).copy()
    x = rng.integers(0, 2, size=d, dtype=np.uint8)
    fx = obj_mod.evaluate(obj, x)
    g = F @ x.astype(np.float64)
    best_f, best_x = fx, x.copy()
    rho = cfg.rho0
    window = np.zeros(cfg.window)
    win_sum = 0.0
    win_count = 0
    evals = 0
    wall_mode = cfg.budget is None
    block = 8192

    def progress():
        if wall_mode:
            return min(1.0, (time.perf_counter() - t0) / cfg.budget_seconds)
        return evals / cfg.budget

    while True:
        if wall_mode:
            if time.perf_counter() - t0 >= cfg.budget_seconds:
                break
            steps = block
        else:
            steps = min(block, cfg.budget - evals)
            if steps <= 0:
                break
        idx = rng.integers(0, d, size=steps)
        us = rng.random(steps)
        for t in range(steps):
            i = idx[t]
            xi = x[i]
            s = 2.0 * (g[i] - diag[i] * xi) + diag[i]
            delta = s if xi == 0 else -s
            z = rho * delta
            lam = 1.0 if z >= 0.0 else (math.exp(z) if z > -700.0 else 0.0)
            accepted = us[t] < lam
            if accepted:
                fx += delta
                g += F[i] if xi == 0 else -F[i]
                x[i] ^= 1
                if fx > best_f:
                    best_f = fx
                    best_x = x.copy()
            evals += 1
            slot = (evals - 1) % cfg.window
            if win_count < cfg.window:
                win_count += 1
            else:
                win_sum -= window[slot]
            window[slot] = lam
            win_sum += lam
            lam_bar = win_sum / win_count
            target = sa_schedule_target(progress())
            rho *= math.exp(cfg.gain * (lam_bar - target))
            if _trace is not None:
                _trace.append((delta, rho, us[t], accepted))
        if cfg.verbose:
            print(f"{evals}\t{rho:.6g}\t{best_f:.8g}", file=_sys.stderr)
    return RunRecord(
        algorithm=algorithm,
        problem=problem,
        seed=cfg.seed,
        best_x=tuple(int(b) for b in best_x),
        best_f=float(best_f),
        evaluations=evals,
        wall_seconds=time.perf_counter() - t0,
        iterations=evals,
    )


# ---------------------------------------------------------------------------
# Randomized k-opt local search


@dataclass
class LsConfig:
    budget: int
    k: int = 1
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.budget <= 0:
            raise ContractViolation("evaluation budget must be positive")
        if self.k < 1:
            raise ContractViolation("neighborhood order k must be at least 1")


def _best_neighbor(obj, x, g, k):
    """Best strictly-improving move within Hamming distance <= k.

    Returns (flip index tuple, delta, candidates scanned) or (None, 0, m).
    Ties resolve to single flips first, then lexicographically smallest
    index tuples, to keep descents deterministic.
    """
    d = obj.dim
    deltas = obj_mod.flip_deltas_all(obj, x, g)
    scanned = d
    best_flip = None
    best_delta = 0.0
    j = int(np.argmax(deltas))
    if deltas[j] > best_delta:
        best_flip, best_delta = (j,), float(deltas[j])
    if k >= 2:
        sign = 1.0 - 2.0 * x.astype(np.float64)
        pair = deltas[:, None] + deltas[None, :] + 2.0 * obj.coeffs * np.outer(sign, sign)
        iu = np.triu_indices(d, k=1)
        scanned += iu[0].size
        vals = pair[iu]
        jj = int(np.argmax(vals))
        if vals[jj] > best_delta:
            best_flip, best_delta = (int(iu[0][jj]), int(iu[1][jj])), float(vals[jj])
    if k >= 3:
        # Higher orders are scanned combinatorially; practical only for small d.
        base = obj_mod.evaluate(obj, x)
        for order in range(3, k + 1):
            for combo in itertools.combinations(range(d), order):
                y = x.copy()
                y[list(combo)] ^= 1
                delta = obj_mod.evaluate(obj, y) - base
                scanned += 1
                if delta > best_delta:
                    best_flip, best_delta = combo, float(delta)
    return best_flip, best_delta, scanned


def local_search_kopt(obj: QuadraticObjective, cfg: LsConfig, algorithm: str = "ls", problem: str = "") -> RunRecord:
    """Multi-restart best-improvement ascent over the k-neighborhood.

    Each restart ascends from a uniform starting point until no move within
    Hamming distance <= k strictly improves the objective; the budget is
    checked between restarts, so the final ascent may overshoot slightly.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    best_f = -math.inf
    best_x = np.zeros(obj.dim, dtype=np.uint8)
    evals = 0
    restarts = 0
    while evals < cfg.budget:
        restarts += 1
        x = rng.integers(0, 2, size=obj.dim, dtype=np.uint8)
        fx = obj_mod.evaluate(obj, x)
        g = obj.coeffs @ x.astype(np.float64)
        evals += 1
        while True:
            flip, delta, scanned = _best_neighbor(obj, x, g, cfg.k)
            evals += scanned
            if flip is None:
                break
            for i in flip:
                g += (1.0 - 2.0 * x[i]) * obj.coeffs[i]
                x[i] ^= 1
            fx += delta
        if fx > best_f:
            best_f = float(fx)
            best_x = x.copy()
        if cfg.verbose:
            print(f"{restarts}\t{evals}\t{best_f:.8g}", file=_sys.stderr)
    return RunRecord(
        algorithm=algorithm,
        problem=problem,
        seed=cfg.seed,
        best_x=tuple(int(b) for b in best_x),
        best_f=best_f,
        evaluations=evals,
        wall_seconds=time.perf_counter() - t0,
        iterations=restarts,
    )
