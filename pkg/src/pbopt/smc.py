"""Sequential Monte Carlo optimization of pseudo-Boolean objectives.

One outer iteration fits a parametric family to the weighted particle
system, resamples, moves the particles with a Metropolis-Hastings kernel
invariant for the current associated distribution, solves for the next step
length and reweights.  The run ends when the particle diversity collapses,
when the fitted family has degenerated to fewer than d_star random
components (in which case the remaining subcube is solved exactly), or when
the step-length solver saturates twice in a row.
"""

from __future__ import annotations

import sys as _sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import families as fam
from . import objective as obj_mod
from . import sequences as seq
from .errors import ContractViolation
from .objective import QuadraticObjective
from .records import RunRecord

KERNELS = ("adaptive_logistic", "adaptive_product", "symmetric")


@dataclass
class ParticleSystem:
    """n binary particles with weights, cached objective values and rho."""

    X: np.ndarray
    w: np.ndarray
    fvals: np.ndarray
    rho: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass
class SmcConfig:
    n: int
    beta: float = 0.9
    zeta_star: float = 0.95
    zeta_delta_star: float = 0.01
    delta_term: float = 0.02
    d_star: int = 12
    move_batch: int | None = None  # None: 1 for adaptive kernels, 10 for symmetric
    kernel: str = "adaptive_logistic"
    flip_weights: tuple[float, ...] | None = None  # symmetric kernel; None = single flip
    seq: str = "tempered"
    seed: int = 0
    polish: bool = False
    verbose: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ContractViolation("particle count must be at least 2")
        if not 0.0 < self.beta < 1.0:
            raise ContractViolation("beta must lie in (0, 1)")
        if not 0.0 < self.delta_term < self.zeta_star <= 1.0:
            raise ContractViolation("thresholds must satisfy 0 < delta_term < zeta_star <= 1")
        if self.move_batch is not None and self.move_batch < 1:
            raise ContractViolation("move_batch must be at least 1")
        if self.kernel not in KERNELS:
            raise ContractViolation(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.seq not in seq.KINDS:
            raise ContractViolation(f"unknown sequence kind {self.seq!r}")

    def effective_move_batch(self) -> int:
        if self.move_batch is not None:
            return self.move_batch
        return 10 if self.kernel == "symmetric" else 1


@dataclass
class MoveStats:
    steps_taken: int
    mean_acceptance: float
    final_diversity: float


def particle_diversity(X: np.ndarray) -> float:
    """Fraction of distinct particles, via hashing of the bit patterns."""
    n = X.shape[0]
    rows = np.ascontiguousarray(X)
    return len({rows[k].tobytes() for k in range(n)}) / n


def init_system(obj: QuadraticObjective, cfg: SmcConfig, rng: np.random.Generator) -> ParticleSystem:
    """n iid uniform particles with uniform weights at rho = 0."""
    X = rng.integers(0, 2, size=(cfg.n, obj.dim), dtype=np.uint8)
    fvals = obj_mod.evaluate_many(obj, X)
    return ParticleSystem(X=X, w=np.full(cfg.n, 1.0 / cfg.n), fvals=fvals, rho=0.0)


def resample_systematic(sys: ParticleSystem, rng: np.random.Generator) -> ParticleSystem:
    """Single-uniform systematic resampling; E[copies of x_k] = n w_k.

    Cached objective values are carried over, no re-evaluation happens.
    """
    n = sys.n
    cum = np.cumsum(n * sys.w)
    positions = rng.random() + np.arange(n)
    idx = np.searchsorted(cum, positions, side="left")
    idx = np.minimum(idx, n - 1)
    return ParticleSystem(
        X=sys.X[idx].copy(),
        w=np.full(n, 1.0 / n),
        fvals=sys.fvals[idx].copy(),
        rho=sys.rho,
    )


def _acceptance_log_ratio(kind: seq.SequenceKind, f_cur, f_prop, rho) -> np.ndarray:
    """log pi~(proposal) - log pi~(current), with level-set corner cases."""
    lt_cur = seq.log_target(kind, f_cur, rho)
    lt_prop = seq.log_target(kind, f_prop, rho)
    with np.errstate(invalid="ignore"):
        diff = lt_prop - lt_cur
    # Proposal and current state both outside the support: stay put.
    diff = np.where(np.isnan(diff), -np.inf, diff)
    return diff


def mh_step_independent(
    obj: QuadraticObjective,
    sys: ParticleSystem,
    params,
    kind: seq.SequenceKind,
    rng: np.random.Generator,
) -> tuple[ParticleSystem, MoveStats]:
    """One Metropolis-Hastings sweep with an independent family proposal.

    Requires a family with pointwise log mass, i.e. product or logistic
    conditionals; the Gaussian copula cannot be used here.
    """
    if isinstance(params, fam.ProductParams):
        Y, logq_y = fam.product_sample_many(params, sys.n, rng)
        logq_x = fam.product_logpmf_many(params, sys.X)
    elif isinstance(params, fam.LogisticConditionalsParams):
        Y, logq_y = fam.logistic_sample_many(params, sys.n, rng)
        logq_x = fam.logistic_logpmf_many(params, sys.X)
    else:
        raise ContractViolation("independent kernel needs a family with pointwise mass (product or logistic)")
    f_y = obj_mod.evaluate_many(obj, Y)
    log_ratio = _acceptance_log_ratio(kind, sys.fvals, f_y, sys.rho) + logq_x - logq_y
    acc_prob = np.exp(np.minimum(0.0, log_ratio))
    accept = rng.random(sys.n) < acc_prob
    X = sys.X.copy()
    X[accept] = Y[accept]
    fvals = np.where(accept, f_y, sys.fvals)
    new_sys = ParticleSystem(X=X, w=sys.w, fvals=fvals, rho=sys.rho)
    return new_sys, MoveStats(1, float(acc_prob.mean()), float("nan"))


def mh_step_symmetric(
    obj: QuadraticObjective,
    sys: ParticleSystem,
    p: np.ndarray,
    kind: seq.SequenceKind,
    rng: np.random.Generator,
) -> tuple[ParticleSystem, MoveStats]:
    """One sweep of the symmetric k-neighborhood kernel.

    Each particle draws a flip order k from p and a uniform k-subset of
    positions.  Single flips use the O(d) incremental delta; larger flips
    fall back to full evaluation.  The proposal is symmetric, so the
    acceptance ratio reduces to the target ratio.
    """
    p = np.asarray(p, dtype=np.float64)
    n, d = sys.n, sys.dim
    if p.shape != (d,) or abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise ContractViolation("flip-order weights must be a length-d probability vector")
    ks = np.searchsorted(np.cumsum(p), rng.random(n), side="right") + 1
    ks = np.minimum(ks, d)
    single = ks == 1
    X = sys.X
    Xf = X.astype(np.float64)
    deltas = np.zeros(n)
    flip_single = np.zeros(n, dtype=np.int64)
    if single.any():
        rows = np.flatnonzero(single)
        idx = rng.integers(0, d, size=rows.size)
        flip_single[rows] = idx
        Fi = obj.coeffs[idx]
        diag = obj.coeffs[idx, idx]
        xi = Xf[rows, idx]
        t = np.einsum("ij,ij->i", Fi, Xf[rows])
        s = 2.0 * (t - diag * xi) + diag
        deltas[rows] = (1.0 - 2.0 * xi) * s
    multi_rows = np.flatnonzero(~single)
    Y_multi = None
    if multi_rows.size:
        ranks = np.argsort(rng.random((multi_rows.size, d)), axis=1)
        mask = ranks < ks[multi_rows][:, None]
        Y_multi = X[multi_rows] ^ mask.astype(np.uint8)
        f_multi = obj_mod.evaluate_many(obj, Y_multi)
        deltas[multi_rows] = f_multi - sys.fvals[multi_rows]
    f_prop = sys.fvals + deltas
    log_ratio = _acceptance_log_ratio(kind, sys.fvals, f_prop, sys.rho)
    acc_prob = np.exp(np.minimum(0.0, log_ratio))
    accept = rng.random(n) < acc_prob
    X_new = X.copy()
    rows = np.flatnonzero(single & accept)
    X_new[rows, flip_single[rows]] ^= 1
    if multi_rows.size:
        acc_multi = accept[multi_rows]
        X_new[multi_rows[acc_multi]] = Y_multi[acc_multi]
    fvals = np.where(accept, f_prop, sys.fvals)
    new_sys = ParticleSystem(X=X_new, w=sys.w, fvals=fvals, rho=sys.rho)
    return new_sys, MoveStats(1, float(acc_prob.mean()), float("nan"))


def move(
    sys: ParticleSystem,
    step,
    cfg: SmcConfig,
    rng: np.random.Generator,
) -> tuple[ParticleSystem, MoveStats]:
    """Apply batches of kernel sweeps until the diversity stalls.

    Stops as soon as the diversity exceeds zeta_star or a whole batch gains
    less than zeta_delta_star; at least one batch always runs.
    """
    batch = cfg.effective_move_batch()
    zeta_prev = particle_diversity(sys.X)
    steps = 0
    acc_sum = 0.0
    while True:
        for _ in range(batch):
            sys, stats = step(sys, rng)
            steps += 1
            acc_sum += stats.mean_acceptance
        zeta = particle_diversity(sys.X)
        if zeta > cfg.zeta_star or (zeta - zeta_prev) < cfg.zeta_delta_star:
            break
        zeta_prev = zeta
    return sys, MoveStats(steps, acc_sum / steps, zeta)


def _pin_and_enumerate(obj, free, xbar):
    """Solve the subproblem over the free components exactly.

    Non-free components are pinned at the rounded weighted marginal; the
    enumeration cost in objective evaluations is returned alongside.
    """
    pinned = np.round(xbar).astype(np.uint8)
    if not free.any():
        x = pinned
        return x, obj_mod.evaluate(obj, x), 1
    sub, const = obj_mod.restrict(obj, free, pinned)
    bx, bv = obj_mod.exhaustive_argmax(sub)
    x = pinned.copy()
    x[free] = bx
    return x, bv + const, 1 << int(free.sum())


def smc_optimize(obj: QuadraticObjective, cfg: SmcConfig, algorithm: str | None = None, problem: str = "") -> RunRecord:
    """Run the full sequential Monte Carlo optimizer and return the best particle seen."""
    if algorithm is None:
        algorithm = "smc-local" if cfg.kernel == "symmetric" else "smc"
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    system = init_system(obj, cfg, rng)
    evaluations = system.n
    best_idx = int(np.argmax(system.fvals))
    best_f = float(system.fvals[best_idx])
    best_x = system.X[best_idx].copy()
    clip = fam.default_clip(cfg.n)
    adaptive = cfg.kernel != "symmetric"
    flip_weights = None
    if not adaptive:
        flip_weights = np.zeros(obj.dim)
        if cfg.flip_weights is None:
            flip_weights[0] = 1.0
        else:
            fw = np.asarray(cfg.flip_weights, dtype=np.float64)
            if fw.size > obj.dim:
                raise ContractViolation("flip_weights cannot have more entries than the dimension")
            flip_weights[: fw.size] = fw
            flip_weights /= flip_weights.sum()
    prev_logistic = None
    saturation_streak = 0
    iterations = 0

    while True:
        iterations += 1
        kind = seq.SequenceKind(cfg.seq, fstar=best_f)
        # Fit the proposal family to the current weighted system and test
        # for degeneracy of its random components.
        if adaptive:
            xbar = system.w @ system.X.astype(np.float64)
            free = (xbar > clip) & (xbar < 1.0 - clip)
            if int(free.sum()) < cfg.d_star:
                x, val, cost = _pin_and_enumerate(obj, free, xbar)
                evaluations += cost
                if val > best_f:
                    best_f, best_x = float(val), x
                break
            wsample = fam.WeightedSample(system.X, system.w)
            if cfg.kernel == "adaptive_logistic":
                params = fam.logistic_fit(wsample, a_init=prev_logistic, eps_clip=clip)
                prev_logistic = params
            else:
                params = fam.product_fit(wsample, eps_clip=clip)
            step = lambda s, r, p=params, k=kind: mh_step_independent(obj, s, p, k, r)
        else:
            step = lambda s, r, k=kind: mh_step_symmetric(obj, s, flip_weights, k, r)

        system = resample_systematic(system, rng)
        system, mstats = move(system, step, cfg, rng)
        evaluations += mstats.steps_taken * system.n

        it_best = int(np.argmax(system.fvals))
        if system.fvals[it_best] > best_f:
            best_f = float(system.fvals[it_best])
            best_x = system.X[it_best].copy()
            kind = seq.SequenceKind(cfg.seq, fstar=best_f)

        result = seq.find_step_length(kind, system.w, system.fvals, system.rho, cfg.beta)
        saturation_streak = saturation_streak + 1 if result.saturated else 0
        system = ParticleSystem(X=system.X, w=result.w_new, fvals=system.fvals, rho=system.rho + result.alpha)

        if cfg.verbose:
            print(
                f"{iterations}\t{system.rho:.6g}\t{result.ess_new:.4f}\t{mstats.final_diversity:.4f}"
                f"\t{mstats.mean_acceptance:.4f}\t{best_f:.8g}",
                file=_sys.stderr,
            )
        if mstats.final_diversity <= cfg.delta_term:
            break
        if saturation_streak >= 2:
            break

    if cfg.polish:
        best_x, best_f, cost = obj_mod.ascend_1opt(obj, best_x, best_f)
        evaluations += cost

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
