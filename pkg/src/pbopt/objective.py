"""Quadratic pseudo-Boolean objectives f(x) = x'Fx on {0,1}^d.

The matrix F is stored dense and symmetric.  Besides plain evaluation the
module provides O(d) incremental deltas for single-bit flips, which is what
makes local moves and exhaustive Gray-code scans cheap, plus the closed-form
normalizer of the quadratic mass function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class QuadraticObjective:
    """Symmetric coefficient matrix defining f(x) = x'Fx.

    Non-symmetric matrices are rejected outright: every generator in this
    package emits symmetric F, so asymmetry signals a bug upstream.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.coeffs, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] < 1:
            raise ContractViolation(f"coefficient matrix must be square and non-empty, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise ContractViolation("coefficient matrix must contain only finite values")
        if not np.array_equal(F, F.T):
            raise ContractViolation("coefficient matrix must be symmetric")
        F = F.copy()
        F.flags.writeable = False
        object.__setattr__(self, "coeffs", F)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]


def as_bits(x, dim: int | None = None) -> np.ndarray:
    """Validate and convert a binary vector to a uint8 array."""
    b = np.asarray(x)
    if b.ndim != 1:
        raise ContractViolation(f"binary vector must be one-dimensional, got shape {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise ContractViolation(f"dimension mismatch: expected {dim}, got {b.shape[0]}")
    out = b.astype(np.uint8)
    if not np.array_equal(out, b):
        raise ContractViolation("binary vector entries must be 0 or 1")
    if np.any(out > 1):
        raise ContractViolation("binary vector entries must be 0 or 1")
    return out


def evaluate(obj: QuadraticObjective, x) -> float:
    """Return f(x) = x'Fx."""
    b = as_bits(x, obj.dim).astype(np.float64)
    return float(b @ obj.coeffs @ b)


def evaluate_many(obj: QuadraticObjective, X: np.ndarray) -> np.ndarray:
    """Row-wise f(x) for an (n, d) binary matrix."""
    if X.ndim != 2 or X.shape[1] != obj.dim:
        raise ContractViolation(f"particle matrix must be (n, {obj.dim}), got {X.shape}")
    Xf = X.astype(np.float64, copy=False)
    return np.einsum("ij,jk,ik->i", Xf, obj.coeffs, Xf)


def flip_delta(obj: QuadraticObjective, x, i: int, fx: float | None = None) -> float:
    """f(x with bit i flipped) - f(x), in O(d).

    `fx` is accepted for call-site symmetry with the consistency contract
    evaluate(flip(x, i)) == fx + flip_delta(...); it is not needed here.
    """
    b = as_bits(x, obj.dim)
    if not 0 <= i < obj.dim:
        raise ContractViolation(f"flip index {i} out of range for dimension {obj.dim}")
    row = obj.coeffs[i]
    s = 2.0 * (row @ b - row[i] * b[i]) + row[i]
    return float(s if b[i] == 0 else -s)


def flip_deltas_all(obj: QuadraticObjective, x: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
    """Vector of all d single-flip deltas; pass g = F @ x when cached."""
    diag = np.diag(obj.coeffs)
    xf = x.astype(np.float64, copy=False)
    if g is None:
        g = obj.coeffs @ xf
    s = 2.0 * (g - diag * xf) + diag
    return (1.0 - 2.0 * xf) * s


def quadratic_mass_normalizer(obj: QuadraticObjective) -> float:
    """Sum of x'Fx over all of {0,1}^d, i.e. 2^(d-2) * (1'F1 + tr F)."""
    F = obj.coeffs
    return float(2.0 ** (obj.dim - 2) * (F.sum() + np.trace(F)))


def exhaustive_argmax(obj: QuadraticObjective) -> tuple[np.ndarray, float]:
    """Exact maximizer of x'Fx by Gray-code enumeration.

    Maintains g = F @ x so every transition costs O(d).  Ties are broken by
    the lexicographically smallest vector.
    """
    d = obj.dim
    F = obj.coeffs
    diag = np.diag(F)
    x = np.zeros(d, dtype=np.uint8)
    g = np.zeros(d, dtype=np.float64)
    fx = 0.0
    best_val = 0.0
    best_key = x.tobytes()
    best_x = x.copy()
    for step in range(1, 1 << d):
        i = (step & -step).bit_length() - 1
        s = 2.0 * (g[i] - diag[i] * x[i]) + diag[i]
        if x[i] == 0:
            fx += s
            x[i] = 1
            g += F[i]
        else:
            fx -= s
            x[i] = 0
            g -= F[i]
        if fx > best_val:
            best_val = fx
            best_x = x.copy()
            best_key = x.tobytes()
        elif fx == best_val:
            key = x.tobytes()
            if key < best_key:
                best_x = x.copy()
                best_key = key
    return best_x, best_val


def restrict(obj: QuadraticObjective, free: np.ndarray, pinned_values: np.ndarray) -> tuple[QuadraticObjective, float]:
    """Restrict f to the subcube where the non-free bits are pinned.

    Returns a quadratic objective over the free bits plus the additive
    constant contributed by the pinned block.  The linear cross terms are
    folded into the diagonal (x_i^2 = x_i on binary vectors).
    """
    free = np.asarray(free, dtype=bool)
    if free.shape != (obj.dim,):
        raise ContractViolation("free mask must have one entry per component")
    if not free.any():
        raise ContractViolation("restriction requires at least one free component")
    pin = ~free
    xp = pinned_values[pin].astype(np.float64)
    F = obj.coeffs
    F_ff = F[np.ix_(free, free)].copy()
    cross = 2.0 * (F[np.ix_(free, pin)] @ xp)
    F_ff[np.diag_indices_from(F_ff)] += cross
    const = float(xp @ F[np.ix_(pin, pin)] @ xp)
    return QuadraticObjective(F_ff), const


def ascend_1opt(obj: QuadraticObjective, x: np.ndarray, fx: float) -> tuple[np.ndarray, float, int]:
    """Best-improvement single-flip ascent until a 1-opt local optimum.

    Returns (x, f(x), number of candidate deltas computed).
    """
    x = x.astype(np.uint8).copy()
    g = obj.coeffs @ x.astype(np.float64)
    evals = 0
    while True:
        deltas = flip_deltas_all(obj, x, g)
        evals += obj.dim
        j = int(np.argmax(deltas))
        if deltas[j] <= 0.0:
            return x, fx, evals
        fx += float(deltas[j])
        g += (1.0 - 2.0 * x[j]) * obj.coeffs[j]
        x[j] ^= 1
