"""Random test-problem generation and a portable text file format.

Four entry laws for the symmetric coefficient matrix:

* uniform(c)            integers uniform on [-c, c]
* shifted(c, tau)       integers uniform on [-c + tau, c + tau]
* density(c, omega)     uniform on [-c, c] with probability omega, else 0
* cauchy(c)             discretized Cauchy, mass proportional to
                        1 / (1 + (k/c)^2), truncated to |k| <= 10^4 c

The Cauchy law has heavy tails; its extreme entries are what makes the
resulting problems strongly multi-modal.  The shifted law is realized
constructively as uniform(c) + tau so the distributional identity
f_tau(x) = f_0(x) + tau |x|^2 holds exactly per seed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ContractViolation, ParseError, ValidationError
from .objective import QuadraticObjective

DISTS = ("uniform", "shifted", "density", "cauchy")
CAUCHY_TRUNCATION = 10_000  # support is [-CAUCHY_TRUNCATION*c, CAUCHY_TRUNCATION*c]


@dataclass(frozen=True)
class ProblemSpec:
    d: int
    dist: str
    c: int
    tau: int = 0
    omega: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ContractViolation("dimension must be at least 1")
        if self.dist not in DISTS:
            raise ContractViolation(f"unknown distribution {self.dist!r}; expected one of {DISTS}")
        if self.c < 1 or int(self.c) != self.c:
            raise ContractViolation("support parameter c must be a positive integer")
        if self.dist == "shifted" and not -self.c <= self.tau <= self.c:
            raise ContractViolation("shift tau must lie in [-c, c]")
        if not 0.0 < self.omega <= 1.0:
            raise ContractViolation("density omega must lie in (0, 1]")

    def dist_label(self) -> str:
        if self.dist == "shifted":
            return f"shifted(c={self.c},tau={self.tau})"
        if self.dist == "density":
            return f"density(c={self.c},omega={self.omega!r})"
        return f"{self.dist}(c={self.c})"

    def label(self) -> str:
        return f"{self.dist}-c{self.c}-d{self.d}-s{self.seed}"


@dataclass(frozen=True)
class ProblemInstance:
    spec: ProblemSpec
    obj: QuadraticObjective
    rho_bar: float

    @property
    def label(self) -> str:
        return self.spec.label()


def rho_bar(c: int, tau: int) -> float:
    """Shift-difficulty criterion 1/2 + (tau + 2 tau c) / (2 (tau^2 + c^2 + c))."""
    return 0.5 + (tau + 2.0 * tau * c) / (2.0 * (tau * tau + c * c + c))


@lru_cache(maxsize=8)
def _cauchy_cdf(c: int) -> np.ndarray:
    k = np.arange(-CAUCHY_TRUNCATION * c, CAUCHY_TRUNCATION * c + 1, dtype=np.float64)
    mass = 1.0 / (1.0 + (k / c) ** 2)
    cdf = np.cumsum(mass / mass.sum())
    cdf[-1] = 1.0
    return cdf


def _draw_entries(spec: ProblemSpec, m: int, rng: np.random.Generator) -> np.ndarray:
    if spec.dist == "uniform":
        return rng.integers(-spec.c, spec.c + 1, size=m).astype(np.float64)
    if spec.dist == "shifted":
        return rng.integers(-spec.c, spec.c + 1, size=m).astype(np.float64) + spec.tau
    if spec.dist == "density":
        vals = rng.integers(-spec.c, spec.c + 1, size=m).astype(np.float64)
        keep = rng.random(m) < spec.omega
        return np.where(keep, vals, 0.0)
    cdf = _cauchy_cdf(spec.c)
    idx = np.searchsorted(cdf, rng.random(m), side="right")
    return (idx - CAUCHY_TRUNCATION * spec.c).astype(np.float64)


def generate(spec: ProblemSpec) -> ProblemInstance:
    """Deterministically generate the instance described by the spec."""
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    vals = _draw_entries(spec, d * (d + 1) // 2, rng)
    F = np.zeros((d, d))
    iu = np.triu_indices(d)
    F[iu] = vals
    F.T[iu] = vals
    tau = spec.tau if spec.dist == "shifted" else 0
    return ProblemInstance(spec=spec, obj=QuadraticObjective(F), rho_bar=rho_bar(spec.c, tau))


_HEADER_RE = re.compile(
    r"^uqbo d=(?P<d>\d+) dist=(?P<name>[a-z]+)\((?P<params>[^)]*)\) seed=(?P<seed>-?\d+)$"
)


def save(inst: ProblemInstance, path) -> None:
    """Write the instance as a diffable plain-text file."""
    lines = [f"uqbo d={inst.spec.d} dist={inst.spec.dist_label()} seed={inst.spec.seed}"]
    F = inst.obj.coeffs
    integral = np.all(F == np.round(F))
    for row in F:
        if integral:
            lines.append(" ".join(str(int(v)) for v in row))
        else:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> ProblemInstance:
    """Read an instance file back; round-trips of save() are bit-exact."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty problem file", line=1)
    m = _HEADER_RE.match(lines[0].strip())
    if m is None:
        raise ParseError(f"malformed header {lines[0]!r}", line=1)
    d = int(m.group("d"))
    name = m.group("name")
    if name not in DISTS:
        raise ParseError(f"unknown distribution {name!r}", line=1)
    params = {}
    if m.group("params"):
        for item in m.group("params").split(","):
            if "=" not in item:
                raise ParseError(f"malformed distribution parameter {item!r}", line=1)
            key, val = item.split("=", 1)
            params[key.strip()] = val.strip()
    try:
        c = int(params["c"])
        tau = int(params.get("tau", 0))
        omega = float(params.get("omega", 1.0))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad distribution parameters: {exc}", line=1) from exc
    try:
        spec = ProblemSpec(d=d, dist=name, c=c, tau=tau, omega=omega, seed=int(m.group("seed")))
    except ContractViolation as exc:
        raise ValidationError(str(exc)) from exc
    rows = []
    body = lines[1:]
    if len(body) < d:
        raise ParseError(f"expected {d} coefficient rows, found {len(body)}", line=len(lines))
    for offset in range(d):
        lineno = offset + 2
        parts = body[offset].split()
        if len(parts) != d:
            raise ParseError(f"expected {d} entries, found {len(parts)}", line=lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    F = np.array(rows)
    if not np.array_equal(F, F.T):
        raise ValidationError("coefficient matrix in file is not symmetric")
    shift = tau if name == "shifted" else 0
    return ProblemInstance(spec=spec, obj=QuadraticObjective(F), rho_bar=rho_bar(c, shift))
