"""Finite-window lattice fields, potentials and the symplectic difference calculus.

State convention: a lattice field is the pair u = (r, p) on an integer window
[n_min, n_max], where r(n) is the relative displacement q(n+1) - q(n) and p(n)
the velocity.  The equations of motion are du/dt = J H'(u) with

    H(u)  = sum_n ( p(n)^2 / 2 + V(r(n)) ),
    J     = [[0, S+ - 1], [1 - S-, 0]],        S+- f(n) = f(n +- 1),
    H'(u) = (V'(r), p).

J^{-1} is realised as one-sided prefix sums (first component sums the second
component of the input up to n, second component sums the first up to n-1),
truncated at the left window edge.  On fields whose component totals vanish
this inverse is antisymmetric; in general

    <v, J^{-1} w> + <w, J^{-1} v> = (sum v_r)(sum w_p) + (sum v_p)(sum w_r),

so the symplectic pairing used by the modulation machinery is the explicitly
antisymmetrised form `sympl_pair`, which subtracts the total-sum defect.  It
coincides with <v, J^{-1} w> whenever either argument has zero component sums
(e.g. any field in the range of J, or the time-derivative of a traveling
wave) and it makes the neutral-mode projections exactly idempotent.

Weighted norms (fixed exponential weight, soliton-frame one-sided weight and
soliton-centered two-sided weight) are evaluated through a log-sum-exp kernel
recentered at the weight's argmax, so windows far larger than 700/a sites do
not overflow.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = [
    "LatticeGrid",
    "LatticeField",
    "PotentialModel",
    "WeightSpec",
    "hamiltonian",
    "grad_hamiltonian",
    "apply_J",
    "apply_J_inverse",
    "inner",
    "sympl_pair",
    "component_sums",
    "weighted_norm",
    "save_field_csv",
    "load_field_csv",
]

MIN_WINDOW = 16


# ---------------------------------------------------------------------------
# compensated prefix sums
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _kahan_cumsum(x):  # pragma: no cover - exercised via kahan_cumsum
        out = np.empty_like(x)
        s = 0.0
        comp = 0.0
        for i in range(x.shape[0]):
            y = x[i] - comp
            t = s + y
            comp = (t - s) - y
            s = t
            out[i] = s
        return out

    def kahan_cumsum(x: np.ndarray) -> np.ndarray:
        """Running sum with Kahan compensation (pairing accuracy feeds the
        modulation Newton solve, so plain cumsum round-off is not enough)."""
        return _kahan_cumsum(np.ascontiguousarray(x, dtype=np.float64))

else:  # pragma: no cover

    def kahan_cumsum(x: np.ndarray) -> np.ndarray:
        return np.cumsum(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeGrid:
    """Integer site window [n_min, n_max] with a boundary rule.

    boundary 'zero' treats off-window values as 0 (default); 'periodic' wraps.
    """

    n_min: int
    n_max: int
    boundary: str = "zero"

    def __post_init__(self):
        if self.n_max - self.n_min < MIN_WINDOW:
            raise ValueError(
                f"window [{self.n_min}, {self.n_max}] shorter than {MIN_WINDOW} sites"
            )
        if self.boundary not in ("zero", "periodic"):
            raise ValueError(f"unknown boundary kind {self.boundary!r}")

    @property
    def n(self) -> int:
        return self.n_max - self.n_min + 1

    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def shift_up(self, f: np.ndarray) -> np.ndarray:
        """f(n+1) on the window."""
        if self.boundary == "periodic":
            return np.roll(f, -1)
        return np.concatenate((f[1:], [0.0]))

    def shift_down(self, f: np.ndarray) -> np.ndarray:
        """f(n-1) on the window."""
        if self.boundary == "periodic":
            return np.roll(f, 1)
        return np.concatenate(([0.0], f[:-1]))


def _as_field_array(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"{name} has shape {a.shape}, expected ({n},)")
    return a


@dataclass(frozen=True)
class LatticeField:
    """Immutable pair (r, p) on a grid."""

    grid: LatticeGrid
    r: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        r = _as_field_array(self.r, self.grid.n, "r")
        p = _as_field_array(self.p, self.grid.n, "p")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite field")
        r = r.copy()
        p = p.copy()
        r.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "p", p)

    @classmethod
    def zeros(cls, grid: LatticeGrid) -> "LatticeField":
        z = np.zeros(grid.n)
        return cls(grid, z, z)

    def __add__(self, other: "LatticeField") -> "LatticeField":
        _require_same_grid(self, other)
        return LatticeField(self.grid, self.r + other.r, self.p + other.p)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        _require_same_grid(self, other)
        return LatticeField(self.grid, self.r - other.r, self.p - other.p)

    def __mul__(self, a: float) -> "LatticeField":
        return LatticeField(self.grid, a * self.r, a * self.p)

    __rmul__ = __mul__

    def norm_l2(self) -> float:
        return float(np.sqrt(np.dot(self.r, self.r) + np.dot(self.p, self.p)))


def _require_same_grid(u: LatticeField, w: LatticeField):
    if u.grid != w.grid:
        raise ValueError("grid mismatch")


@dataclass(frozen=True)
class PotentialModel:
    """Interaction potential V.

    kind 'toda':  V(r) = exp(-r) - 1 + r  (V(0) = V'(0) = 0, V''(0) = 1).
    kind 'fpu':   V(r) = k2 r^2/2 + k3 r^3 + k4 r^4 with k2 > 0, k3 != 0.
    """

    kind: str
    k2: float = 1.0
    k3: float = 0.0
    k4: float = 0.0

    def __post_init__(self):
        if self.kind not in ("toda", "fpu"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "fpu":
            if self.k2 <= 0:
                raise ValueError("fpu potential needs k2 > 0")
            if self.k3 == 0:
                raise ValueError("fpu potential needs k3 != 0")

    @classmethod
    def toda(cls) -> "PotentialModel":
        return cls("toda")

    @classmethod
    def fpu(cls, k2: float = 1.0, k3: float = 1.0, k4: float = 0.0) -> "PotentialModel":
        return cls("fpu", k2=k2, k3=k3, k4=k4)

    def V(self, r):
        if self.kind == "toda":
            # expm1 keeps V(r) ~ r^2/2 accurate for |r| << 1
            return np.expm1(-r) + r
        return 0.5 * self.k2 * r * r + self.k3 * r**3 + self.k4 * r**4

    def dV(self, r):
        if self.kind == "toda":
            return -np.expm1(-r)
        return self.k2 * r + 3.0 * self.k3 * r * r + 4.0 * self.k4 * r**3

    def d2V(self, r):
        if self.kind == "toda":
            return np.exp(-r)
        return self.k2 + 6.0 * self.k3 * r + 12.0 * self.k4 * r * r


@dataclass(frozen=True)
class WeightSpec:
    """Exponential weight data: rate a, moving center, optional kappa.

    center may be a constant or a callable of time; kappa is the two-sided
    weight rate used by the 'W' norm kind.  Admissibility of a against the
    soliton decay rate (a < 2*kappa(c) for fixed-frame uses, a <= kappa(c)
    for soliton-frame uses) is the caller's responsibility.
    """

    a: float
    center: Callable[[float], float] | float = 0.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("weight rate a must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive when given")

    def center_at(self, t: float) -> float:
        if callable(self.center):
            return float(self.center(t))
        return float(self.center)


# ---------------------------------------------------------------------------
# energy and the symplectic operators
# ---------------------------------------------------------------------------


def hamiltonian(u: LatticeField, V: PotentialModel) -> float:
    """Window total of p^2/2 + V(r)."""
    return float(np.sum(0.5 * u.p * u.p + V.V(u.r)))


def grad_hamiltonian(u: LatticeField, V: PotentialModel) -> LatticeField:
    """Frechet derivative (V'(r), p), componentwise."""
    return LatticeField(u.grid, V.dV(u.r), u.p.copy())


def apply_J(w: LatticeField) -> LatticeField:
    """First component (S+ - 1) w_p, second component (1 - S-) w_r."""
    g = w.grid
    return LatticeField(g, g.shift_up(w.p) - w.p, w.r - g.shift_down(w.r))


def apply_J_inverse(w: LatticeField, warn: bool = True) -> LatticeField:
    """One-sided prefix-sum inverse of J, truncated at the left window edge.

    First component: sum of w_p over m <= n; second: sum of w_r over m <= n-1.
    Callers must supply fields that decay toward both window ends; a
    RuntimeWarning is emitted when the boundary magnitude exceeds
    1e-10 * max|w| (the truncation is then unsafe).
    """
    if w.grid.boundary == "periodic":
        raise ValueError("prefix-sum inverse needs a zero-padded window")
    scale = max(np.max(np.abs(w.r)), np.max(np.abs(w.p)))
    if warn and scale > 0:
        edge = max(abs(w.r[0]), abs(w.r[-1]), abs(w.p[0]), abs(w.p[-1]))
        if edge > 1e-10 * scale:
            warnings.warn(
                "apply_J_inverse: input does not decay at the window ends; "
                "truncated prefix sums are unreliable",
                RuntimeWarning,
                stacklevel=2,
            )
    first = kahan_cumsum(w.p)
    second = np.concatenate(([0.0], kahan_cumsum(w.r)[:-1]))
    return LatticeField(w.grid, first, second)


def inner(u: LatticeField, w: LatticeField) -> float:
    """l^2 pairing of both components."""
    _require_same_grid(u, w)
    return float(np.dot(u.r, w.r) + np.dot(u.p, w.p))


def component_sums(w: LatticeField) -> tuple[float, float]:
    return float(np.sum(w.r)), float(np.sum(w.p))


def sympl_pair(
    v: LatticeField,
    w: LatticeField,
    jinv_w: Optional[LatticeField] = None,
    w_sums: Optional[tuple[float, float]] = None,
) -> float:
    """Antisymmetrised pairing omega(v, w) = <v, J^{-1} w> - sum defect.

    Equals (<v, J^{-1}w> - <w, J^{-1}v>)/2 exactly; see the module docstring.
    Precomputed J^{-1}w and component sums of w may be passed when w is a
    cached tangent field.
    """
    _require_same_grid(v, w)
    if jinv_w is None:
        jinv_w = apply_J_inverse(w, warn=False)
    if w_sums is None:
        w_sums = component_sums(w)
    sv_r, sv_p = component_sums(v)
    raw = inner(v, jinv_w)
    return raw - 0.5 * (sv_r * w_sums[1] + sv_p * w_sums[0])


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------


def _logsq_weighted_sum(log_w2: np.ndarray, r: np.ndarray, p: np.ndarray) -> float:
    """sqrt(sum exp(log_w2) * (r^2 + p^2)) via max-recentering."""
    mag2 = r * r + p * p
    mask = mag2 > 0.0
    if not np.any(mask):
        return 0.0
    with np.errstate(divide="ignore"):
        terms = np.log(mag2[mask]) + log_w2[mask]
    m = np.max(terms)
    if not np.isfinite(m):
        raise FloatingPointError("weighted norm overflow despite recentering")
    total = np.sum(np.exp(terms - m))
    return float(np.exp(0.5 * (m + np.log(total))))


def weighted_norm(
    u: LatticeField, spec: WeightSpec, kind: str = "l2a", t: float = 0.0
) -> float:
    """Exponentially weighted norms.

    kind 'l2a':  (sum e^{2an} |u(n)|^2)^{1/2}
    kind 'X':    computed in shifted form (sum e^{2a(n-center(t))} |u(n)|^2)^{1/2}
    kind 'W':    (sum e^{-kappa |n-center(t)|} |u(n)|^2)^{1/2}
    """
    n = u.grid.sites().astype(np.float64)
    if kind == "l2a":
        log_w2 = 2.0 * spec.a * n
    elif kind == "X":
        log_w2 = 2.0 * spec.a * (n - spec.center_at(t))
    elif kind == "W":
        if spec.kappa is None:
            raise ValueError("W norm needs kappa in the weight spec")
        log_w2 = -spec.kappa * np.abs(n - spec.center_at(t))
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return _logsq_weighted_sum(log_w2, u.r, u.p)


# ---------------------------------------------------------------------------
# snapshot files
# ---------------------------------------------------------------------------


def save_field_csv(path, u: LatticeField):
    """Write the snapshot format: header n,r,p, one row per site."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["n", "r", "p"])
        for n, r, p in zip(u.grid.sites(), u.r, u.p):
            w.writerow([int(n), repr(float(r)), repr(float(p))])


def load_field_csv(path, boundary: str = "zero") -> LatticeField:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if rows[0] != ["n", "r", "p"]:
        raise ValueError(f"{path}: expected header n,r,p")
    ns = np.array([int(row[0]) for row in rows[1:]])
    if not np.all(np.diff(ns) == 1):
        raise ValueError(f"{path}: site indices must be consecutive")
    r = np.array([float(row[1]) for row in rows[1:]])
    p = np.array([float(row[2]) for row in rows[1:]])
    grid = LatticeGrid(int(ns[0]), int(ns[-1]), boundary)
    return LatticeField(grid, r, p)
