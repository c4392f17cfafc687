"""Decomposition of a solution around a modulated solitary wave.

A state u is written u = u_c(gamma) + v with phase x = c * gamma, where the
pair (c, gamma) is pinned by the secular conditions

    F1 = omega(u - u_c,        du/dt-tangent)  = 0,
    F2 = omega((u - v1) - u_c, du/dc-tangent)  = 0,

with omega the antisymmetrised symplectic pairing from `core`.  F2 pairs the
exponentially localized part u - v1 (v1 is the small solution launched from
the initial perturbation alone), because the speed tangent's prefix-sum
partner tends to a nonzero constant ahead of the wave and cannot be paired
against a merely square-summable field.

The Newton iteration runs in the (c, x) variables, where all tangent-field
derivatives are clean profile derivatives; gamma = x / c is recovered at the
root.  The Jacobian is assembled from analytic tangents; at the root it
approaches [[-dH/dc, 0], [0, dH/dc / c]], consistent with the implicit
function theorem's determinant -(dH/dc)^2 in (c, gamma).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional
import warnings

import numpy as np

from .core import LatticeField, PotentialModel, apply_J, sympl_pair, weighted_norm, WeightSpec
from .dynamics import Trajectory
from .solitons import SolitonTangents, TangentFrame

__all__ = [
    "ModulationState",
    "SplitState",
    "ModulationTrack",
    "solve_constraints",
    "project_Pc",
    "project_Qc",
    "split",
    "modulation_rates",
    "energy_pin",
    "ConstraintError",
]


class ConstraintError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModulationState:
    """Fitted wave parameters; x = c * gamma to round-off."""

    c: float
    gamma: float
    x: float
    frame: TangentFrame

    def __post_init__(self):
        if abs(self.x - self.c * self.gamma) > 1e-9 * max(1.0, abs(self.x)):
            raise ValueError("x must equal c * gamma")

    @property
    def tangents(self) -> SolitonTangents:
        return self.frame.tangents()


@dataclass(frozen=True)
class SplitState:
    v: LatticeField
    v1: LatticeField
    v2: LatticeField


def _constraint_values(u, u_loc, frame):
    w1 = u - frame.soliton
    w2 = u_loc - frame.soliton
    return frame.pair(w1, "ud"), frame.pair(w2, "uc"), w1, w2


def solve_constraints(
    u: LatticeField,
    u_minus_v1: LatticeField,
    c_init: float,
    gamma_init: float,
    tangent_provider: Callable[[float, float], TangentFrame],
    max_iter: int = 25,
    max_step: float = 0.5,
) -> ModulationState:
    """Newton solve of the secular conditions with analytic Jacobian.

    tangent_provider(c, x) returns the tangent frame on u's grid.  Converged
    when |F1| + |F2| <= 1e-10 * min(dH/dc, 1); diverging iterations (more
    than max_iter, or a single step larger than max_step in |dc| + |dx|)
    raise ConstraintError("left tubular neighborhood").
    """
    c = float(c_init)
    x = float(c_init * gamma_init)
    frame = tangent_provider(c, x)
    f1, f2, w1, w2 = _constraint_values(u, u_minus_v1, frame)
    res = abs(f1) + abs(f2)

    for _ in range(max_iter):
        tol = 1e-10 * min(frame.dHdc, 1.0)
        if res <= tol:
            return ModulationState(c, x / c, x, frame)
        j11 = -frame.dHdc + frame.pair(w1, "udc")
        j12 = frame.pair(w1, "udd") / c
        j21 = frame.pair(w2, "ucc")
        j22 = frame.dHdc / c + frame.pair(w2, "ucx")
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not np.isfinite(det):
            raise ConstraintError("left tubular neighborhood")
        dc = -(f1 * j22 - f2 * j12) / det
        dx = -(j11 * f2 - j21 * f1) / det
        if abs(dc) + abs(dx) > max_step:
            raise ConstraintError("left tubular neighborhood")
        # damped update: halve the step while the residual grows
        lam = 1.0
        for _ in range(5):
            c_try, x_try = c + lam * dc, x + lam * dx
            frame_try = tangent_provider(c_try, x_try)
            f1_t, f2_t, w1_t, w2_t = _constraint_values(u, u_minus_v1, frame_try)
            res_t = abs(f1_t) + abs(f2_t)
            if res_t < res or lam < 0.1:
                break
            lam *= 0.5
        c, x, frame = c_try, x_try, frame_try
        f1, f2, w1, w2 = f1_t, f2_t, w1_t, w2_t
        res = res_t

    if res <= 1e-10 * min(frame.dHdc, 1.0):
        return ModulationState(c, x / c, x, frame)
    raise ConstraintError("left tubular neighborhood")


def _plateau_mass(v: LatticeField, frame: TangentFrame) -> float:
    """l2 mass of v where the tangents have decayed (pairing-plateau region)."""
    env = np.abs(frame.ud.r) + np.abs(frame.ud.p) + np.abs(frame.uc.r) + np.abs(frame.uc.p)
    thresh = 1e-10 * np.max(env)
    live = np.nonzero(env > thresh)[0]
    if len(live) == 0 or live[-1] + 1 >= v.grid.n:
        return 0.0
    tail = slice(live[-1] + 1, v.grid.n)
    return float(np.sqrt(np.sum(v.r[tail] ** 2 + v.p[tail] ** 2)))


def project_Pc(v: LatticeField, tangents) -> LatticeField:
    """Rank-2 neutral-mode projection
    P v = theta * omega(v, ud) uc - theta * omega(v, uc) ud."""
    if isinstance(tangents, TangentFrame):
        if _plateau_mass(v, tangents) > 1e-8:
            warnings.warn(
                "project_Pc: input has mass beyond the tangent decay region; "
                "the pairing is unreliable there",
                RuntimeWarning,
                stacklevel=2,
            )
        a = tangents.theta * tangents.pair(v, "ud")
        b = tangents.theta * tangents.pair(v, "uc")
    else:
        a = tangents.theta * sympl_pair(v, tangents.ud)
        b = tangents.theta * sympl_pair(v, tangents.uc)
    return a * tangents.uc - b * tangents.ud


def project_Qc(v: LatticeField, tangents) -> LatticeField:
    return v - project_Pc(v, tangents)


def modulation_rates(
    state: ModulationState,
    v: LatticeField,
    v2: LatticeField,
    V: PotentialModel,
) -> tuple[float, float]:
    """Algebraic speed/phase rates (dc/dt, dx/dt - c) from the 2x2 system.

    Row one balances the time derivative of F1 (diagonal dH/dc with the
    omega(v, d_c ud) and omega(v, ud-dot) corrections) against the quadratic
    forcing omega(N1, ud); row two does the same for F2 with forcing
    -omega(N2, uc).  N1 is the Taylor remainder of H' around the wave, and
    N2 removes from it the self-interaction of the free part v1 = v - v2.
    """
    frame = state.frame
    grid = v.grid
    rs = frame.soliton.r
    h = frame.dHdc

    # N1 = J{H'(u_c + v) - H'(u_c) - H''(u_c) v}; its p-argument vanishes
    n1_arg = V.dV(rs + v.r) - V.dV(rs) - V.d2V(rs) * v.r
    N1 = apply_J(LatticeField(grid, n1_arg, np.zeros(grid.n)))
    v1 = v - v2
    n2_arg = n1_arg + V.d2V(rs) * v1.r - V.dV(v1.r)
    N2 = apply_J(LatticeField(grid, n2_arg, np.zeros(grid.n)))

    p11 = frame.pair(v, "udc")
    p12 = frame.pair(v, "udd")
    p21 = frame.pair(v2, "ucc")
    p22 = frame.pair(v2, "udc")
    if max(abs(p11), abs(p12), abs(p21), abs(p22)) >= 0.1 * h:
        raise ConstraintError("modulation system degenerate")

    A = np.array([[h - p11, -p12], [p21, h + p22]])
    b = np.array([frame.pair(N1, "ud"), -frame.pair(N2, "uc")])
    cdot, mu = np.linalg.solve(A, b)
    return float(cdot), float(state.c * mu)


def energy_pin(
    u: LatticeField,
    state: ModulationState,
    V: PotentialModel,
    c0: float,
    v0_norm: float,
) -> float:
    """||v||^2 / (|c - c0| + ||v0||): the run-wise boundedness ratio.

    Returns 0 when the denominator is below 1e-14 (unperturbed run flag).
    """
    denom = abs(state.c - c0) + v0_norm
    if denom < 1e-14:
        return 0.0
    v = u - state.frame.soliton
    return v.norm_l2() ** 2 / denom


@dataclass
class ModulationTrack:
    """Per-sample modulation parameters, constraint residuals and norms."""

    times: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    cdot: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    norm_v_l2: np.ndarray
    norm_v1_W: np.ndarray
    norm_v2_X: np.ndarray
    energy_pin: np.ndarray
    c0: float
    v0_norm: float
    weight_a: float
    splits: Optional[list[SplitState]] = None

    COLUMNS = (
        "t,c,gamma,x,xdot,cdot,F1,F2,norm_v_l2,norm_v1_W,norm_v2_X,energy_pin"
    )

    def save_csv(self, path):
        data = np.column_stack(
            [
                self.times, self.c, self.gamma, self.x, self.xdot, self.cdot,
                self.F1, self.F2, self.norm_v_l2, self.norm_v1_W,
                self.norm_v2_X, self.energy_pin,
            ]
        )
        np.savetxt(path, data, delimiter=",", header=self.COLUMNS, comments="")


def _reacquire_phase(u: LatticeField) -> float:
    """Crest locator fallback: quadratic fit around the velocity maximum.

    The wave's p-profile peaks half a site ahead of the r-center, hence the
    -1/2 correction.
    """
    i = int(np.argmax(u.p))
    if 0 < i < u.grid.n - 1:
        a, b, c = u.p[i - 1], u.p[i], u.p[i + 1]
        denom = a - 2 * b + c
        off = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        off = 0.0
    return float(u.grid.n_min + i + off - 0.5)


def split(
    u_traj: Trajectory,
    v1_traj: Trajectory,
    c_init: float,
    gamma_init: float,
    family,
    weight_a: float,
    store_fields: bool = True,
) -> ModulationTrack:
    """Track (c, gamma, x) along a run and split v into v1 + v2.

    Both trajectories must share times and grid, with v1 evolved from the
    same initial perturbation under the free lattice flow.  Constraint
    solves are warm-started from the previous sample (with the phase
    advanced by c dt); a failed solve retries once from the velocity-crest
    location before the failure is reported with its sample index.
    """
    if u_traj.grid != v1_traj.grid:
        raise ValueError("grid mismatch between trajectories")
    if len(u_traj) != len(v1_traj) or not np.allclose(
        u_traj.times, v1_traj.times, atol=1e-12
    ):
        raise ValueError("trajectories must share sample times")

    grid = u_traj.grid
    provider = lambda c, x: family.frame(c, x, grid)
    n = len(u_traj)
    cols = {k: np.empty(n) for k in (
        "c", "gamma", "x", "xdot", "cdot", "F1", "F2",
        "norm_v_l2", "norm_v1_W", "norm_v2_X", "energy_pin")}
    states: list[SplitState] = []

    v0_norm = v1_traj.states[0].norm_l2()
    c_prev, x_prev = float(c_init), float(c_init * gamma_init)
    t_prev = u_traj.times[0]

    for i in range(n):
        t = u_traj.times[i]
        u = u_traj.states[i]
        v1 = v1_traj.states[i]
        u_loc = u - v1
        x_guess = x_prev + c_prev * (t - t_prev)
        try:
            state = solve_constraints(u, u_loc, c_prev, x_guess / c_prev, provider)
        except ConstraintError:
            x_guess = _reacquire_phase(u)
            try:
                state = solve_constraints(u, u_loc, c_prev, x_guess / c_prev, provider)
            except ConstraintError as err:
                raise ConstraintError(f"sample {i} (t={t:g}): {err}") from err

        frame = state.frame
        f1, f2, _, _ = _constraint_values(u, u_loc, frame)
        v = u - frame.soliton
        v2 = v - v1
        cdot, xdot_minus_c = modulation_rates(state, v, v2, family.potential)

        kappa_c = family.kappa(state.c)
        w_spec = WeightSpec(a=weight_a, center=state.x, kappa=kappa_c)
        cols["c"][i] = state.c
        cols["gamma"][i] = state.gamma
        cols["x"][i] = state.x
        cols["cdot"][i] = cdot
        cols["xdot"][i] = state.c + xdot_minus_c
        cols["F1"][i] = f1
        cols["F2"][i] = f2
        cols["norm_v_l2"][i] = v.norm_l2()
        cols["norm_v1_W"][i] = weighted_norm(v1, w_spec, "W", t)
        cols["norm_v2_X"][i] = weighted_norm(v2, w_spec, "X", t)
        cols["energy_pin"][i] = energy_pin(u, state, family.potential, c_init, v0_norm)
        if store_fields:
            states.append(SplitState(v, v1, v2))

        c_prev, x_prev, t_prev = state.c, state.x, t

    return ModulationTrack(
        times=u_traj.times.copy(),
        c=cols["c"], gamma=cols["gamma"], x=cols["x"],
        xdot=cols["xdot"], cdot=cols["cdot"],
        F1=cols["F1"], F2=cols["F2"],
        norm_v_l2=cols["norm_v_l2"], norm_v1_W=cols["norm_v1_W"],
        norm_v2_X=cols["norm_v2_X"], energy_pin=cols["energy_pin"],
        c0=float(c_init), v0_norm=float(v0_norm), weight_a=float(weight_a),
        splits=states if store_fields else None,
    )
