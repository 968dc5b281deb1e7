"""Constrained steepest descent on the manifold ||w||^2 = 2.

One iteration, starting from an iterate w with inhibitor response v and
multiplier mu:

1. solve the update equation for q_raw = Q(w),
2. form the raw direction D = q_raw - (mu + d c^2) w,
3. normalize the step so its sup-norm equals alpha1 (alpha = alpha1 / max|D|),
4. clip positive side lobes (1D only), translate to restore the norm,
5. accept if the energy did not increase, otherwise shrink alpha1 by
   theta and retry from the cached direction,
6. grow alpha1 by 1.1 up to its initial value after an accepted step.

The loop stops when the energy decrease falls below
max(delta1 |J|, delta2) and the sup-norm profile change falls below
delta3, both on the same accepted step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .elliptic import solve_inhibitor, solve_update
from .energy import EnergyBreakdown, constraint_multiplier, energy_breakdown
from .errors import BacktrackFailureError
from .grids import Grid, Profile, norm_h1exp_sq, shift_grid
from .model import ModelParams

STATIONARY_TOL = 1e-14


@dataclass
class DescentConfig:
    """Step-size and stopping parameters of the descent loop.

    ``delta1`` is the relative and ``delta2`` the absolute energy
    tolerance (``delta2`` far below ``delta1``); ``delta3`` bounds the
    sup-norm profile change so the slowly weighted tail is converged
    too, not just the energy.
    """

    theta: float = 0.5
    alpha_init: float = 1e-3
    delta1: float = 1e-8
    delta2: float = 1e-14
    delta3: float = 1e-3
    max_iters: int = 200_000
    max_backtracks: int = 60

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0,1), got {self.theta}")
        if not (0.0 < self.alpha_init < 1.0):
            raise ValueError(f"alpha_init must lie in (0,1), got {self.alpha_init}")
        if not (0.0 < self.delta2 < self.delta1 < 1.0):
            raise ValueError(
                f"need 0 < delta2 < delta1 < 1, got delta1={self.delta1}, delta2={self.delta2}"
            )
        if not (0.0 < self.delta3 < 1.0):
            raise ValueError(f"delta3 must lie in (0,1), got {self.delta3}")
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration caps must be positive")


@dataclass
class DescentState:
    """One accepted iterate with its cached solves and step bookkeeping."""

    w: Profile
    v: Profile
    mu: float
    energy: EnergyBreakdown
    alpha1: float
    iter: int = 0
    step_sup: float = 0.0
    backtracks: int = 0
    stationary: bool = False


@dataclass
class TraceRecord:
    iter: int
    total: float
    gradient_term: float
    nonlocal_term: float
    potential_term: float
    alpha1: float
    backtracks: int
    step_sup: float


@dataclass
class MinimizeResult:
    """Outcome of a descent run; ``reason`` is one of
    ``"tolerance"``, ``"max_iters"``, ``"backtrack_failure"``."""

    w: Profile
    energy: EnergyBreakdown
    iters: int
    converged: bool
    reason: str
    mu: float = 0.0
    trace: Optional[List[TraceRecord]] = None

    @property
    def J(self) -> float:
        return self.energy.total


def clip_side_lobes(w: Profile) -> Profile:
    """Zero positive excursions away from the principal positive interval.

    The principal interval is the maximal run of strictly positive
    samples containing the rightmost maximizer.  Profiles that are
    nonpositive everywhere, and all strip profiles, pass through
    unchanged (on a strip a sign class is not defined and small steps
    make clipping unnecessary).
    """
    if w.grid.dim == 2:
        return w
    s = w.samples
    smax = s.max()
    if smax <= 0.0:
        return w
    positive = s > 0.0
    jbar = int(np.flatnonzero(s == smax)[-1])
    gaps = np.flatnonzero(~positive)
    left = gaps[gaps < jbar]
    lo = int(left[-1]) + 1 if left.size else 0
    right = gaps[gaps > jbar]
    hi = int(right[0]) - 1 if right.size else s.size - 1
    outside = positive.copy()
    outside[lo : hi + 1] = False
    if not outside.any():
        return w
    clipped = s.copy()
    clipped[outside] = 0.0
    return Profile(w.grid, clipped)


def shift_normalize(w: Profile) -> Profile:
    """Translate ``w`` so its squared weighted H1 norm becomes exactly 2.

    With omega = ||w||^2 / 2 the translation is by -log(omega); the
    exponential weight turns the translation into an exact scaling of
    the norm, so the result lands on the manifold to round-off.
    """
    omega = 0.5 * norm_h1exp_sq(w)
    if not math.isfinite(omega) or omega <= 0.0:
        raise ValueError(f"cannot normalize a profile with ||w||^2/2 = {omega}")
    if omega == 1.0:
        return w
    return shift_grid(w, -math.log(omega))


def square_wave_guess(grid: Grid) -> Profile:
    """Cold-start profile on the line: indicator of [-5, 5]."""
    if grid.dim != 1:
        raise ValueError("square_wave_guess is for 1D grids")
    x = grid.x
    return Profile(grid, ((x >= -5.0) & (x <= 5.0)).astype(float))


def strip_mode_guess(grid: Grid) -> Profile:
    """Cold-start profile on a strip: x-indicator times the first wall mode."""
    if grid.dim != 2:
        raise ValueError("strip_mode_guess is for 2D grids")
    x = grid.x
    y = grid.y
    ell = grid.half_width
    vals = ((np.abs(x) <= 5.0).astype(float)[:, None]) * np.sin(
        np.pi * (y + ell) / (2.0 * ell)
    )[None, :]
    vals[:, 0] = 0.0
    vals[:, -1] = 0.0
    return Profile(grid, vals)


def cold_start_guess(grid: Grid) -> Profile:
    return square_wave_guess(grid) if grid.dim == 1 else strip_mode_guess(grid)


def initial_state(w0: Profile, params: ModelParams, cfg: DescentConfig) -> DescentState:
    """Project a guess into the admissible class and cache its solves."""
    w = shift_normalize(clip_side_lobes(w0))
    v = solve_inhibitor(w, params)
    return DescentState(
        w=w,
        v=v,
        mu=constraint_multiplier(w, v, params),
        energy=energy_breakdown(w, v, params),
        alpha1=cfg.alpha_init,
    )


def descent_step(
    state: DescentState, params: ModelParams, cfg: DescentConfig
) -> DescentState:
    """One accepted descent step with backtracking.

    The update solve is cached across backtracks (the direction does not
    depend on the step size).  Raises
    :class:`~fhnpulse.errors.BacktrackFailureError` when the backtrack
    budget is exhausted.
    """
    q_raw = solve_update(state.w, state.v, params)
    shift = state.mu + params.d * params.c**2
    direction = q_raw.samples - shift * state.w.samples
    dmax = float(np.max(np.abs(direction)))
    wmax = float(np.max(np.abs(state.w.samples)))
    if dmax <= STATIONARY_TOL * max(1.0, wmax):
        return replace(state, stationary=True, step_sup=0.0, backtracks=0)

    alpha1 = state.alpha1
    for backtracks in range(cfg.max_backtracks + 1):
        alpha = alpha1 / dmax
        trial = Profile(state.w.grid, state.w.samples + alpha * direction)
        candidate = shift_normalize(clip_side_lobes(trial))
        v_cand = solve_inhibitor(candidate, params)
        energy = energy_breakdown(candidate, v_cand, params)
        if energy.total <= state.energy.total:
            break
        alpha1 *= cfg.theta
    else:
        raise BacktrackFailureError(
            f"no descent after {cfg.max_backtracks} backtracks at iter {state.iter}",
            state=state,
        )

    step_sup = float(np.max(np.abs(candidate.samples - state.w.samples)))
    return DescentState(
        w=candidate,
        v=v_cand,
        mu=constraint_multiplier(candidate, v_cand, params),
        energy=energy,
        alpha1=min(1.1 * alpha1, cfg.alpha_init),
        iter=state.iter + 1,
        step_sup=step_sup,
        backtracks=backtracks,
    )


def minimize(
    w0: Profile,
    params: ModelParams,
    cfg: Optional[DescentConfig] = None,
    callback: Optional[Callable[[TraceRecord], None]] = None,
    keep_trace: bool = False,
) -> MinimizeResult:
    """Run the descent from ``w0`` until the stopping rule or a cap fires.

    The guess is clipped and normalized before iteration zero so the
    loop invariants (norm exactly 2, at most one positive interval) hold
    from the start.  The returned profile is always the last accepted
    iterate, never a rejected trial.
    """
    cfg = cfg or DescentConfig()
    state = initial_state(w0, params, cfg)
    trace: Optional[List[TraceRecord]] = [] if keep_trace else None

    def emit(st: DescentState):
        if callback is None and trace is None:
            return
        rec = TraceRecord(
            iter=st.iter,
            total=st.energy.total,
            gradient_term=st.energy.gradient_term,
            nonlocal_term=st.energy.nonlocal_term,
            potential_term=st.energy.potential_term,
            alpha1=st.alpha1,
            backtracks=st.backtracks,
            step_sup=st.step_sup,
        )
        if callback is not None:
            callback(rec)
        if trace is not None:
            trace.append(rec)

    emit(state)
    for _ in range(cfg.max_iters):
        previous = state
        try:
            state = descent_step(state, params, cfg)
        except BacktrackFailureError:
            return MinimizeResult(
                w=previous.w,
                energy=previous.energy,
                iters=previous.iter,
                converged=False,
                reason="backtrack_failure",
                mu=previous.mu,
                trace=trace,
            )
        emit(state)
        if state.stationary:
            return MinimizeResult(
                w=state.w,
                energy=state.energy,
                iters=state.iter,
                converged=True,
                reason="tolerance",
                mu=state.mu,
                trace=trace,
            )
        drop_tol = max(cfg.delta1 * abs(state.energy.total), cfg.delta2)
        if (
            previous.energy.total <= state.energy.total + drop_tol
            and state.step_sup <= cfg.delta3
        ):
            return MinimizeResult(
                w=state.w,
                energy=state.energy,
                iters=state.iter,
                converged=True,
                reason="tolerance",
                mu=state.mu,
                trace=trace,
            )
    return MinimizeResult(
        w=state.w,
        energy=state.energy,
        iters=state.iter,
        converged=False,
        reason="max_iters",
        mu=state.mu,
        trace=trace,
    )
