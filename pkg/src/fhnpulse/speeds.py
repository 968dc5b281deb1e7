"""Wave speeds as roots of the minimal energy J(c).

A scan marches the speed parameter across a window, warm-starting each
minimization from the previous minimizer, and records (c, J(c)).  Sign
changes between adjacent converged samples become brackets; regula
falsi (with a bisection fallback on stagnation) refines each bracket,
where every function evaluation is itself a warm-started minimization.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .descent import DescentConfig, MinimizeResult, cold_start_guess, minimize
from .errors import BracketLossError
from .grids import Grid, Profile
from .model import ModelParams


@dataclass
class GridSpec:
    """How to build a computational grid for a given wave speed.

    ``domain_length`` may be None, in which case the length grows with
    the speed (faster pulses are wider in the moving frame) between 160
    and 480.  The right margin keeps a little room ahead of the pulse
    front, which the norm constraint pins near the coordinate origin.
    """

    h: float = 0.01
    domain_length: Optional[float] = None
    right_margin: float = 25.0
    n_y: int = 80

    def length_for(self, c: float) -> float:
        if self.domain_length is not None:
            return self.domain_length
        return min(480.0, max(160.0, 20.0 * c))

    def build(self, params: ModelParams, c_ref: Optional[float] = None) -> Grid:
        c = params.c if c_ref is None else c_ref
        length = self.length_for(c)
        n_x = max(4, int(round(length / self.h)))
        origin = self.right_margin - n_x * self.h
        if params.dim == 1:
            return Grid(origin=origin, h=self.h, n_x=n_x)
        return Grid(
            origin=origin,
            h=self.h,
            n_x=n_x,
            dim=2,
            half_width=params.strip_half_width,
            n_y=self.n_y,
        )


@dataclass
class ScanConfig:
    """Descent settings plus scan tolerances and adaptivity."""

    descent: DescentConfig = field(default_factory=DescentConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    tol_c: float = 1e-3
    tol_j_rel: float = 1e-6
    adapt: bool = True
    dc_fine: float = 0.01
    max_consecutive_failures: int = 3
    max_root_iters: int = 40
    stagnation_limit: int = 10


@dataclass
class ScanSample:
    c: float
    J: float
    converged: bool
    profile: Optional[Profile] = None
    checkpoint: Optional[str] = None
    gradient_term: float = 0.0


@dataclass
class SpeedScan:
    """Ordered (c, J) samples with detected sign-change brackets."""

    samples: List[ScanSample]
    direction: int
    aborted: bool = False
    jumps: List[Tuple[float, float]] = field(default_factory=list)

    def brackets(self) -> List[Tuple[ScanSample, ScanSample]]:
        out = []
        ordered = sorted(self.samples, key=lambda s: s.c)
        for a, b in zip(ordered[:-1], ordered[1:]):
            if a.converged and b.converged and a.J * b.J < 0.0:
                out.append((a, b))
        return out


@dataclass
class RootResult:
    c_root: float
    J_at_root: float
    profile: Optional[Profile]
    iterations: int
    used_bisection: bool = False
    continuation_only: bool = False
    gradient_term: float = 0.0


def regrid_profile(p: Profile, grid: Grid) -> Profile:
    """Carry samples to a grid of the same shape (per-index transfer).

    Used to move a strip minimizer between speeds: the strip half-width
    scales with c but the transverse point count stays fixed, so mapping
    indices one-to-one is the natural transfer; the descent renormalizes
    the result before iterating.
    """
    if p.grid.shape != grid.shape:
        raise ValueError(
            f"cannot regrid samples of shape {p.grid.shape} onto {grid.shape}"
        )
    return Profile(grid, p.samples)


def _minimize_at(
    params: ModelParams,
    c: float,
    guess: Optional[Profile],
    cfg: ScanConfig,
) -> Tuple[MinimizeResult, ModelParams]:
    params_c = replace(params, c=c)
    if params.dim == 1:
        if guess is None:
            guess = cold_start_guess(cfg.grid.build(params_c))
    else:
        grid = cfg.grid.build(params_c)
        guess = cold_start_guess(grid) if guess is None else regrid_profile(guess, grid)
    return minimize(guess, params_c, cfg.descent), params_c


def scan_energy_curve(
    params: ModelParams,
    c_start: float,
    c_end: float,
    dc: float,
    cfg: Optional[ScanConfig] = None,
) -> SpeedScan:
    """March c from ``c_start`` toward ``c_end`` and sample J(c).

    The first sample cold-starts; every later one warm-starts from the
    previous minimizer.  Non-converged samples are recorded and the
    march continues, but three consecutive failures abort the scan with
    partial results.  When a J-increment jumps well above its running
    median the interval is re-marched at a fine step, which catches the
    branch switches near a bifurcation.
    """
    if not (c_start > 0.0 and c_end > 0.0):
        raise ValueError("speed window must be positive")
    if dc == 0.0:
        raise ValueError("dc must be nonzero")
    cfg = cfg or ScanConfig()
    step = abs(dc) * (1.0 if c_end >= c_start else -1.0)
    n_steps = int(math.floor(abs(c_end - c_start) / abs(dc) + 1e-9))
    targets = [c_start + k * step for k in range(n_steps + 1)]
    if targets[-1] != c_end and abs(targets[-1] - c_end) > 1e-12:
        targets.append(c_end)

    scan = SpeedScan(samples=[], direction=1 if step > 0 else -1)
    guess: Optional[Profile] = None
    failures = 0
    increments: List[float] = []

    def run(c: float, warm: Optional[Profile]) -> ScanSample:
        result, _ = _minimize_at(params, c, warm, cfg)
        return ScanSample(
            c=c,
            J=result.energy.total,
            converged=result.converged,
            profile=result.w,
            gradient_term=result.energy.gradient_term,
        )

    for c in targets:
        sample = run(c, guess)
        guess = sample.profile
        if scan.samples and cfg.adapt and abs(step) > cfg.dc_fine:
            prev = scan.samples[-1]
            jump = abs(sample.J - prev.J)
            if len(increments) >= 3 and jump > 5.0 * statistics.median(increments):
                # re-march the suspicious interval at the fine step
                lo, hi = sorted((prev.c, sample.c))
                fine = prev.profile
                cc = prev.c
                inner = []
                n_fine = int(round(abs(sample.c - prev.c) / cfg.dc_fine))
                for k in range(1, n_fine):
                    cc = prev.c + k * math.copysign(cfg.dc_fine, sample.c - prev.c)
                    s = run(cc, fine)
                    fine = s.profile
                    inner.append(s)
                scan.samples.extend(inner)
                scan.jumps.append((lo, hi))
            increments.append(jump)
        elif scan.samples:
            increments.append(abs(sample.J - scan.samples[-1].J))
        scan.samples.append(sample)
        if sample.converged:
            failures = 0
        else:
            failures += 1
            if failures >= cfg.max_consecutive_failures:
                scan.aborted = True
                break
    return scan


def _default_evaluator(params: ModelParams, cfg: ScanConfig):
    state = {"profile": None}

    def evaluate(c: float) -> Tuple[float, Optional[Profile], float]:
        result, _ = _minimize_at(params, c, state["profile"], cfg)
        state["profile"] = result.w
        return result.energy.total, result.w, result.energy.gradient_term

    return evaluate, state


def refine_root(
    bracket,
    params: ModelParams,
    cfg: Optional[ScanConfig] = None,
    evaluate: Optional[Callable[[float], Tuple[float, Optional[Profile], float]]] = None,
) -> RootResult:
    """Refine a sign-change bracket of J(c) by regula falsi.

    ``bracket`` is either a pair of floats or a pair of
    :class:`ScanSample`; sample endpoints reuse their stored J values
    and minimizers.  ``evaluate`` may replace the warm-started
    minimization chain (tests use synthetic curves); it must return
    ``(J, profile, gradient_term)``.

    A side retained too many times in a row triggers a bisection step.
    If solver noise leaves both endpoints with the same sign a
    :class:`~fhnpulse.errors.BracketLossError` carrying both endpoint
    records is raised.
    """
    cfg = cfg or ScanConfig()
    warm_state = None
    if evaluate is None:
        evaluate, warm_state = _default_evaluator(params, cfg)

    def unpack(end) -> Tuple[float, Optional[float], Optional[Profile], float]:
        if isinstance(end, ScanSample):
            return end.c, end.J, end.profile, end.gradient_term
        return float(end), None, None, 0.0

    a, Ja, wa, ga = unpack(bracket[0])
    b, Jb, wb, gb = unpack(bracket[1])
    evals = 0
    if Ja is None:
        Ja, wa, ga = evaluate(a)
        evals += 1
    if warm_state is not None and wb is None and wa is not None:
        warm_state["profile"] = wa
    if Jb is None:
        Jb, wb, gb = evaluate(b)
        evals += 1
    if Ja * Jb > 0.0:
        raise BracketLossError(
            f"no sign change on [{a}, {b}]: J={Ja:.3e}, {Jb:.3e}",
            lo=(a, Ja),
            hi=(b, Jb),
        )

    best = (a, Ja, wa, ga) if abs(Ja) <= abs(Jb) else (b, Jb, wb, gb)
    used_bisection = False
    stagnant_side = 0
    stagnant_count = 0

    for _ in range(cfg.max_root_iters):
        tol_j = cfg.tol_j_rel * max(best[3], 0.0)
        if abs(best[1]) <= tol_j and best[3] > 0.0:
            break
        if abs(b - a) <= cfg.tol_c:
            break
        if stagnant_count >= cfg.stagnation_limit:
            c_new = 0.5 * (a + b)
            used_bisection = True
            stagnant_count = 0
        else:
            c_new = (a * Jb - b * Ja) / (Jb - Ja)
            if not (min(a, b) < c_new < max(a, b)):
                c_new = 0.5 * (a + b)
                used_bisection = True
        if warm_state is not None:
            nearest = wa if abs(c_new - a) <= abs(c_new - b) else wb
            if nearest is not None:
                warm_state["profile"] = nearest
        J_new, w_new, g_new = evaluate(c_new)
        evals += 1
        if abs(J_new) < abs(best[1]) or best[3] == 0.0:
            best = (c_new, J_new, w_new, g_new)
        if J_new == 0.0:
            break
        if J_new * Ja > 0.0:
            a, Ja, wa = c_new, J_new, w_new
            stagnant_count = stagnant_count + 1 if stagnant_side == +1 else 1
            stagnant_side = +1
        elif J_new * Jb > 0.0:
            b, Jb, wb = c_new, J_new, w_new
            stagnant_count = stagnant_count + 1 if stagnant_side == -1 else 1
            stagnant_side = -1
        else:
            raise BracketLossError(
                f"bracket lost near c = {c_new}: endpoint signs agree",
                lo=(a, Ja),
                hi=(b, Jb),
            )

    return RootResult(
        c_root=best[0],
        J_at_root=best[1],
        profile=best[2],
        iterations=evals,
        used_bisection=used_bisection,
        gradient_term=best[3],
    )


def recheck_root_cold(
    root: RootResult, params: ModelParams, cfg: Optional[ScanConfig] = None
) -> RootResult:
    """Re-run the root speed from a cold start and flag continuation-only roots.

    A branch reachable without continuation reproduces J near zero from
    the generic cold start; one that is not (expected for the two-pulse
    strip branch) is flagged instead of failed.
    """
    cfg = cfg or ScanConfig()
    result, _ = _minimize_at(params, root.c_root, None, cfg)
    tol_j = 5.0 * cfg.tol_j_rel * max(result.energy.gradient_term, root.gradient_term)
    reachable = result.converged and abs(result.energy.total) <= tol_j
    return replace(root, continuation_only=not reachable)


def eta_ratio(c0: float, params: ModelParams) -> float:
    """Fast-pulse ratio 2 d c0^2 / (1 - 2 beta)^2; approaches 1 as d -> 0."""
    if not (c0 > 0.0):
        raise ValueError(f"c0 must be positive, got {c0}")
    return 2.0 * params.d * c0**2 / (1.0 - 2.0 * params.beta) ** 2
