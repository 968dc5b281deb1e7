"""Independent oracles gating every build.

Each check re-derives its expectation by a route independent of the
code path it validates: the dense oracle reassembles the elliptic
systems entry by entry with plain loops and solves them densely; the
gradient check differences the energy itself; convergence orders come
from manufactured solutions (with symbolic sources for the
time-dependent scheme); descent invariants are measured on short real
runs.  The ``verify`` command prints one report line per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from .descent import (
    DescentConfig,
    descent_step,
    initial_state,
    minimize,
    square_wave_guess,
)
from .elliptic import BandedSystem, assemble_radiation_system, solve_inhibitor, solve_system
from .energy import energy_breakdown, energy_derivative
from .errors import SolverFailureError
from .grids import Grid, Profile, inner_l2exp, norm_h1exp_sq, shift_grid
from .model import (
    DecayRates,
    ModelParams,
    inhibitor_decay_rates,
    update_decay_rates,
)
from .parabolic import PhysicalState, evolve_moving_window
from .speeds import GridSpec, ScanConfig, refine_root


@dataclass
class OracleReport:
    name: str
    value: float
    tolerance: float
    passed: bool
    details: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: value={self.value:.3e} tol={self.tolerance:.3e} {self.details}"


DENSE_LIMIT = 4000


def _dense_matrix_1d(n: int, h: float, kappa: float, rates: DecayRates) -> np.ndarray:
    """Loop-built dense matrix of the radiation solve (independent assembly)."""
    a = np.zeros((n, n))
    for j in range(1, n - 1):
        a[j, j - 1] = 1.0 / h**2 - 1.0 / (2.0 * h)
        a[j, j] = -2.0 / h**2 - kappa
        a[j, j + 1] = 1.0 / h**2 + 1.0 / (2.0 * h)
    a[0, 0] = -2.0 / h**2 - 2.0 * rates.pos / h + rates.pos - kappa
    a[0, 1] = 2.0 / h**2
    a[n - 1, n - 2] = 2.0 / h**2
    a[n - 1, n - 1] = -2.0 / h**2 + 2.0 * rates.neg / h + rates.neg - kappa
    return a


def _dense_rhs_1d(g: np.ndarray, h: float, rates: DecayRates) -> np.ndarray:
    rhs = -g.astype(float)
    rhs[0] += (g[0] / rates.neg) * (2.0 / h - 1.0)
    rhs[-1] -= (g[-1] / rates.pos) * (2.0 / h + 1.0)
    return rhs


def _dense_solution_2d(grid: Grid, kappa: float, g: np.ndarray, rates: DecayRates) -> np.ndarray:
    """Dense y-space assembly of the strip problem, one row per unknown."""
    nx, my = grid.n_x + 1, grid.n_y - 1
    n = nx * my
    if n > DENSE_LIMIT:
        raise ValueError(f"{n} unknowns exceed the dense oracle limit {DENSE_LIMIT}")
    h, hy = grid.h, grid.h_y

    def idx(j, k):
        return j * my + k

    a = np.zeros((n, n))
    rhs = np.zeros(n)
    for j in range(nx):
        for k in range(my):
            i = idx(j, k)
            diag = -2.0 / hy**2 - kappa
            if k > 0:
                a[i, idx(j, k - 1)] = 1.0 / hy**2
            if k < my - 1:
                a[i, idx(j, k + 1)] = 1.0 / hy**2
            gv = g[j, k + 1]
            rhs[i] = -gv
            if j == 0:
                a[i, idx(1, k)] = 2.0 / h**2
                diag += -2.0 / h**2 - 2.0 * rates.pos / h + rates.pos
                rhs[i] += (gv / rates.neg) * (2.0 / h - 1.0)
            elif j == nx - 1:
                a[i, idx(nx - 2, k)] = 2.0 / h**2
                diag += -2.0 / h**2 + 2.0 * rates.neg / h + rates.neg
                rhs[i] -= (gv / rates.pos) * (2.0 / h + 1.0)
            else:
                a[i, idx(j - 1, k)] = 1.0 / h**2 - 1.0 / (2.0 * h)
                a[i, idx(j + 1, k)] = 1.0 / h**2 + 1.0 / (2.0 * h)
                diag += -2.0 / h**2
            a[i, i] = diag
    sol = np.linalg.solve(a, rhs)
    out = np.zeros(grid.shape)
    out[:, 1:-1] = sol.reshape(nx, my)
    return out


def dense_oracle_solve(system: BandedSystem) -> Profile:
    """Solve an assembled system by an independent dense route.

    Radiation systems are reassembled from their metadata with explicit
    loops; raw systems (tests) have their stored bands densified.
    """
    if system.unknown_count > DENSE_LIMIT:
        raise ValueError(
            f"{system.unknown_count} unknowns exceed the dense oracle limit {DENSE_LIMIT}"
        )
    grid = system.grid
    if system.kind == "raw":
        modes, _, n = system.bands.shape
        sols = []
        for m in range(modes):
            a = (
                np.diag(system.bands[m, 1, :])
                + np.diag(system.bands[m, 0, 1:], 1)
                + np.diag(system.bands[m, 2, :-1], -1)
            )
            sols.append(np.linalg.solve(a, system.rhs[m]))
        flat = np.stack(sols)
        return Profile(grid, flat[0] if grid.dim == 1 else flat)
    rates = DecayRates(system.rate_neg, system.rate_pos)
    if grid.dim == 1:
        n = grid.n_x + 1
        a = _dense_matrix_1d(n, grid.h, system.kappa, rates)
        sol = np.linalg.solve(a, _dense_rhs_1d(system.source, grid.h, rates))
        return Profile(grid, sol)
    return Profile(grid, _dense_solution_2d(grid, system.kappa, system.source, rates))


def robin_residuals(system: BandedSystem, solution: Profile) -> tuple:
    """Substitute a solution back into the discrete boundary closure.

    Rebuilds the ghost value from the Robin condition and evaluates the
    interior stencil at each end; for a converged solve both residuals
    sit at the linear-solve level, far below the truncation error.
    """
    grid = system.grid
    h = grid.h
    kappa = system.kappa
    rates = DecayRates(system.rate_neg, system.rate_pos)
    y = solution.samples if grid.dim == 1 else solution.samples[:, 1:-1].T
    g = system.source if grid.dim == 1 else None
    if grid.dim == 2:
        # check each interior transverse line against its own closure
        from .elliptic import _mode_kappas, _to_modes

        kappas = _mode_kappas(grid, kappa)
        g_modes = _to_modes(grid, system.source)
        res_a = []
        res_b = []
        for m, (kap, ym, gm) in enumerate(zip(kappas, y, g_modes)):
            ra, rb = _robin_residual_line(ym, gm, h, kap, rates)
            res_a.append(ra)
            res_b.append(rb)
        return float(np.max(np.abs(res_a))), float(np.max(np.abs(res_b)))
    return _robin_residual_line(y, g, h, kappa, rates)


def _robin_residual_line(y, g, h, kappa, rates):
    ghost_left = y[1] - 2.0 * h * (rates.pos * y[0] + g[0] / rates.neg)
    res_a = (
        (y[1] - 2.0 * y[0] + ghost_left) / h**2
        + (y[1] - ghost_left) / (2.0 * h)
        - kappa * y[0]
        + g[0]
    )
    ghost_right = y[-2] + 2.0 * h * (rates.neg * y[-1] + g[-1] / rates.pos)
    res_b = (
        (ghost_right - 2.0 * y[-1] + y[-2]) / h**2
        + (ghost_right - y[-2]) / (2.0 * h)
        - kappa * y[-1]
        + g[-1]
    )
    return float(res_a), float(res_b)


def selfadjoint_residual(u1: Profile, u2: Profile, params: ModelParams) -> OracleReport:
    """Relative asymmetry of the inhibitor map in the weighted product."""
    v2 = solve_inhibitor(u2, params)
    v1 = solve_inhibitor(u1, params)
    lhs = inner_l2exp(u1, v2)
    rhs = inner_l2exp(v1, u2)
    scale = math.sqrt(inner_l2exp(u1, u1)) * math.sqrt(inner_l2exp(u2, u2))
    value = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return OracleReport(
        name="selfadjoint_residual",
        value=value,
        tolerance=1e-6,
        passed=value <= 1e-6,
    )


def fd_gradient_check(
    w: Profile, phi: Profile, params: ModelParams, eps: float
) -> OracleReport:
    """Directional derivative against a central difference of the energy.

    The inhibitor solve is redone at each perturbed point, so this
    checks the derivative of the functional actually evaluated.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    v = solve_inhibitor(w, params)
    derivative = energy_derivative(w, v, phi, params)

    def j_at(t: float) -> float:
        wp = Profile(w.grid, w.samples + t * phi.samples)
        vp = solve_inhibitor(wp, params)
        return energy_breakdown(wp, vp, params).total
    j0 = energy_breakdown(w, v, params).total
    fd = (j_at(eps) - j_at(-eps)) / (2.0 * eps)
    value = abs(derivative - fd) / max(1.0, abs(j0))
    return OracleReport(
        name="fd_gradient_check",
        value=value,
        tolerance=1e-6,
        passed=value <= 1e-6,
        details=f"eps={eps:g}",
    )


def _order_from_errors(hs: Sequence[float], errors: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errors)), 1)[0])


def _inhibitor_case(n_points: Sequence[int]) -> tuple:
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=2.0)
    c2 = params.c**2
    hs, errors = [], []
    for n in n_points:
        grid = Grid(origin=-10.0, h=20.0 / n, n_x=n)
        x = grid.x
        exact = np.exp(-(x**2))
        d1 = -2.0 * x * exact
        d2 = (4.0 * x**2 - 2.0) * exact
        w = -c2 * (d2 + d1) + params.gamma * exact
        v = solve_inhibitor(Profile(grid, w), params)
        hs.append(grid.h)
        errors.append(float(np.max(np.abs(v.samples - exact))))
    return hs, errors


def _update_case(n_points: Sequence[int]) -> tuple:
    rates = update_decay_rates(ModelParams(d=1e-3, gamma=1.0 / 16.0, beta=0.25, c=1.0))
    hs, errors = [], []
    for n in n_points:
        grid = Grid(origin=-18.0, h=36.0 / n, n_x=n)
        x = grid.x
        s = 1.0 / np.cosh(x)
        t = np.tanh(x)
        exact = s
        ghat = 2.0 * s**3 + s * t  # -(exact'' ) - exact' + exact
        system = assemble_radiation_system(grid, 1.0, ghat, rates)
        y = solve_system(system)
        hs.append(grid.h)
        errors.append(float(np.max(np.abs(y - exact))))
    return hs, errors


@lru_cache(maxsize=1)
def _mms_fields():
    """Manufactured traveling bumps and their symbolic source terms."""
    import sympy as sym

    x, t = sym.symbols("x t")
    d, gamma, beta, c = sym.Rational(1, 20), sym.Rational(1, 16), sym.Rational(1, 4), 2
    u = sym.Rational(4, 5) * sym.exp(-((x - 10 - c * t) ** 2) / 2)
    v = sym.Rational(1, 2) * sym.exp(-((x - 9 - c * t) ** 2) / 3)
    f = u * (u - beta) * (1 - u)
    s_u = sym.diff(u, t) - sym.diff(u, x, 2) - (f - v) / d
    s_v = sym.diff(v, t) - sym.diff(v, x, 2) - u + gamma * v
    mods = ["numpy"]
    return (
        sym.lambdify((x, t), u, mods),
        sym.lambdify((x, t), v, mods),
        sym.lambdify((x, t), s_u, mods),
        sym.lambdify((x, t), s_v, mods),
    )


def _parabolic_case(n_points: Sequence[int]) -> tuple:
    u_exact, v_exact, s_u, s_v = _mms_fields()
    params = ModelParams(d=0.05, gamma=1.0 / 16.0, beta=0.25, c=2.0)
    T = 1.0
    hs, errors = [], []
    for n in n_points:
        grid = Grid(origin=0.0, h=20.0 / n, n_x=n)
        x = grid.x
        state = PhysicalState(
            u=Profile(grid, u_exact(x, 0.0)), v=Profile(grid, v_exact(x, 0.0))
        )
        final = evolve_moving_window(
            state, params, params.c, T, source_u=s_u, source_v=s_v
        )
        xf = final.u.grid.x
        err = float(np.max(np.abs(final.u.samples - u_exact(xf, final.time))))
        hs.append(grid.h)
        errors.append(err)
    return hs, errors


_CASES = {
    "inhibitor": _inhibitor_case,
    "update": _update_case,
    "parabolic": _parabolic_case,
}


def convergence_order(problem: str, grids: Sequence[int]) -> OracleReport:
    """Least-squares order of a refinement chain for a manufactured case.

    ``problem`` is one of ``inhibitor``, ``update``, ``parabolic``;
    ``grids`` lists at least three x-interval counts in refinement
    order.  The time step of the parabolic case is tied to h by the
    moving window, so that chain refines space and time together.
    """
    if problem not in _CASES:
        raise ValueError(f"unknown manufactured case {problem!r}")
    if len(grids) < 3:
        raise ValueError("need at least 3 grids for an order estimate")
    hs, errors = _CASES[problem](grids)
    slope = _order_from_errors(hs, errors)
    return OracleReport(
        name=f"convergence_order[{problem}]",
        value=slope,
        tolerance=1.9,
        passed=1.9 <= slope <= 2.1,
        details=f"errors={['%.2e' % e for e in errors]}",
    )


def _bump(x, center, width):
    arg = (x - center) / width
    out = np.exp(-1.0 / np.maximum(1e-12, 1.0 - arg**2))
    out[np.abs(arg) >= 1.0] = 0.0
    return out


def _test_profiles(h: float = 0.01):
    grid = Grid(origin=-20.0, h=h, n_x=int(round(30.0 / h)))
    x = grid.x
    u1 = Profile(grid, _bump(x, -6.0, 2.5))
    u2 = Profile(grid, _bump(x, -2.0, 2.0))
    return grid, u1, u2


def dense_agreement_checks() -> List[OracleReport]:
    """Banded/transform solves against the loop-assembled dense oracle."""
    reports = []
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0)
    grid = Grid(origin=-15.0, h=0.15, n_x=200)
    x = grid.x
    w = Profile(grid, np.exp(-((x + 5.0) ** 2)))
    c2 = params.c**2
    system = assemble_radiation_system(
        grid, params.gamma / c2, w.samples / c2, inhibitor_decay_rates(params)
    )
    banded = solve_system(system)
    dense = dense_oracle_solve(system)
    err = float(np.max(np.abs(banded - dense.samples)))
    reports.append(
        OracleReport("dense_agreement[inhibitor]", err, 1e-10, err <= 1e-10)
    )

    v = Profile(grid, banded)
    what = params.d * c2 * w.samples - v.samples + w.samples * 0.0
    system2 = assemble_radiation_system(grid, 1.0, what, update_decay_rates(params))
    banded2 = solve_system(system2)
    dense2 = dense_oracle_solve(system2)
    err2 = float(np.max(np.abs(banded2 - dense2.samples)))
    reports.append(OracleReport("dense_agreement[update]", err2, 1e-10, err2 <= 1e-10))

    params2 = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0, dim=2, L=1.0)
    ell = params2.strip_half_width
    grid2 = Grid(origin=-12.0, h=0.3, n_x=60, dim=2, half_width=ell, n_y=10)
    X, Y = np.meshgrid(grid2.x, grid2.y, indexing="ij")
    w2 = np.exp(-((X + 4.0) ** 2)) * np.sin(np.pi * (Y + ell) / (2.0 * ell))
    w2[:, 0] = 0.0
    w2[:, -1] = 0.0
    system3 = assemble_radiation_system(
        grid2, params2.gamma / c2, w2 / c2, inhibitor_decay_rates(params2)
    )
    banded3 = solve_system(system3)
    dense3 = dense_oracle_solve(system3)
    err3 = float(np.max(np.abs(banded3 - dense3.samples)))
    reports.append(OracleReport("dense_agreement[strip]", err3, 1e-10, err3 <= 1e-10))
    return reports


def shift_scaling_check() -> OracleReport:
    """Translation must scale the squared norm by exactly exp(offset)."""
    rng = np.random.default_rng(7)
    grid = Grid(origin=-30.0, h=0.05, n_x=800)
    worst = 0.0
    for _ in range(5):
        p = Profile(grid, rng.standard_normal(grid.shape) * _bump(grid.x, -10.0, 12.0))
        for a in (-2.5, -0.3, 0.7, 3.2):
            lhs = norm_h1exp_sq(shift_grid(p, a))
            rhs = math.exp(a) * norm_h1exp_sq(p)
            ulps = abs(lhs - rhs) / np.spacing(max(abs(lhs), abs(rhs)))
            worst = max(worst, ulps)
    return OracleReport("shift_scaling_ulps", worst, 8.0, worst <= 8.0)


def descent_invariant_checks(steps: int = 100) -> List[OracleReport]:
    """Manifold and monotonicity invariants over real descent steps."""
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0)
    grid = GridSpec(h=0.02, domain_length=120.0).build(params)
    cfg = DescentConfig()
    state = initial_state(square_wave_guess(grid), params, cfg)
    worst_norm = abs(norm_h1exp_sq(state.w) - 2.0)
    monotone = True
    positive_runs_ok = True
    last = state.energy.total
    for _ in range(steps):
        state = descent_step(state, params, cfg)
        worst_norm = max(worst_norm, abs(norm_h1exp_sq(state.w) - 2.0))
        if state.energy.total > last:
            monotone = False
        last = state.energy.total
        runs = np.flatnonzero(
            np.diff(np.concatenate(([0], (state.w.samples > 0).astype(int), [0]))) == 1
        ).size
        if runs > 1:
            positive_runs_ok = False
    return [
        OracleReport("manifold_norm_drift", worst_norm, 1e-10, worst_norm <= 1e-10),
        OracleReport(
            "monotone_energy", 0.0 if monotone else 1.0, 0.5, monotone, f"{steps} steps"
        ),
        OracleReport(
            "single_positive_interval",
            0.0 if positive_runs_ok else 1.0,
            0.5,
            positive_runs_ok,
        ),
    ]


def order_sandwich_check(c: float = 5.0, d1: float = 3e-4, d2: float = 5e-4) -> OracleReport:
    """Monotonicity bound J(c;d1) <= J(c;d2) <= J(c;d1) + (d2-d1)c^2.

    Evaluated on computed minimizers of the same mesh, with a small
    numerical slack on both sides.
    """
    spec = GridSpec(h=0.02, domain_length=120.0)
    cfg = DescentConfig(delta1=1e-9)
    js = {}
    for d in (d1, d2):
        params = ModelParams(d=d, gamma=1.0 / 16.0, beta=0.25, c=c)
        grid = spec.build(params)
        result = minimize(square_wave_guess(grid), params, cfg)
        js[d] = result.energy.total
    slack = 1e-6 * c**2
    lower_ok = js[d1] <= js[d2] + slack
    upper_ok = js[d2] <= js[d1] + (d2 - d1) * c**2 + slack
    margin = max(js[d1] - js[d2], js[d2] - js[d1] - (d2 - d1) * c**2)
    return OracleReport(
        name="energy_order_in_d",
        value=margin,
        tolerance=slack,
        passed=lower_ok and upper_ok,
        details=f"J(d1)={js[d1]:.6e} J(d2)={js[d2]:.6e}",
    )


def zero_equilibrium_check(steps: int = 50) -> OracleReport:
    """The ambient zero state must be a fixed point of the evolution."""
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0)
    grid = Grid(origin=0.0, h=0.02, n_x=400)
    state = PhysicalState(u=Profile.zeros(grid), v=Profile.zeros(grid))
    final = evolve_moving_window(state, params, params.c, steps * grid.h / params.c)
    value = float(np.max(np.abs(final.u.samples)) + np.max(np.abs(final.v.samples)))
    return OracleReport("zero_equilibrium", value, 0.0, value == 0.0)


def regula_falsi_check() -> OracleReport:
    """Regula falsi must hit the root of an affine curve in one step."""
    root = 3.7

    def affine(c):
        return 2.5 * (c - root), None, 1.0

    result = refine_root((1.0, 10.0), params=None, cfg=ScanConfig(), evaluate=affine)
    err = abs(result.c_root - root)
    return OracleReport(
        "regula_falsi_affine",
        err,
        1e-12,
        err <= 1e-12,
        details=f"evals={result.iterations}",
    )


def gradient_checks() -> List[OracleReport]:
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0)
    grid = Grid(origin=-20.0, h=0.0025, n_x=int(round(28.0 / 0.0025)))
    rng = np.random.default_rng(3)
    x = grid.x
    w = Profile(grid, 0.8 * _bump(x, -7.0, 3.0) - 0.3 * _bump(x, -12.0, 2.0))
    phi = Profile(grid, rng.uniform(-1, 1) * _bump(x, -8.0, 2.0) + 0.5 * _bump(x, -4.5, 1.5))
    base = fd_gradient_check(w, phi, params, eps=1e-4)
    finer = fd_gradient_check(w, phi, params, eps=5e-5)
    ratio = base.value / finer.value if finer.value > 0 else float("inf")
    richardson = OracleReport(
        name="fd_gradient_richardson",
        value=ratio,
        tolerance=3.0,
        passed=3.0 <= ratio <= 5.0,
        details="expected ~4x per eps halving",
    )
    return [base, richardson]


def run_default_suite() -> List[OracleReport]:
    """All build-gating checks; the full set runs in well under a minute."""
    reports: List[OracleReport] = []
    reports.append(shift_scaling_check())
    reports.extend(dense_agreement_checks())
    _, u1, u2 = _test_profiles()
    params = ModelParams(d=5e-4, gamma=1.0 / 16.0, beta=0.25, c=5.0)
    reports.append(selfadjoint_residual(u1, u2, params))
    reports.extend(gradient_checks())
    reports.append(convergence_order("inhibitor", (200, 400, 800)))
    reports.append(convergence_order("update", (200, 400, 800)))
    reports.append(convergence_order("parabolic", (100, 200, 400)))
    reports.extend(descent_invariant_checks())
    reports.append(order_sandwich_check())
    reports.append(zero_equilibrium_check())
    reports.append(regula_falsi_check())
    return reports
