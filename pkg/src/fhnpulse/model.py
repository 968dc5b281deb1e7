"""Model constants, the cubic nonlinearity, its potential, and boundary decay rates.

The reaction term is f(u) = u (u - beta) (1 - u) with 0 < beta < 1/2, and
gamma is restricted to (0, 4/(1-beta)^2) so the rest state at the origin
is the only spatially constant equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Physical constants plus the wave-speed parameter of the moving frame.

    ``d`` is the activator/inhibitor diffusivity ratio, ``L`` the strip
    half-width in physical coordinates (dim=2 only).  In solver
    coordinates the strip widens to half-width ``c*L``.
    """

    d: float
    gamma: float
    beta: float
    c: float
    dim: int = 1
    L: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.beta < 0.5):
            raise ValueError(f"beta must lie in (0, 1/2), got {self.beta}")
        gmax = 4.0 / (1.0 - self.beta) ** 2
        if not (0.0 < self.gamma < gmax):
            raise ValueError(
                f"gamma must lie in (0, {gmax:.6g}) for beta={self.beta}, got {self.gamma}"
            )
        if not (self.d > 0.0):
            raise ValueError(f"d must be positive, got {self.d}")
        if not (self.c > 0.0):
            raise ValueError(f"c must be positive, got {self.c}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.dim == 2 and not (self.L > 0.0):
            raise ValueError(f"strip half-width L must be positive, got {self.L}")

    @property
    def strip_half_width(self) -> float:
        """Half-width of the strip in solver coordinates (dim=2)."""
        if self.dim != 2:
            raise ValueError("strip_half_width is defined only for dim=2")
        return self.c * self.L


def reaction(xi, beta: float):
    """Cubic reaction term xi (xi - beta) (1 - xi); vectorized."""
    return xi * (xi - beta) * (1.0 - xi)


def reaction_derivative(xi, beta: float):
    """d/dxi of the cubic reaction term; vectorized."""
    return -3.0 * xi * xi + 2.0 * (1.0 + beta) * xi - beta


def reaction_potential(xi, beta: float):
    """Potential whose negative derivative is the reaction term.

    Equals xi^4/4 - (1+beta) xi^3/3 + beta xi^2/2, vanishing at 0.
    """
    return xi**2 * (xi**2 / 4.0 - (1.0 + beta) * xi / 3.0 + beta / 2.0)


def box_lower_bound(gamma: float, beta: float, tol: float = 1e-10) -> float:
    """Smallest M >= 1 with f(xi) >= 1/gamma for every xi <= -M.

    The cubic is strictly decreasing on the negative axis and grows
    without bound to the left, so f(-m) = 1/gamma has a unique positive
    root; bisection to absolute tolerance ``tol``, clamped to >= 1.
    The bound is diagnostic only; the descent never projects onto it.
    """
    target = 1.0 / gamma

    def g(m):
        return reaction(-m, beta) - target

    hi = 1.0
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket the box bound")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return max(1.0, 0.5 * (lo + hi))


@dataclass(frozen=True)
class DecayRates:
    """Characteristic roots of r^2 + r - kappa = 0 with kappa > 0.

    ``neg < 0 < pos``; the two exponential modes e^{neg x} and e^{pos x}
    of the constant-coefficient tail equation.  Radiation boundary
    conditions are built from them.
    """

    neg: float
    pos: float

    def __post_init__(self):
        if not (self.neg < 0.0 < self.pos):
            raise ValueError(f"decay rates must straddle zero, got {self}")


def _rates_from_kappa(kappa: float) -> DecayRates:
    s = math.sqrt(1.0 + 4.0 * kappa)
    return DecayRates(neg=0.5 * (-1.0 - s), pos=0.5 * (-1.0 + s))


def _transverse_shift(params: ModelParams) -> float:
    """First transverse mode contribution pi^2 / (4 ell^2) on a strip."""
    if params.dim == 1:
        return 0.0
    ell = params.strip_half_width
    return math.pi**2 / (4.0 * ell**2)


def inhibitor_decay_rates(params: ModelParams) -> DecayRates:
    """Tail decay rates of the inhibitor solve (kappa = gamma/c^2 plus mode shift)."""
    return _rates_from_kappa(params.gamma / params.c**2 + _transverse_shift(params))


def update_decay_rates(params: ModelParams) -> DecayRates:
    """Tail decay rates of the descent-update solve (kappa = 1 plus mode shift).

    On the line these are the golden-ratio pair (-(1+sqrt 5)/2, (sqrt 5 - 1)/2).
    """
    return _rates_from_kappa(1.0 + _transverse_shift(params))
