"""The weighted energy functional, its directional derivative, and the multiplier.

For a profile w with inhibitor response v the energy is

    J(w) = integral e^x { (d c^2 / 2) |grad w|^2 + (1/2) w v + F(w) },

with F the quartic potential of the cubic reaction term.  The
directional derivative along phi is

    J'(w) phi = integral e^x { d c^2 grad(w).grad(phi) + v phi - f(w) phi },

and the multiplier mu = -J'(w)w / 2 makes the descent direction tangent
to the constraint manifold ||w||^2 = 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import (
    Profile,
    _cell_sum,
    _corner_mean,
    _grad_cells,
    _require_same_grid,
)
from .model import ModelParams, reaction, reaction_potential


@dataclass(frozen=True)
class EnergyBreakdown:
    """The three quadrature terms of the energy and their sum."""

    gradient_term: float
    nonlocal_term: float
    potential_term: float
    total: float


def energy_breakdown(w: Profile, v: Profile, params: ModelParams) -> EnergyBreakdown:
    """Evaluate the energy of ``w`` given its inhibitor response ``v``."""
    grid = _require_same_grid(w, v)
    grad = _cell_sum(grid, _grad_cells(grid, w.samples, w.samples))
    gradient_term = 0.5 * params.d * params.c**2 * grad
    nonlocal_term = 0.5 * _cell_sum(grid, _corner_mean(grid, w.samples * v.samples))
    potential_term = _cell_sum(
        grid, _corner_mean(grid, reaction_potential(w.samples, params.beta))
    )
    return EnergyBreakdown(
        gradient_term=gradient_term,
        nonlocal_term=nonlocal_term,
        potential_term=potential_term,
        total=gradient_term + nonlocal_term + potential_term,
    )


def energy_derivative(
    w: Profile, v: Profile, phi: Profile, params: ModelParams
) -> float:
    """Directional derivative of the energy at ``w`` along ``phi``."""
    grid = _require_same_grid(w, v)
    _require_same_grid(w, phi)
    cells = params.d * params.c**2 * _grad_cells(grid, w.samples, phi.samples)
    zeroth = (v.samples - reaction(w.samples, params.beta)) * phi.samples
    cells += _corner_mean(grid, zeroth)
    return _cell_sum(grid, cells)


def constraint_multiplier(w: Profile, v: Profile, params: ModelParams) -> float:
    """Multiplier mu = -J'(w)w / 2 of the norm constraint."""
    return -0.5 * energy_derivative(w, v, w, params)
