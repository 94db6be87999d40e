"""Analytic flow fixtures used for calibration and classifier tests.

Two closed-form steady flows on the strip:

* parallel shear: u depends on x2 only, v = (g(x2), 0), zero curvature;
* a cellular flow with stream function  u = sin(x1) sin(pi x2), which
  solves  -Lap u = (1 + pi^2) u,  i.e. the potential is
  F(s) = (1 + pi^2) s^2 / 2.  Its velocity attains every direction, making
  it the full-circle reference for the angle classifier, and its known
  smoothness makes it the yardstick for the O(h^2) convergence studies.
"""

from __future__ import annotations

import numpy as np

from .strip2d import Field2D

CELL_COEFF = 1.0 + np.pi**2

# Recommended half-length for the cellular fixture: the trusted window
# |x1| <= L - 2 then spans a bit more than one full 2*pi cell period, so
# the sampled direction set genuinely covers the circle.
CELL_L = 9.0


def cell_potential(s):
    """Potential of the cellular fixture: F(s) = (1 + pi^2) s^2 / 2."""
    return 0.5 * CELL_COEFF * np.asarray(s) ** 2


def shear_field(L: float, nx: int, ny: int, profile=None) -> Field2D:
    """Stream function of a shear flow: u(x1, x2) = U(x2) (default x2)."""
    x2 = np.linspace(0.0, 1.0, ny + 1)
    prof = x2 if profile is None else np.asarray([profile(t) for t in x2], dtype=float)
    vals = np.tile(prof, (nx + 1, 1))
    return Field2D(vals, L, prof, prof, (prof[0], prof[-1]))


def cell_field(L: float, nx: int, ny: int) -> Field2D:
    """The cellular stream function sampled on the grid."""
    x1 = np.linspace(-L, L, nx + 1)
    x2 = np.linspace(0.0, 1.0, ny + 1)
    vals = np.sin(x1)[:, None] * np.sin(np.pi * x2)[None, :]
    return Field2D(vals, L, vals[0, :].copy(), vals[-1, :].copy(), (0.0, 0.0))


def cell_velocity_exact(x1: np.ndarray, x2: np.ndarray):
    """Exact velocity of the cellular flow on a tensor grid."""
    v1 = -np.pi * np.sin(x1)[:, None] * np.cos(np.pi * x2)[None, :]
    v2 = np.cos(x1)[:, None] * np.sin(np.pi * x2)[None, :]
    return v1, v2
