"""Smooth cutoff and the quartic nonlinearity family driving both strip problems.

The cutoff chi is a C-infinity ramp built from the classical exp(-1/t) bump:
it vanishes on (-inf, 1], equals s - 1 on [2, inf), and blends smoothly in
between while staying inside the wedge  s - 2 <= chi(s) <= s - 1  with
chi' > 0 for s > 1.  On top of it sit the potentials

    ramp mode (boundary values 0, 1):   F(s) = chi(s)^3 - lam * chi(s)^4
    zero mode (boundary values 0, 0):   F(s) = 2 s + chi(s)^3 - lam * chi(s)^4

whose derivatives f = F' and f' = F'' feed the 1D and 2D Newton solvers.
All derivatives are coded analytically so Newton stays quadratically
convergent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Guard for exp(-1/t): below this t the bump is numerically zero anyway.
_ETA_TINY = 1e-12

CHI_CONSTRUCTION = "exp-bump-blend[1,2]: chi(s) = (s-1) * eta(s-1) / (eta(s-1) + eta(2-s))"


class Mode(enum.Enum):
    """Which boundary-value family is being solved."""

    RAMP_C1 = "ramp"  # psi(0)=0, psi(1)=1, trivial solution t
    ZERO_C0 = "zero"  # psi(0)=0, psi(1)=0, trivial solution t(1-t)


@dataclass
class ProblemSpec:
    """Mode, coupling strength and every grid/tolerance knob in one place."""

    mode: Mode
    lam: float = 1.0
    # 1D discretization (m cells, m+1 nodes on [0,1])
    m: int = 2048
    # Final refinement grid for the extracted pair.  The discrete first
    # integral of the steep nontrivial minimizer drifts by about 6e3 * h^2,
    # so certifying conservation at 1e-6 needs h^2 below ~1.7e-10.
    m_refine: int = 131072
    tol_residual: float = 1e-10
    tol_energy: float = 1e-8
    max_iter: int = 200
    # lambda bracketing / bisection
    delta_margin: float = 1e-4
    tol_lambda: float = 1e-6
    scan_k_lo: int = -10
    scan_k_hi: int = 20
    # 2D strip discretization
    hx: float = 1.0 / 64.0
    hy: float = 1.0 / 128.0
    L_schedule: tuple = (4.0, 8.0, 16.0)
    tol_cont: float = 1e-4
    tol_residual2d: float = 1e-8
    max_sweeps: int = 200
    # flow verification
    eps_stag_rel: float = 1e-5
    trusted_margin: float = 2.0

    def __post_init__(self):
        # Accept the enum's string value ("ramp"/"zero") so configs and CLI
        # arguments construct specs directly; a typo raises rather than
        # silently selecting a mode.
        self.mode = Mode(self.mode)
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.m < 2:
            raise ValueError("need at least 2 cells on [0,1]")

    @property
    def boundary_values(self) -> tuple:
        return (0.0, 1.0) if self.mode is Mode.RAMP_C1 else (0.0, 0.0)

    @property
    def forcing(self) -> float:
        """Linear forcing constant in the potential: 0 (ramp) or 2 (zero)."""
        return 0.0 if self.mode is Mode.RAMP_C1 else 2.0

    @property
    def threshold(self) -> float:
        """Energy of the trivial solution, I(phi)."""
        return 0.5 if self.mode is Mode.RAMP_C1 else -1.0 / 6.0

    def trivial_profile(self, t: np.ndarray) -> np.ndarray:
        """The explicit solution phi: t for the ramp family, t(1-t) for zero."""
        t = np.asarray(t, dtype=float)
        return t.copy() if self.mode is Mode.RAMP_C1 else t * (1.0 - t)

    def escape_direction(self, t: np.ndarray) -> np.ndarray:
        """Interior bump used to amplify multistart seeds past the trivial basin."""
        t = np.asarray(t, dtype=float)
        return np.sin(np.pi * t) if self.mode is Mode.RAMP_C1 else t * (1.0 - t)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        import dataclasses

        return dataclasses.replace(self, lam=float(lam))


def _eta(t):
    """exp(-1/t) for t > 0, extended by 0; the standard C-infinity bump edge."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _ETA_TINY
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _eta_p(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _ETA_TINY
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / tp**2
    return out


def _eta_pp(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _ETA_TINY
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) * (1.0 - 2.0 * tp) / tp**4
    return out


def _blend_pieces(s):
    """Return (w, w', w'') of the partition-of-unity weight on the open blend zone."""
    a = s - 1.0
    b = 2.0 - s
    A, B = _eta(a), _eta(b)
    Ap, Bp = _eta_p(a), -_eta_p(b)
    App, Bpp = _eta_pp(a), _eta_pp(b)
    den = A + B
    w = A / den
    num1 = Ap * B - A * Bp
    wp = num1 / den**2
    wpp = (App * B - A * Bpp) / den**2 - 2.0 * num1 * (Ap + Bp) / den**3
    return w, wp, wpp


def _chi_all(s):
    """chi and its first two derivatives, vectorized over s."""
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    c = np.zeros_like(s)
    cp = np.zeros_like(s)
    cpp = np.zeros_like(s)
    hi = s >= 2.0
    c[hi] = s[hi] - 1.0
    cp[hi] = 1.0
    mid = (s > 1.0) & (s < 2.0)
    if np.any(mid):
        sm = s[mid]
        w, wp, wpp = _blend_pieces(sm)
        c[mid] = (sm - 1.0) * w
        cp[mid] = w + (sm - 1.0) * wp
        cpp[mid] = 2.0 * wp + (sm - 1.0) * wpp
    if scalar:
        return c[0], cp[0], cpp[0]
    return c, cp, cpp


def chi(s):
    """Smooth cutoff: 0 for s <= 1, s - 1 for s >= 2, monotone C-infinity blend between."""
    return _chi_all(s)[0]


def chi_prime(s):
    return _chi_all(s)[1]


def chi_pprime(s):
    return _chi_all(s)[2]


def F(s, spec: ProblemSpec):
    """Total potential for the given mode (includes the linear forcing term)."""
    c = chi(s)
    base = c**3 - spec.lam * c**4
    if spec.mode is Mode.ZERO_C0:
        return 2.0 * np.asarray(s, dtype=float) + base
    return base


def f(s, spec: ProblemSpec):
    """f = F', the right-hand side of -psi'' = f(psi)."""
    c, cp, _ = _chi_all(s)
    val = cp * (3.0 * c**2 - 4.0 * spec.lam * c**3)
    return val + spec.forcing


def f_prime(s, spec: ProblemSpec):
    """f' = F'', the Newton linearization weight."""
    c, cp, cpp = _chi_all(s)
    return cpp * (3.0 * c**2 - 4.0 * spec.lam * c**3) + cp**2 * (6.0 * c - 12.0 * spec.lam * c**2)
