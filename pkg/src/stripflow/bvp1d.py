"""Global minimization of the 1D strip energies and the lambda-bisection.

For a profile psi on [0,1] with the mode's boundary values, the energy is

    I(psi) = sum_cells h/2 * |forward difference|^2  -  trapz(F(psi))

so its critical points are exactly the 3-point discrete Euler-Lagrange
system  (psi_{j-1} - 2 psi_j + psi_{j+1})/h^2 + f(psi_j) = 0.  A damped
Newton iteration with an energy safeguard finds local minimizers; a fixed
multistart family (the trivial solution plus amplified bumps) hunts for the
nontrivial basin.  The coupling lambda is then bisected to the value where
the nontrivial minimizer ties the trivial one in energy, producing the
ordered minimizer pair that feeds the 2D strip construction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from . import nonlinearity as nl
from .errors import BracketNotFound, NonConvergence, PairNotOrdered

# Amplification factors for the multistart seeds phi + mu * w.
SEED_AMPLITUDES = (2.0, 5.0, 10.0, 20.0, 40.0)

# Profiles closer than this in sup norm are considered the same basin.
_BASIN_TOL = 1e-6


@dataclass
class Profile1D:
    """Sampled function on the uniform grid t_j = j/m with pinned endpoints."""

    values: np.ndarray
    boundary: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 3:
            raise ValueError("profile needs at least 3 nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile contains non-finite values")
        self.values = self.values.copy()
        self.values[0] = self.boundary[0]
        self.values[-1] = self.boundary[1]

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class MinimizerPair:
    """The ordered pair (phi, phibar) of tied global minimizers at lambda*."""

    phi: Profile1D
    phibar: Profile1D
    lambda_star: float
    energy: float
    cauchy_diffs: tuple = ()
    basins: tuple = ()


@dataclass
class Basin:
    profile: Profile1D
    energy: float

    @property
    def sup_norm(self) -> float:
        return self.profile.sup_norm()


@dataclass
class GlobalMinResult:
    m_lambda: float
    argmin: Profile1D
    basins: list


@dataclass
class LambdaStarResult:
    value: float  # largest lambda known to satisfy the predicate
    lo: float
    hi: float
    scan: list  # rows (lambda, m_lambda, basin_count, sup_norms)


def trivial_profile(spec: nl.ProblemSpec) -> Profile1D:
    t = np.linspace(0.0, 1.0, spec.m + 1)
    return Profile1D(spec.trivial_profile(t), spec.boundary_values)


def energy_1d(psi: Profile1D, spec: nl.ProblemSpec) -> float:
    """Forward-difference gradient energy plus trapezoid potential."""
    if psi.boundary != spec.boundary_values:
        raise ValueError(
            f"profile boundary {psi.boundary} does not match mode boundary {spec.boundary_values}"
        )
    return _energy_values(psi.values, psi.h, spec)


def _energy_values(v: np.ndarray, h: float, spec: nl.ProblemSpec) -> float:
    grad = np.diff(v) / h
    kin = 0.5 * float(np.sum(grad * grad)) * h
    pot = float(np.trapezoid(nl.F(v, spec), dx=h))
    return kin - pot


def residual_1d(psi: Profile1D, spec: nl.ProblemSpec) -> np.ndarray:
    """Discrete Euler-Lagrange residual at the interior nodes."""
    v, h = psi.values, psi.h
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2 + nl.f(v[1:-1], spec)


def first_integral(psi: Profile1D, spec: nl.ProblemSpec) -> np.ndarray:
    """Cell-centered samples of the conserved quantity psi'^2/2 + F(psi)."""
    v, h = psi.values, psi.h
    d = np.diff(v) / h
    Fv = nl.F(v, spec)
    return 0.5 * d * d + 0.5 * (Fv[:-1] + Fv[1:])


def residual_floor(v: np.ndarray, h: float, tol_residual: float) -> float:
    """Effective residual tolerance: requested tol plus the FP noise floor.

    The second difference of a size-A profile carries rounding noise of
    order eps * A / h^2, which exceeds an absolute 1e-10 for the amplified
    minimizers at the default grid; converging below that floor is
    meaningless, so the stopping test widens to it.
    """
    amp = float(np.max(np.abs(v)))
    return tol_residual + 4.0 * np.finfo(float).eps * max(1.0, amp) / h**2


def _laplacian_banded(n: int, h: float) -> np.ndarray:
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0 / h**2
    ab[1, :] = -2.0 / h**2
    ab[2, :-1] = 1.0 / h**2
    return ab


def solve_el(spec: nl.ProblemSpec, seed: Profile1D) -> Profile1D:
    """Damped Newton on the discrete Euler-Lagrange system from the given seed.

    Newton steps that fail to decrease the energy are rejected; the first
    fallback is a Laplacian-preconditioned gradient step (a guaranteed
    descent direction), the second is a move along the most negative
    curvature direction of the energy Hessian, which walks the iterate off
    mountain-pass saddles that Newton is otherwise attracted to.  Raises
    NonConvergence after max_iter safeguarded steps; the exception carries
    the last iterate.
    """
    if seed.boundary != spec.boundary_values:
        raise ValueError("seed boundary values do not match the mode")
    v = seed.values.copy()
    h = seed.h
    n = v.size - 2
    lap = _laplacian_banded(n, h)
    energy = _energy_values(v, h, spec)
    res_hist = []
    for _ in range(spec.max_iter):
        r = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2 + nl.f(v[1:-1], spec)
        maxres = float(np.max(np.abs(r)))
        res_hist.append(maxres)
        if maxres <= residual_floor(v, h, spec.tol_residual):
            # The floor is the rounding noise of the measured residual, so
            # hitting it says nothing about how far the last quadratic
            # contraction actually got; finish with one undamped Newton
            # polish step (noise injected by it is Jacobian-damped).
            ab = lap.copy()
            ab[1, :] += nl.f_prime(v[1:-1], spec)
            try:
                v[1:-1] += solve_banded((1, 1), ab, -r)
            except np.linalg.LinAlgError:
                pass
            return Profile1D(v, spec.boundary_values)
        ab = lap.copy()
        ab[1, :] += nl.f_prime(v[1:-1], spec)
        try:
            delta = solve_banded((1, 1), ab, -r)
        except np.linalg.LinAlgError:
            delta = None
        stepped = False
        if delta is not None and np.all(np.isfinite(delta)):
            stepped, v, energy = _backtrack(v, delta, energy, h, spec)
        if not stepped:
            # preconditioned gradient: -Lap^{-1} r is a descent direction
            delta = -solve_banded((1, 1), lap, r)
            stepped, v, energy = _backtrack(v, delta, energy, h, spec)
        if not stepped:
            # saddle escape: follow the most negative energy curvature
            delta = _negative_curvature_direction(ab, n)
            if delta is not None:
                scale = max(1.0, float(np.max(np.abs(v))))
                for direction in (delta, -delta):
                    stepped, v, energy = _backtrack(v, scale * direction, energy, h, spec)
                    if stepped:
                        break
        if not stepped:
            raise NonConvergence(
                "no descent step found (stationary but residual above tolerance)",
                last=Profile1D(v, spec.boundary_values),
                history=res_hist,
            )
    raise NonConvergence(
        f"Euler-Lagrange solve did not reach tol_residual in {spec.max_iter} steps",
        last=Profile1D(v, spec.boundary_values),
        history=res_hist,
    )


def _negative_curvature_direction(ab, n):
    """Unit eigenvector of the largest eigenvalue of the residual Jacobian.

    The energy Hessian is -h * J, so a positive eigenvalue of J marks a
    direction of negative energy curvature.  Returns None at (numerical)
    local minima.
    """
    diag = ab[1, :]
    off = ab[0, 1:]
    try:
        vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1))
    except np.linalg.LinAlgError:
        return None
    if vals[0] <= 1e-10:
        return None
    return vecs[:, 0]


def _backtrack(v, delta, energy, h, spec, max_halvings=40):
    # Accept up to the rounding noise of the energy itself: the gradient sum
    # is O(sup|psi'|^2), far above 1 for the steep nontrivial branch, so a
    # relative-to-|energy| tolerance would reject genuine descent steps.
    grad = np.diff(v) / h
    noise = 32.0 * np.finfo(float).eps * (1.0 + float(np.sum(grad * grad)) * h)
    alpha = 1.0
    for _ in range(max_halvings):
        trial = v.copy()
        trial[1:-1] += alpha * delta
        e_trial = _energy_values(trial, h, spec)
        if np.isfinite(e_trial) and e_trial <= energy + noise:
            return True, trial, e_trial
        alpha *= 0.5
    return False, v, energy


def multistart_seeds(spec: nl.ProblemSpec):
    """The fixed deterministic multistart family: phi and amplified bumps."""
    t = np.linspace(0.0, 1.0, spec.m + 1)
    phi = spec.trivial_profile(t)
    w = spec.escape_direction(t)
    seeds = [Profile1D(phi, spec.boundary_values)]
    for mu in SEED_AMPLITUDES:
        seeds.append(Profile1D(phi + mu * w, spec.boundary_values))
    return seeds


def global_min_1d(spec: nl.ProblemSpec) -> GlobalMinResult:
    """Multistart search for the global 1D minimum at the given lambda.

    The reported m_lambda is the lowest energy over every admissible profile
    visited (seeds included), hence always a certified upper bound for the
    true discrete infimum even when some start fails to converge.  The
    argmin is the lowest-energy converged profile, ties broken
    lexicographically on the node values.
    """
    best_bound = np.inf
    basins = []
    failures = []
    for seed in multistart_seeds(spec):
        best_bound = min(best_bound, energy_1d(seed, spec))
        try:
            prof = solve_el(spec, seed)
        except NonConvergence as exc:
            if exc.last is not None:
                best_bound = min(best_bound, energy_1d(exc.last, spec))
            failures.append(exc)
            continue
        e = energy_1d(prof, spec)
        best_bound = min(best_bound, e)
        for b in basins:
            if np.max(np.abs(b.profile.values - prof.values)) <= _BASIN_TOL:
                if e < b.energy:
                    b.profile, b.energy = prof, e
                break
        else:
            basins.append(Basin(prof, e))
    if not basins:
        raise NonConvergence(
            "every multistart seed failed to converge", history=[str(f) for f in failures]
        )
    best = min(basins, key=lambda b: (b.energy, tuple(b.profile.values)))
    return GlobalMinResult(m_lambda=float(best_bound), argmin=best.profile, basins=basins)


def _scan_row(lam, result: GlobalMinResult):
    sup_norms = sorted(b.sup_norm for b in result.basins)
    return (float(lam), result.m_lambda, len(result.basins), tuple(sup_norms))


def find_lambda_star(spec: nl.ProblemSpec, tol_lambda: float | None = None,
                     threshold: float | None = None) -> LambdaStarResult:
    """Bisect lambda on the predicate m_lambda < threshold - delta_margin.

    The bracket comes from a geometric scan lambda = 2^k; validity of the
    bisection rests on the monotonicity of m_lambda in lambda.
    """
    if tol_lambda is None:
        tol_lambda = spec.tol_lambda
    if threshold is None:
        threshold = spec.threshold
    cut = threshold - spec.delta_margin
    scan = []

    def predicate(lam: float) -> bool:
        res = global_min_1d(spec.with_lambda(lam))
        scan.append(_scan_row(lam, res))
        return res.m_lambda < cut

    # full geometric scan first: the recorded rows double as the structure
    # certificate (single true->false transition of the tie predicate)
    lams = [2.0**k for k in range(spec.scan_k_lo, spec.scan_k_hi + 1)]
    oks = [predicate(lam) for lam in lams]
    flips = [i for i in range(1, len(oks)) if oks[i - 1] and not oks[i]]
    if len(flips) != 1 or any(
        oks[i] != (i < flips[0]) for i in range(len(oks))
    ):
        raise BracketNotFound(
            f"predicate is not a single true->false transition on the "
            f"geometric scan k in [{spec.scan_k_lo}, {spec.scan_k_hi}]: {oks}"
        )
    lo, hi = lams[flips[0] - 1], lams[flips[0]]
    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return LambdaStarResult(value=lo, lo=lo, hi=hi, scan=scan)


def _nontrivial_basins(result: GlobalMinResult, phi: Profile1D):
    out = []
    for b in result.basins:
        if np.max(np.abs(b.profile.values - phi.values)) > 1e-3:
            out.append(b)
    return out


def _track_branch(spec: nl.ProblemSpec, lam: float, seed: Profile1D, phi: Profile1D) -> Profile1D:
    prof = solve_el(spec.with_lambda(lam), seed)
    if np.max(np.abs(prof.values - phi.values)) <= 1e-3:
        raise NonConvergence("nontrivial branch collapsed onto the trivial solution", last=prof)
    return prof


def _tie_lambda(spec: nl.ProblemSpec, psi: Profile1D, phi: Profile1D, lam: float):
    """Newton in lambda on g(lam) = I_lam(psi_lam) - threshold.

    Tracks the nontrivial branch while moving lambda; the exact sensitivity
    is dI/dlambda = integral of chi(psi)^4 (the profile term drops out at a
    critical point).  Overshoots past the branch fold are halved back.
    """
    for _ in range(40):
        e = energy_1d(psi, spec.with_lambda(lam))
        g = e - spec.threshold
        if abs(g) <= spec.tol_energy:
            break
        slope = float(np.trapezoid(nl.chi(psi.values) ** 4, dx=psi.h))
        if slope <= 0:
            break
        lam_new = lam - g / slope
        try:
            psi_new = _track_branch(spec, lam_new, psi, phi)
        except NonConvergence:
            lam_new = 0.5 * (lam + lam_new)
            psi_new = _track_branch(spec, lam_new, psi, phi)
        lam, psi = lam_new, psi_new
    return lam, psi


def extract_pair(spec: nl.ProblemSpec, lambda_star: float) -> MinimizerPair:
    """Refine lambda to the exact energy tie and return the minimizer pair.

    ``lambda_star`` is the bisection output, i.e. the largest lambda where
    the nontrivial basin still beats the trivial energy by the bisection
    margin.  The margin keeps the bisection boolean robust but leaves an
    O(margin) energy gap, so the tie  I_lambda(phibar) = I(phi)  is polished
    here by a Newton iteration in lambda along the nontrivial branch, using
    the exact sensitivity dI/dlambda = integral of chi(phibar)^4.  The final
    profile is approached from below in lambda (Cauchy-checked at
    lambda - tol_lambda * 2^{-j}, j = 0, 1, 2).
    """
    phi = trivial_profile(spec)
    threshold = spec.threshold
    res0 = global_min_1d(spec.with_lambda(lambda_star))
    cands = _nontrivial_basins(res0, phi)
    if not cands:
        raise PairNotOrdered("no nontrivial basin found at the bisected lambda")
    cands.sort(key=lambda b: (b.sup_norm, tuple(b.profile.values)))
    psi = cands[0].profile
    lam, psi = _tie_lambda(spec, psi, phi, float(lambda_star))

    # Approach from below and check Cauchy behavior of the branch.
    profiles = []
    for j in range(3):
        lam_j = lam - spec.tol_lambda * 2.0 ** (-j)
        profiles.append(_track_branch(spec, lam_j, psi, phi))
    diffs = tuple(
        float(np.max(np.abs(profiles[j + 1].values - profiles[j].values))) for j in range(2)
    )
    phibar = profiles[-1]
    interior = slice(1, -1)
    if not np.all(phibar.values[interior] > phi.values[interior]):
        raise PairNotOrdered("phibar is not strictly above phi on interior nodes")
    basins = tuple(
        Basin(b.profile, b.energy)
        for b in sorted(res0.basins, key=lambda b: (b.energy, tuple(b.profile.values)))
    )
    coarse = MinimizerPair(
        phi=phi,
        phibar=phibar,
        lambda_star=lam,
        energy=energy_1d(phibar, spec.with_lambda(lam)),
        cauchy_diffs=diffs,
        basins=basins,
    )
    if spec.m_refine <= spec.m:
        return coarse
    # Re-solve on the refinement grid so the first integral of the delivered
    # profile is conserved to the certification tolerance (drift is O(h^2)
    # with a large constant for the steep nontrivial branch).
    return pair_on_grid(spec, spec.m_refine, coarse)


def resample(profile: Profile1D, m: int) -> Profile1D:
    """Linear resampling onto an m-cell grid (used to seed other grids)."""
    t_new = np.linspace(0.0, 1.0, m + 1)
    vals = np.interp(t_new, profile.t, profile.values)
    return Profile1D(vals, profile.boundary)


def pair_on_grid(spec: nl.ProblemSpec, m: int, pair: MinimizerPair) -> MinimizerPair:
    """Re-solve the minimizer pair on an m-cell grid, re-tying lambda there.

    The lambda tie is grid-dependent at O(h^2); the 2D stage needs traces
    that are exact discrete minimizers on its own x2 grid, so the pair is
    re-extracted at that resolution seeded from the fine-grid profiles.
    """
    spec_m = dataclasses.replace(spec, m=m)
    phi = trivial_profile(spec_m)
    psi = _track_branch(spec_m, pair.lambda_star, resample(pair.phibar, m), phi)
    lam, psi = _tie_lambda(spec_m, psi, phi, pair.lambda_star)
    energy = energy_1d(psi, spec_m.with_lambda(lam))
    return MinimizerPair(
        phi=phi,
        phibar=psi,
        lambda_star=lam,
        energy=energy,
        cauchy_diffs=pair.cauchy_diffs,
        basins=pair.basins,
    )
