"""Level curves, streamlines, and the superlevel-set convexity probe.

The interesting geometry of the heteroclinic stream function lives in its
superlevel sets {u > alpha}: for small alpha the set's left boundary is a
curve x1 = x_c(x2) with logarithmic spikes, so the set fails to be convex
and a triple (p, q, midpoint) certifies it.  The search prefers candidate
points hugging the level curve (smallest slack u - alpha), where the proof
says the violation lives, and falls back to seeded random sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .errors import EmptyLevelSet
from .eulerflow import FlowField
from .strip2d import Field2D

WITNESS_SEED = 0x5EED
WITNESS_BUDGET = 100_000
TOL_WITNESS = 1e-4


@dataclass
class Polyline:
    points: np.ndarray  # (n, 2) columns (x1, x2)
    closed: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("polyline needs an (n, 2) point array")
        if np.any(np.all(np.diff(self.points, axis=0) == 0.0, axis=1)):
            raise ValueError("polyline has repeated consecutive points")


@dataclass
class ConvexityWitness:
    p: tuple
    q: tuple
    mid: tuple
    alpha: float
    margin: float


@dataclass
class _RawGrid:
    """Duck-typed stand-in for Field2D interpolation of arbitrary node data."""

    values: np.ndarray
    L: float

    @property
    def nx(self):
        return self.values.shape[0] - 1

    @property
    def ny(self):
        return self.values.shape[1] - 1

    @property
    def hx(self):
        return 2.0 * self.L / self.nx

    @property
    def hy(self):
        return 1.0 / self.ny


def bilinear(u, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the field at (x1, x2) points (clipped to the box)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    gx = np.clip((pts[:, 0] + u.L) / u.hx, 0.0, u.nx - 1e-12)
    gy = np.clip(pts[:, 1] / u.hy, 0.0, u.ny - 1e-12)
    i = gx.astype(int)
    j = gy.astype(int)
    fx = gx - i
    fy = gy - j
    v = u.values
    return (
        v[i, j] * (1 - fx) * (1 - fy)
        + v[i + 1, j] * fx * (1 - fy)
        + v[i, j + 1] * (1 - fx) * fy
        + v[i + 1, j + 1] * fx * fy
    )


def level_curve(u: Field2D, alpha: float) -> list:
    """Marching-squares level set {u = alpha} as polylines in strip coordinates."""
    vmin, vmax = float(np.min(u.values)), float(np.max(u.values))
    if not (vmin <= alpha <= vmax):
        raise EmptyLevelSet(f"alpha={alpha} outside field range [{vmin}, {vmax}]")
    contours = measure.find_contours(u.values, alpha)
    out = []
    for c in contours:
        pts = np.column_stack([-u.L + c[:, 0] * u.hx, c[:, 1] * u.hy])
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
        pts = pts[keep]
        if len(pts) < 2:
            continue
        closed = bool(np.all(pts[0] == pts[-1]))
        if closed:
            pts = pts[:-1]
        out.append(Polyline(pts, closed=closed))
    out.sort(key=lambda p: (p.points[:, 0].min(), p.points[:, 1].min(), len(p.points)))
    return out


def _witness_from_pairs(u, alpha, P, Q, tol):
    """Vectorized midpoint check over candidate point arrays P[i] - Q[i]."""
    mids = 0.5 * (P + Q)
    um = bilinear(u, mids)
    bad = um <= alpha - tol
    if not np.any(bad):
        return None
    k = int(np.argmax(bad))  # first hit in deterministic order
    margin = min(
        float(bilinear(u, P[k : k + 1])[0] - alpha),
        float(bilinear(u, Q[k : k + 1])[0] - alpha),
        float(alpha - um[k]),
    )
    return ConvexityWitness(
        p=tuple(P[k]), q=tuple(Q[k]), mid=tuple(mids[k]), alpha=alpha, margin=margin
    )


def find_nonconvexity_witness(
    u: Field2D,
    alpha: float,
    tol: float = TOL_WITNESS,
    budget: int = WITNESS_BUDGET,
):
    """Search for p, q in {u > alpha} whose midpoint leaves the set.

    Candidates are grid nodes inside the superlevel set with margin at
    least ``tol``, ordered by their slack u - alpha so that points hugging
    the level curve -- where the boundary spike makes midpoints escape --
    are paired first.  If the directed pass finds nothing within the pair
    budget, a fixed-seed random pass over all inside nodes runs before
    giving up (None means no witness found, not a convexity proof).
    """
    X, Y = np.meshgrid(u.x1, u.x2, indexing="ij")
    inside = u.values > alpha + tol
    if not np.any(inside):
        return None
    pts = np.column_stack([X[inside], Y[inside]])
    slack = u.values[inside] - alpha
    order = np.lexsort((pts[:, 1], pts[:, 0], slack))
    pts = pts[order]

    # directed pass: pairs among the lowest-slack nodes, lexicographic order
    k = max(2, int(np.sqrt(2 * budget)))
    cand = pts[:k]
    ii, jj = np.triu_indices(len(cand), k=1)
    if len(ii) > budget:
        ii, jj = ii[:budget], jj[:budget]
    hit = _witness_from_pairs(u, alpha, cand[ii], cand[jj], tol)
    if hit is not None:
        return hit

    # fallback: seeded random pairs over the whole inside set
    rng = np.random.default_rng(WITNESS_SEED)
    idx = rng.integers(0, len(pts), size=(budget, 2))
    keep = idx[:, 0] != idx[:, 1]
    return _witness_from_pairs(u, alpha, pts[idx[keep, 0]], pts[idx[keep, 1]], tol)


def check_witness(u: Field2D, w: ConvexityWitness, tol: float = TOL_WITNESS) -> bool:
    """Re-validate a witness's three interpolated inequalities with margin."""
    up = float(bilinear(u, [w.p])[0])
    uq = float(bilinear(u, [w.q])[0])
    um = float(bilinear(u, [w.mid])[0])
    mid_ok = np.allclose(w.mid, 0.5 * (np.asarray(w.p) + np.asarray(w.q)))
    return bool(mid_ok and up >= w.alpha + tol and uq >= w.alpha + tol and um <= w.alpha - tol)


def coarse_convexity_oracle(u: Field2D, alpha: float, coarsen: int = 4, tol: float = TOL_WITNESS):
    """Brute-force midpoint test over all node pairs of a coarsened grid.

    Returns None if every midpoint of inside-node pairs stays inside
    (consistent with convexity at this resolution), else a witness.
    """
    sub = Field2D(
        u.values[::coarsen, ::coarsen],
        u.L,
        u.phi[::coarsen],
        u.phibar[::coarsen],
        u.boundary,
    )
    X, Y = np.meshgrid(sub.x1, sub.x2, indexing="ij")
    inside = sub.values > alpha + tol
    pts = np.column_stack([X[inside], Y[inside]])
    if len(pts) < 2:
        return None
    ii, jj = np.triu_indices(len(pts), k=1)
    # evaluate midpoints against the full-resolution field in batches
    best = None
    for lo in range(0, len(ii), 1 << 20):
        hi = min(lo + (1 << 20), len(ii))
        w = _witness_from_pairs(u, alpha, pts[ii[lo:hi]], pts[jj[lo:hi]], tol)
        if w is not None:
            best = w
            break
    return best


def trace_streamlines(flow: FlowField, seeds, step: float, max_steps: int = 20000, eps_stag: float = None) -> list:
    """Fixed-step RK4 streamlines with bilinear velocity sampling.

    Stops on domain exit, stagnation (|v| <= eps_stag), or the step budget.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if eps_stag is None:
        eps_stag = 1e-5 * float(np.max(flow.speed()))
    f1 = _RawGrid(flow.v1, flow.L)
    f2 = _RawGrid(flow.v2, flow.L)

    def vel(pt):
        return np.array([bilinear(f1, [pt])[0], bilinear(f2, [pt])[0]])

    out = []
    for seed in seeds:
        x = np.asarray(seed, dtype=float)
        pts = [x.copy()]
        for _ in range(max_steps):
            k1 = vel(x)
            if np.hypot(*k1) <= eps_stag:
                break
            k2 = vel(x + 0.5 * step * k1)
            k3 = vel(x + 0.5 * step * k2)
            k4 = vel(x + step * k3)
            x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not (-flow.L <= x[0] <= flow.L and 0.0 <= x[1] <= 1.0):
                break
            pts.append(x.copy())
        arr = np.asarray(pts)
        keep = np.ones(len(arr), dtype=bool)
        if len(arr) > 1:
            keep[1:] = np.any(np.diff(arr, axis=0) != 0.0, axis=1)
        arr = arr[keep]
        if len(arr) >= 2:
            out.append(Polyline(arr))
    return out
