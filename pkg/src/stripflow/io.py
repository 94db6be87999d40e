"""Checkpoint serialization: CSV payloads with JSON metadata sidecars.

Every format round-trips losslessly: floats are written with 17
significant digits (``%.17g``), which is enough to reproduce any IEEE-754
double exactly on read.  Payload files carry only data; grid shape, mode,
lambda, tolerances and the like live in a ``.meta.json`` sidecar next to
the payload so that the CSV stays a plain, tool-friendly table.

Wall-clock timings are never written into report or checkpoint files --
they go to a separate ``timings.json`` -- so repeated runs with the same
configuration produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .bvp1d import Profile1D
from .strip2d import Field2D

FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def _meta_path(path: str) -> str:
    return path + ".meta.json"


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str):
    with open(path) as fh:
        return json.load(fh)


# ----------------------------------------------------------------- profiles


def save_profile(path: str, profile: Profile1D, meta: dict | None = None) -> None:
    """Write a 1D profile as CSV ``t,psi`` plus a metadata sidecar."""
    t = profile.t
    with open(path, "w") as fh:
        fh.write("t,psi\n")
        for ti, vi in zip(t, profile.values):
            fh.write(f"{_fmt(ti)},{_fmt(vi)}\n")
    side = dict(meta or {})
    side["format"] = "profile1d"
    side["m"] = profile.m
    side["boundary"] = [profile.boundary[0], profile.boundary[1]]
    _write_json(_meta_path(path), side)


def load_profile(path: str) -> tuple[Profile1D, dict]:
    meta = _read_json(_meta_path(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    values = data[:, 1]
    b0, b1 = meta["boundary"]
    if values[0] != b0 or values[-1] != b1:
        raise ValueError(f"{path}: endpoint samples disagree with sidecar boundary")
    return Profile1D(values, (b0, b1)), meta


# -------------------------------------------------------------------- fields


def save_field(path: str, field: Field2D, meta: dict | None = None) -> None:
    """Write a 2D field as CSV ``x1,x2,u`` in row-major order plus sidecar."""
    x1, x2 = field.x1, field.x2
    with open(path, "w") as fh:
        fh.write("x1,x2,u\n")
        for i in range(field.nx + 1):
            xi = _fmt(x1[i])
            row = field.values[i]
            for j in range(field.ny + 1):
                fh.write(f"{xi},{_fmt(x2[j])},{_fmt(row[j])}\n")
    side = dict(meta or {})
    side["format"] = "field2d"
    side["nx"] = field.nx
    side["ny"] = field.ny
    side["L"] = field.L
    side["boundary"] = [field.boundary[0], field.boundary[1]]
    side["phi"] = [_fmt(v) for v in field.phi]
    side["phibar"] = [_fmt(v) for v in field.phibar]
    _write_json(_meta_path(path), side)


def load_field(path: str) -> tuple[Field2D, dict]:
    meta = _read_json(_meta_path(path))
    nx, ny = meta["nx"], meta["ny"]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.shape != ((nx + 1) * (ny + 1), 3):
        raise ValueError(f"{path}: payload shape disagrees with sidecar grid")
    values = data[:, 2].reshape(nx + 1, ny + 1)
    phi = np.array([float(s) for s in meta["phi"]])
    phibar = np.array([float(s) for s in meta["phibar"]])
    field = Field2D(values, meta["L"], phi, phibar, tuple(meta["boundary"]))
    if not np.array_equal(field.values, values):
        raise ValueError(f"{path}: stored traces disagree with sidecar profiles")
    return field, meta


# --------------------------------------------------------------------- flows


def save_flow(path: str, flow, meta: dict | None = None) -> None:
    """Write a flow as CSV ``x1,x2,v1,v2,P`` plus a metadata sidecar."""
    x1, x2 = flow.x1, flow.x2
    with open(path, "w") as fh:
        fh.write("x1,x2,v1,v2,P\n")
        for i in range(len(x1)):
            xi = _fmt(x1[i])
            for j in range(len(x2)):
                fh.write(
                    f"{xi},{_fmt(x2[j])},{_fmt(flow.v1[i, j])},"
                    f"{_fmt(flow.v2[i, j])},{_fmt(flow.P[i, j])}\n"
                )
    side = dict(meta or {})
    side["format"] = "flowfield"
    side["nx"] = len(x1) - 1
    side["ny"] = len(x2) - 1
    side["L"] = flow.L
    side["trusted_margin"] = flow.trusted_margin
    side["boundary_limits"] = [_fmt(v) for v in flow.boundary_limits]
    _write_json(_meta_path(path), side)


def load_flow(path: str):
    from .eulerflow import FlowField

    meta = _read_json(_meta_path(path))
    nx, ny = meta["nx"], meta["ny"]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.shape != ((nx + 1) * (ny + 1), 5):
        raise ValueError(f"{path}: payload shape disagrees with sidecar grid")
    shape = (nx + 1, ny + 1)
    limits = tuple(float(s) for s in meta["boundary_limits"])
    flow = FlowField(
        data[:, 2].reshape(shape),
        data[:, 3].reshape(shape),
        data[:, 4].reshape(shape),
        meta["L"],
        limits,
        trusted_margin=meta["trusted_margin"],
    )
    return flow, meta


# ---------------------------------------------------------------- scan table


def save_scan(path: str, rows) -> None:
    """Write per-lambda diagnostics: lambda, m_lambda, basin count, sup-norms.

    ``sup_norms`` is variable-length per row, so it is serialized as a
    semicolon-joined list in the last column.
    """
    with open(path, "w") as fh:
        fh.write("lambda,m_lambda,basin_count,sup_norms\n")
        for lam, m_lam, count, sups in rows:
            packed = ";".join(_fmt(s) for s in sups)
            fh.write(f"{_fmt(lam)},{_fmt(m_lam)},{int(count)},{packed}\n")


def load_scan(path: str) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("lambda,"):
            raise ValueError(f"{path}: not a lambda-scan table")
        for line in fh:
            lam, m_lam, count, packed = line.rstrip("\n").split(",")
            sups = tuple(float(s) for s in packed.split(";")) if packed else ()
            rows.append((float(lam), float(m_lam), int(count), sups))
    return rows


# ---------------------------------------------------------------- polylines


def save_polylines(path: str, polylines) -> None:
    """Write polylines as CSV ``id,x1,x2`` (one id per polyline, in order)."""
    with open(path, "w") as fh:
        fh.write("id,x1,x2\n")
        for k, line in enumerate(polylines):
            for p in line.points:
                fh.write(f"{k},{_fmt(p[0])},{_fmt(p[1])}\n")


def load_polylines(path: str):
    from .geometry import Polyline

    ids = []
    pts = []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("id,"):
            raise ValueError(f"{path}: not a polyline table")
        for line in fh:
            k, a, b = line.rstrip("\n").split(",")
            ids.append(int(k))
            pts.append((float(a), float(b)))
    out = []
    for k in sorted(set(ids)):
        chunk = [p for i, p in zip(ids, pts) if i == k]
        out.append(Polyline(np.array(chunk), closed=False))
    return out


def polylines_to_svg(path: str, polylines, L: float, stroke: str = "black") -> None:
    """Write polylines as a minimal standalone SVG (strip mapped to a 2L x 1 box)."""
    scale = 100.0
    width = 2.0 * L * scale
    height = 1.0 * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:g} {height:g}">'
    ]
    for line in polylines:
        coords = " ".join(
            f"{(p[0] + L) * scale:.3f},{(1.0 - p[1]) * scale:.3f}" for p in line.points
        )
        closed = " Z" if line.closed else ""
        parts.append(
            f'<polyline fill="none" stroke="{stroke}" stroke-width="0.5" '
            f'points="{coords}"{closed} />'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ------------------------------------------------------------------- reports


def save_report(path: str, report: dict) -> None:
    """Write a flat key-value report as sorted, indented JSON."""
    flat = {}
    for k, v in report.items():
        if isinstance(v, np.generic):
            v = v.item()
        if isinstance(v, (list, tuple)):
            v = [x.item() if isinstance(x, np.generic) else x for x in v]
        flat[k] = v
    _write_json(path, flat)


def load_report(path: str) -> dict:
    return _read_json(path)


def save_timings(outdir: str, timings: dict) -> None:
    """Wall-clock timings live apart from the report to keep it deterministic."""
    _write_json(os.path.join(outdir, "timings.json"), {k: float(v) for k, v in timings.items()})
