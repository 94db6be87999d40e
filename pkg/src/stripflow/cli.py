"""Command-line interface: configuration, pipeline orchestration, reports.

Subcommands mirror the pipeline stages; each stage writes a checkpoint and
is skipped on re-run when its artifacts already exist (``--force`` recomputes).
The ``report`` subcommand aggregates everything into a flat key-value JSON
document and renders the figures.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 verification failure.  The environment variable ``STRIPFLOW_OUTDIR``
overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import os
import sys
import time

from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

OUTDIR_ENV = "STRIPFLOW_OUTDIR"

DEFAULT_ALPHAS = (0.25, 0.20, 0.15, 0.10)


@dataclasses.dataclass
class RunConfig:
    """Everything a pipeline run needs, loadable from an INI file."""

    mode: str = "ramp"
    outdir: str = "runs/out"
    lam: float = 1.0
    m: int = 2048
    m_refine: int = 131072
    hx: float = 1.0 / 64.0
    hy: float = 1.0 / 128.0
    L_schedule: tuple = (4.0, 8.0, 16.0)
    tol_residual: float = 1e-10
    tol_energy: float = 1e-8
    max_iter: int = 200
    delta_margin: float = 1e-4
    tol_lambda: float = 1e-6
    tol_cont: float = 1e-4
    tol_residual2d: float = 1e-8
    max_sweeps: int = 200
    eps_stag_rel: float = 1e-5
    trusted_margin: float = 2.0
    alphas: tuple = DEFAULT_ALPHAS
    threads: int = 0  # 0 = leave the BLAS/OpenMP defaults alone

    def validate(self) -> None:
        if self.mode not in ("ramp", "zero"):
            raise ConfigError(f"unknown mode {self.mode!r} (expected 'ramp' or 'zero')")
        for name in (
            "tol_residual",
            "tol_energy",
            "delta_margin",
            "tol_lambda",
            "tol_cont",
            "tol_residual2d",
            "eps_stag_rel",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.m < 16:
            raise ConfigError("m must give at least 16 cells per unit length")
        if 1.0 / self.hx < 16 or 1.0 / self.hy < 16:
            raise ConfigError("hx and hy must give at least 16 nodes per unit")
        if any(b <= a for a, b in zip(self.L_schedule, self.L_schedule[1:])):
            raise ConfigError("L_schedule must be strictly increasing")
        if any(a <= 0 for a in self.alphas):
            raise ConfigError("witness alphas must be positive")

    def spec(self):
        from . import nonlinearity as nl

        return nl.ProblemSpec(
            mode=self.mode,
            lam=self.lam,
            m=self.m,
            m_refine=self.m_refine,
            tol_residual=self.tol_residual,
            tol_energy=self.tol_energy,
            max_iter=self.max_iter,
            delta_margin=self.delta_margin,
            tol_lambda=self.tol_lambda,
            hx=self.hx,
            hy=self.hy,
            L_schedule=tuple(self.L_schedule),
            tol_cont=self.tol_cont,
            tol_residual2d=self.tol_residual2d,
            max_sweeps=self.max_sweeps,
            eps_stag_rel=self.eps_stag_rel,
            trusted_margin=self.trusted_margin,
        )

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out["config_" + f.name] = v
        return out

    @classmethod
    def from_ini(cls, path: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keys are case-sensitive (L_schedule)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in fields:
                    raise ConfigError(f"unknown config key {key!r} in [{section}]")
                kwargs[key] = _coerce(raw, fields[key].type, key)
        return cls(**kwargs)


def _coerce(raw: str, ftype, key: str):
    raw = raw.strip()
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        if ftype in ("tuple", tuple):
            return tuple(float(tok) for tok in raw.replace(" ", "").split(",") if tok)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for config key {key!r}") from exc


def version_hash() -> str:
    """SHA-256 over the package sources; identifies the build in reports."""
    pkg_dir = os.path.dirname(os.path.abspath(__file__))
    digest = hashlib.sha256()
    for name in sorted(os.listdir(pkg_dir)):
        if name.endswith(".py"):
            with open(os.path.join(pkg_dir, name), "rb") as fh:
                digest.update(name.encode())
                digest.update(fh.read())
    return digest.hexdigest()[:16]


# ------------------------------------------------------------------ pipeline


class Pipeline:
    """Stage runner with file checkpoints; every stage is resumable."""

    def __init__(self, config: RunConfig, force: bool = False):
        config.validate()
        self.config = config
        self.force = force
        self.outdir = os.environ.get(OUTDIR_ENV) or config.outdir
        os.makedirs(self.outdir, exist_ok=True)
        self.spec = config.spec()
        self.timings = {}

    def _path(self, name: str) -> str:
        return os.path.join(self.outdir, name)

    def _have(self, *names: str) -> bool:
        return not self.force and all(os.path.exists(self._path(n)) for n in names)

    def _timed(self, stage: str, fn):
        t0 = time.perf_counter()
        out = fn()
        self.timings[stage] = time.perf_counter() - t0
        return out

    # stage 1: lambda bisection + scan
    def lambda_star(self):
        from . import io as sio
        from .bvp1d import find_lambda_star

        if self._have("scan.csv", "lambda_star.json"):
            meta = sio.load_report(self._path("lambda_star.json"))
            return meta["lambda_bisect"], sio.load_scan(self._path("scan.csv"))

        def work():
            res = find_lambda_star(self.spec)
            sio.save_scan(self._path("scan.csv"), res.scan)
            sio.save_report(
                self._path("lambda_star.json"),
                {"lambda_bisect": res.value, "lo": res.lo, "hi": res.hi},
            )
            return res.value, res.scan

        return self._timed("lambda_star", work)

    # stage 2: minimizer pair at the energy tie
    def pair(self):
        from . import io as sio
        from .bvp1d import MinimizerPair, extract_pair

        if self._have("phi.csv", "phibar.csv", "pair.json"):
            phi, _ = sio.load_profile(self._path("phi.csv"))
            phibar, _ = sio.load_profile(self._path("phibar.csv"))
            meta = sio.load_report(self._path("pair.json"))
            return MinimizerPair(
                phi=phi,
                phibar=phibar,
                lambda_star=meta["lambda_star"],
                energy=meta["energy"],
                cauchy_diffs=tuple(meta["cauchy_diffs"]),
            )
        lam_bisect, _scan = self.lambda_star()

        def work():
            pair = extract_pair(self.spec, lam_bisect)
            sio.save_profile(self._path("phi.csv"), pair.phi, {"role": "phi"})
            sio.save_profile(self._path("phibar.csv"), pair.phibar, {"role": "phibar"})
            sio.save_report(
                self._path("pair.json"),
                {
                    "lambda_star": pair.lambda_star,
                    "energy": pair.energy,
                    "cauchy_diffs": list(pair.cauchy_diffs),
                    "lambda_bisect": lam_bisect,
                },
            )
            return pair

        return self._timed("pair", work)

    # stage 3: pair re-tied on the 2D cross-section grid
    def pair_h(self, ny: int | None = None):
        from . import io as sio
        from .bvp1d import MinimizerPair, pair_on_grid

        ny = ny if ny is not None else int(round(1.0 / self.spec.hy))
        names = (f"phi_h{ny}.csv", f"phibar_h{ny}.csv", f"pair_h{ny}.json")
        if self._have(*names):
            phi, _ = sio.load_profile(self._path(names[0]))
            phibar, _ = sio.load_profile(self._path(names[1]))
            meta = sio.load_report(self._path(names[2]))
            return MinimizerPair(
                phi=phi, phibar=phibar, lambda_star=meta["lambda_star"], energy=meta["energy"]
            )
        pair = self.pair()

        def work():
            ph = pair_on_grid(self.spec, ny, pair)
            sio.save_profile(self._path(names[0]), ph.phi, {"role": "phi", "ny": ny})
            sio.save_profile(self._path(names[1]), ph.phibar, {"role": "phibar", "ny": ny})
            sio.save_report(
                self._path(names[2]), {"lambda_star": ph.lambda_star, "energy": ph.energy}
            )
            return ph

        return self._timed(f"pair_h{ny}", work)

    # stage 4: heteroclinic continuation
    def field(self):
        from . import io as sio
        from .strip2d import Field2D, HeteroclinicResult, continuation

        if self._have("field.csv", "het.json"):
            fld, _ = sio.load_field(self._path("field.csv"))
            meta = sio.load_report(self._path("het.json"))
            return HeteroclinicResult(
                field=fld,
                L=fld.L,
                min_dx1u=meta["min_dx1u"],
                end_gaps=tuple(meta["end_gaps"]),
                hamiltonian_spread=meta["hamiltonian_spread"],
                shifts=tuple(meta["shifts"]),
                window_diffs=tuple(meta["window_diffs"]),
                Ls=tuple(meta["Ls"]),
            )
        pair_h = self.pair_h()

        def work():
            # The 2D functional must carry the tie coupling: only there do
            # the two plateau columns have exactly equal energy density.
            spec2 = self.spec.with_lambda(pair_h.lambda_star)
            het = continuation(spec2, pair_h.phi, pair_h.phibar)
            sio.save_field(
                self._path("field.csv"),
                het.field,
                {"mode": self.config.mode, "lambda_star": pair_h.lambda_star},
            )
            sio.save_report(
                self._path("het.json"),
                {
                    "min_dx1u": het.min_dx1u,
                    "end_gaps": list(het.end_gaps),
                    "hamiltonian_spread": het.hamiltonian_spread,
                    "shifts": list(het.shifts),
                    "window_diffs": list(het.window_diffs),
                    "Ls": list(het.Ls),
                },
            )
            return het

        return self._timed("field", work)

    # stage 5: Euler flow
    def flow(self):
        from . import io as sio
        from .eulerflow import to_flow

        if self._have("flow.csv"):
            fl, _ = sio.load_flow(self._path("flow.csv"))
            return fl
        het = self.field()
        spec2 = self.spec.with_lambda(self.pair_h().lambda_star)

        def work():
            fl = to_flow(het.field, spec2)
            sio.save_flow(self._path("flow.csv"), fl, {"mode": self.config.mode})
            return fl

        return self._timed("flow", work)

    # stage 6: verification report
    def verify(self) -> dict:
        from . import io as sio
        from .eulerflow import verify_flow

        if self._have("flowreport.json"):
            return sio.load_report(self._path("flowreport.json"))
        fl = self.flow()

        def work():
            rep = verify_flow(fl, self.spec)
            doc = {
                "euler_residual": rep.euler_residual,
                "divergence": rep.divergence,
                "slip": rep.slip,
                "vorticity_transport": rep.vorticity_transport,
                "total_curvature_quadrature": rep.total_curvature_quadrature,
                "total_curvature_formula": rep.total_curvature_formula,
                "balancing_defect": rep.balancing_defect,
                "angle_class": rep.angle_class.value,
                "sign_pattern_ok": rep.sign_pattern_ok,
            }
            sio.save_report(self._path("flowreport.json"), doc)
            return doc

        return self._timed("verify", work)

    # stage 7: non-convexity witnesses
    def witness(self, alphas=None) -> dict:
        from . import io as sio
        from .geometry import check_witness, find_nonconvexity_witness

        alphas = tuple(alphas if alphas is not None else self.config.alphas)
        if alphas == tuple(self.config.alphas) and self._have("witness.json"):
            return sio.load_report(self._path("witness.json"))
        het = self.field()

        def work():
            doc = {"alphas": list(alphas)}
            for alpha in alphas:
                key = f"alpha_{alpha:g}"
                wit = find_nonconvexity_witness(het.field, alpha)
                if wit is None:
                    doc[key + "_found"] = False
                    continue
                check_witness(het.field, wit)
                doc[key + "_found"] = True
                doc[key + "_p"] = [wit.p[0], wit.p[1]]
                doc[key + "_q"] = [wit.q[0], wit.q[1]]
                doc[key + "_mid"] = [wit.mid[0], wit.mid[1]]
                doc[key + "_margin"] = wit.margin
            if alphas == tuple(self.config.alphas):
                sio.save_report(self._path("witness.json"), doc)
            return doc

        return self._timed("witness", work)

    # stage 8: plot data (level curves + streamlines)
    def plot_data(self):
        from . import io as sio
        import numpy as np
        from .geometry import level_curve, trace_streamlines

        het = self.field()
        fl = self.flow()

        def work():
            lo = float(np.min(het.field.values))
            hi = float(np.max(het.field.values))
            levels = [lo + t * (hi - lo) for t in (0.15, 0.35, 0.5, 0.65, 0.85)]
            curves = []
            for alpha in levels:
                curves.extend(level_curve(het.field, alpha))
            sio.save_polylines(self._path("levels.csv"), curves)
            sio.polylines_to_svg(self._path("levels.svg"), curves, het.field.L)
            seeds = [(-het.field.L + 1.0, x2) for x2 in np.linspace(0.1, 0.9, 9)]
            lines = trace_streamlines(fl, seeds, step=min(self.spec.hx, self.spec.hy))
            sio.save_polylines(self._path("streamlines.csv"), lines)
            sio.polylines_to_svg(self._path("streamlines.svg"), lines, het.field.L)
            return levels, curves, lines

        return self._timed("plot_data", work)

    # stage 9: aggregate report + figures
    def report(self) -> dict:
        from . import io as sio
        from . import plots
        from .eulerflow import AngleClass, angle_histogram

        lam_bisect, scan = self.lambda_star()
        pair = self.pair()
        het = self.field()
        fl = self.flow()
        flowdoc = self.verify()
        witdoc = self.witness() if self.config.mode == "zero" else None
        levels, _curves, lines = self.plot_data()

        from .strip2d import hamiltonian_spread

        spec2 = self.spec.with_lambda(self.pair_h().lambda_star)
        spread, mean = hamiltonian_spread(het.field, spec2)
        doc = {
            "mode": self.config.mode,
            "lambda_bisect": lam_bisect,
            "lambda_star": pair.lambda_star,
            "energy_phibar": pair.energy,
            "threshold": self.spec.threshold,
            "cauchy_diffs": list(pair.cauchy_diffs),
            "continuation_L": het.L,
            "continuation_Ls": list(het.Ls),
            "continuation_diffs": list(het.window_diffs),
            "min_dx1u": het.min_dx1u,
            "end_gap_left": het.end_gaps[0],
            "end_gap_right": het.end_gaps[1],
            "hamiltonian_spread": spread,
            "hamiltonian_mean": mean,
            "version_hash": version_hash(),
        }
        doc.update(flowdoc)
        if witdoc is not None:
            doc.update(witdoc)
        doc.update(self.config.echo())
        sio.save_report(self._path("report.json"), doc)
        sio.save_timings(self.outdir, self.timings)

        plots.plot_pair(self._path("fig_pair.png"), pair.phi, pair.phibar, self.config.mode)
        plots.plot_scan(self._path("fig_scan.png"), scan, pair.lambda_star)
        plots.plot_field(self._path("fig_field.png"), het.field, levels=levels)
        plots.plot_streamlines(self._path("fig_streamlines.png"), lines, het.field.L)
        counts = angle_histogram(fl)
        plots.plot_angle_histogram(
            self._path("fig_angles.png"), counts, AngleClass(doc["angle_class"])
        )
        return doc


def run_pipeline(config: RunConfig, force: bool = False) -> dict:
    """Execute all stages and return the aggregate report document."""
    return Pipeline(config, force=force).report()


# ----------------------------------------------------------------------- cli


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_ini(args.config)
    else:
        cfg = RunConfig()
    if args.mode:
        cfg.mode = args.mode
    if args.outdir:
        cfg.outdir = args.outdir
    if args.threads:
        cfg.threads = args.threads
    cfg.validate()
    if cfg.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(cfg.threads)
    return cfg


def _add_common(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--mode", choices=["ramp", "zero"], help="boundary-value family")
    sub.add_argument("--outdir", help="output directory (env STRIPFLOW_OUTDIR overrides)")
    sub.add_argument("--threads", type=int, default=0, help="cap BLAS/OpenMP worker threads")
    sub.add_argument("--force", action="store_true", help="recompute existing checkpoints")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stripflow", description=__doc__)
    sp = p.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("solve1d", "solve the 1D problem at a fixed lambda"),
        ("lambda-star", "bisect the energy-tie coupling lambda*"),
        ("solve2d", "heteroclinic continuation on the strip"),
        ("flow", "derive and export the Euler flow"),
        ("verify", "run all flow verifications"),
        ("witness", "search for a superlevel non-convexity witness"),
        ("plot-data", "export level curves and streamlines"),
        ("report", "run the full pipeline and aggregate the report"),
    ):
        sub = sp.add_parser(name, help=hlp)
        _add_common(sub)
        if name == "solve1d":
            sub.add_argument("--lambda", dest="lam", type=float, required=True)
        if name == "witness":
            sub.add_argument("--alpha", type=float, action="append", default=None)
    return p


def _cmd_solve1d(pipe: Pipeline, args) -> int:
    from .bvp1d import global_min_1d

    res = global_min_1d(pipe.spec.with_lambda(args.lam))
    print(f"m_lambda = {res.m_lambda!r}")
    print(f"basins = {len(res.basins)}")
    for b in res.basins:
        print(f"  energy = {b.energy!r}  sup = {b.sup_norm!r}")
    return EXIT_OK


def _cmd_verify(pipe: Pipeline, args) -> int:
    doc = pipe.verify()
    for k in sorted(doc):
        print(f"{k} = {doc[k]}")
    ok = (
        doc["sign_pattern_ok"]
        and doc["divergence"] <= 1e-12
        and doc["slip"] <= 1e-8
        and doc["angle_class"] != "Inconclusive"
    )
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_witness(pipe: Pipeline, args) -> int:
    alphas = tuple(args.alpha) if args.alpha else None
    doc = pipe.witness(alphas)
    for k in sorted(doc):
        print(f"{k} = {doc[k]}")
    found = [v for k, v in doc.items() if k.endswith("_found")]
    return EXIT_OK if found and all(found) else EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        pipe = Pipeline(config, force=getattr(args, "force", False))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .errors import StripflowError

    try:
        if args.command == "solve1d":
            return _cmd_solve1d(pipe, args)
        if args.command == "lambda-star":
            lam, _scan = pipe.lambda_star()
            print(f"lambda_bisect = {lam!r}")
            return EXIT_OK
        if args.command == "solve2d":
            het = pipe.field()
            print(f"L = {het.L!r}")
            print(f"min_dx1u = {het.min_dx1u!r}")
            print(f"end_gaps = {het.end_gaps!r}")
            return EXIT_OK
        if args.command == "flow":
            pipe.flow()
            print(f"flow written to {pipe.outdir}")
            return EXIT_OK
        if args.command == "verify":
            return _cmd_verify(pipe, args)
        if args.command == "witness":
            return _cmd_witness(pipe, args)
        if args.command == "plot-data":
            pipe.plot_data()
            print(f"plot data written to {pipe.outdir}")
            return EXIT_OK
        if args.command == "report":
            doc = pipe.report()
            print(f"report written to {os.path.join(pipe.outdir, 'report.json')}")
            if not doc.get("sign_pattern_ok", True):
                return EXIT_VERIFY
            return EXIT_OK
        raise AssertionError(f"unhandled command {args.command}")
    except StripflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
