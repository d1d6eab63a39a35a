"""Command line front end: ``find``, ``outermost``, ``oracle`` and ``verify``.

Exit status: 0 all checks pass, 2 converged but a verification threshold
was missed, 3 solver failure, 4 input error.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .capillary_solver import ContinuationSchedule
from .errors import HorizonError, InputError, NoHorizon, ParseError
from .initial_data import DomainGrid, Sphere, build_domain, load_grid_file, make_family

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VERIFY, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3, 4

# config file section for every RunConfig field
SECTIONS = {
    "data": ("family", "data", "mass", "separation", "dim"),
    "domain": ("outer", "inner", "h"),
    "schedule": ("t0", "t_min", "eps0", "eps_min", "blow_down_factor", "newton_tol", "max_newton"),
    "checks": ("residual_tol", "area_tol", "probes", "stability_trials", "seed", "mode"),
    "output": ("out", "write_fields"),
}


@dataclass
class RunConfig:
    family: str = "pg"
    data: str | None = None
    mass: float = 1.0
    separation: float = 4.0
    dim: int = 2
    outer: float = 6.0
    inner: float = 1.0
    h: float = 0.05
    t0: float = 0.2
    t_min: float = 0.0125
    eps0: float = 0.04
    eps_min: float = 0.01
    blow_down_factor: float = 0.5
    newton_tol: float = 1e-8
    max_newton: int = 60
    residual_tol: float | None = None
    area_tol: float = 1e-3
    probes: int = 50
    stability_trials: int = 100
    seed: int = 0
    mode: str = "generalized"
    out: str | None = None
    write_fields: bool = True
    seed_spheres: list = field(default_factory=list)
    seed_meshes: list = field(default_factory=list)

    def validate(self):
        if self.mode not in ("generalized", "mots"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.dim not in (2, 3):
            raise InputError("dim must be 2 or 3")
        positive = ("h", "outer", "t0", "t_min", "eps0", "eps_min", "blow_down_factor", "newton_tol",
                    "area_tol", "mass")
        for name in positive:
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise InputError("residual_tol must be positive")
        if self.t_min > self.t0 or self.eps_min > self.eps0:
            raise InputError("schedule floors must not exceed the starting values")
        if self.inner is not None and not 0 < self.inner < self.outer:
            raise InputError("need 0 < inner < outer")
        if self.probes < 1 or self.stability_trials < 1 or self.max_newton < 1:
            raise InputError("probe counts and max_newton must be at least 1")
        return self

    def schedule(self):
        return ContinuationSchedule(self.t0, self.t_min, self.eps0, self.eps_min, self.newton_tol,
                                    self.max_newton, self.blow_down_factor)

    @classmethod
    def from_file(cls, path, base=None):
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ParseError(f"malformed config {path}: {exc}") from exc
        cfg = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ParseError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SECTIONS[section]:
                    raise ParseError(f"unknown key {key!r} in [{section}]")
                setattr(cfg, key, _convert(raw, types[key], key))
        return cfg


def _convert(raw, typ, key):
    typ = str(typ)
    raw = raw.strip()
    try:
        if raw.lower() in ("none", ""):
            return None
        if "bool" in typ:
            if raw.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "yes", "1")
        if "int" in typ and "float" not in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ParseError(f"bad value {raw!r} for {key}") from exc


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def load_data(cfg: RunConfig):
    if cfg.data:
        ids = load_grid_file(cfg.data)
        if ids.dim != cfg.dim:
            cfg.dim = ids.dim
        return ids
    params = {}
    fam = cfg.family.lower()
    if fam in ("pg", "painleve-gullstrand", "schwarzschild", "iso", "isotropic-schwarzschild"):
        params["m"] = cfg.mass
    elif fam in ("bl", "brill-lindquist"):
        params.update(m1=cfg.mass, m2=cfg.mass, separation=cfg.separation)
    return make_family(fam, dim=cfg.dim, half_width=cfg.outer + 1.0, **params)


def make_grid(cfg: RunConfig, ids, with_inner=True) -> DomainGrid:
    center = np.zeros(cfg.dim)
    inner = Sphere(center, cfg.inner) if (with_inner and cfg.inner) else None
    return build_domain(ids, Sphere(center, cfg.outer), inner, cfg.h, half_width=cfg.outer + 3 * cfg.h)


def _emit(out, name, text):
    if out is None:
        return None
    path = Path(out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _fields_csv(sol):
    pts = sol.grid.points[sol.grid.interior]
    cols = ["x", "y", "z"][:sol.grid.dim] + ["u"]
    rows = np.column_stack([pts, sol.u])
    body = "\n".join(",".join(f"{v:.12g}" for v in row) for row in rows)
    return ",".join(cols) + "\n" + body + "\n"


def _report_text(header, report=None, extra=()):
    lines = [f"[{header}]"]
    for key, value in extra:
        lines.append(f"{key} = {value}")
    if report is not None:
        lines.append(report.to_text())
    return "\n".join(lines) + "\n"


def _verify_kwargs(cfg):
    return dict(probe_trials=cfg.probes, stability_trials=cfg.stability_trials, seed=cfg.seed)


def _write_outputs(cfg, res, extra, report_name="report.txt"):
    from .horizon_geometry import write_mesh

    if cfg.out is None:
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(out / "horizon.mesh", res.surface)
    _emit(out, "trace.txt", res.continuation.trace.table() + "\n")
    if cfg.write_fields:
        for k, sol in enumerate(res.continuation.solutions):
            _emit(out, f"fields/u_step{k:02d}_t{sol.t:.5g}_eps{sol.eps:.5g}.csv", _fields_csv(sol))
    _emit(out, report_name, _report_text("find", res.report, extra))


def _passed(report, cfg):
    """Residual and outer-minimizing probes decide the exit status."""
    return bool(report.residual <= report.residual_tol and report.probes.passed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_find(cfg: RunConfig):
    from .horizon_algebra import find_horizon

    cfg.validate()
    ids = load_data(cfg)
    grid = make_grid(cfg, ids)
    start = time.perf_counter()
    res = find_horizon(grid, ids, cfg.schedule(), cfg.mode, verify=True, **_verify_kwargs(cfg))
    if cfg.residual_tol is not None:
        res.report.residual_tol = cfg.residual_tol
    r = res.surface.radii()
    extra = [("mode", cfg.mode), ("h", cfg.h), ("components", res.surface.component_count),
             ("level", ", ".join(f"{v:.8g}" for v in res.surface.levels)),
             ("deltas", ", ".join(f"{d:.6g}" for d in res.deltas)),
             ("continuation_steps", len(res.continuation.trace)),
             ("barrier_and_curvature_checks", "pass" if res.continuation.trace.ok else "fail"),
             ("seconds", f"{time.perf_counter() - start:.1f}")]
    _write_outputs(cfg, res, extra)
    print(_report_text("find", res.report, extra), end="")
    log.info("radius range %.6g .. %.6g", r.min(), r.max())
    ok = _passed(res.report, cfg) and res.continuation.trace.ok
    return (EXIT_OK if ok else EXIT_VERIFY), res


def _seed_domains(cfg, grid, ids):
    from .horizon_algebra import TrappedDomain
    from .horizon_geometry import read_mesh

    seeds = []
    for text in cfg.seed_spheres:
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError:
            raise InputError(f"seed sphere {text!r} is not a comma-separated list of numbers") from None
        if len(vals) != cfg.dim + 1 or vals[-1] <= 0:
            raise InputError(f"seed sphere needs {cfg.dim} centre coordinates and a positive radius")
        seeds.append(TrappedDomain.from_shape(grid, Sphere(vals[:-1], vals[-1])))
    for path in cfg.seed_meshes:
        try:
            v, c = read_mesh(path)
        except OSError as exc:
            raise ParseError(f"cannot read mesh {path}: {exc}") from exc
        seeds.append(TrappedDomain.from_mesh(grid, v, c))
    if not seeds:
        raise InputError("outermost needs at least one seed (--seed-sphere or --seed-mesh)")
    return seeds


def run_outermost(cfg: RunConfig):
    from .horizon_algebra import outermost
    from .horizon_geometry import write_mesh

    cfg.validate()
    ids = load_data(cfg)
    grid = make_grid(cfg, ids, with_inner=False)
    seeds = _seed_domains(cfg, grid, ids)
    res = outermost(grid, ids, seeds, cfg.schedule(), cfg.mode, verify=True)
    report = res.last.report
    extra = [("mode", cfg.mode), ("h", cfg.h), ("seeds", len(seeds)), ("rounds", res.rounds),
             ("fold_distances", ", ".join(f"{d:.6g}" for d in res.fold_distances) or "none"),
             ("round_distances", ", ".join(f"{d:.6g}" for d in res.distances)),
             ("termination_tolerance", f"{grid.h / 2:.6g}"),
             ("masks_decreasing", "true" if all(res.masks_decreasing) else "false")]
    if cfg.out is not None:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        write_mesh(Path(cfg.out) / "horizon.mesh", res.surface)
        _emit(cfg.out, "report.txt", _report_text("outermost", report, extra))
    print(_report_text("outermost", report, extra), end="")
    ok = _passed(report, cfg) and all(res.masks_decreasing)
    return (EXIT_OK if ok else EXIT_VERIFY), res


def run_oracle(cfg: RunConfig, samples=41):
    from .spherical_oracle import horizon_radius, radial_profile, scalar_table

    cfg.validate()
    profile = radial_profile(cfg.family, cfg.mass, cfg.dim)
    try:
        r_star = horizon_radius(profile, cfg.mode)
    except NoHorizon:
        r_star = None
    hi = 2 * r_star if r_star else 4 * cfg.mass
    radii = np.linspace(hi / samples, hi, samples)
    table = scalar_table(profile, radii, cfg.mode)
    csv = "r,H,trace_p\n" + "\n".join(",".join(f"{v:.12g}" for v in row) for row in table) + "\n"
    summary = f"[oracle]\nfamily = {profile.tag}\nmode = {cfg.mode}\nmass = {cfg.mass}\n"
    summary += f"r_star = {r_star:.12g}\n" if r_star else "r_star = none    # no horizon\n"
    _emit(cfg.out, "oracle.csv", csv)
    _emit(cfg.out, "oracle.txt", summary)
    print(summary, end="")
    if r_star is None:
        print("no horizon")
    return EXIT_OK, r_star


def run_verify(cfg: RunConfig, mesh_path):
    from .barriers import data_bound
    from .horizon_geometry import mesh_inside_mask, read_mesh, redistanced_indicator, surface_from_mesh, \
        verify_surface
    from .jang_core import kappa_squared

    cfg.validate()
    try:
        v, c = read_mesh(mesh_path)
    except OSError as exc:
        raise ParseError(f"cannot read mesh {mesh_path}: {exc}") from exc
    if v.shape[1] != cfg.dim:
        cfg.dim = v.shape[1]
    ids = load_data(cfg)
    grid = make_grid(cfg, ids, with_inner=False)
    surf = surface_from_mesh(v, c, grid, ids, cfg.mode)
    # data bounds are taken over the region outside the surface only
    outside = grid.with_inner(redistanced_indicator(mesh_inside_mask(grid, v, c), grid.h))
    C = data_bound(outside, ids, cfg.mode, cfg.eps0)
    kappa2 = kappa_squared(ids, outside.points[outside.interior])
    report = verify_surface(surf, ids, C, kappa2, cfg.mode, residual_tol=cfg.residual_tol,
                            **_verify_kwargs(cfg))
    text = _report_text("verify", report, [("mesh", mesh_path), ("mode", cfg.mode), ("h", cfg.h)])
    _emit(cfg.out, "verify.txt", text)
    print(text, end="")
    return (EXIT_OK if _passed(report, cfg) else EXIT_VERIFY), report


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p, defaults=True):
    p.add_argument("--config", help="key-value config file with [data] [domain] [schedule] [checks] [output]")
    p.add_argument("--family", help="pg, schwarzschild, brill-lindquist or flat")
    p.add_argument("--data", help="IDSGRID1 data file (overrides --family)")
    p.add_argument("--mass", type=float)
    p.add_argument("--separation", type=float, help="Brill-Lindquist puncture separation")
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--mode", choices=("generalized", "mots"))
    p.add_argument("--out", help="output directory")
    if not defaults:
        return
    p.add_argument("--outer", type=float, help="outer sphere radius")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--t0", type=float)
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--eps-min", dest="eps_min", type=float)
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    p.add_argument("--probes", type=int)
    p.add_argument("--stability-trials", dest="stability_trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-fields", dest="write_fields", action="store_const", const=False,
                   help="skip the per-step CSV fields")


def build_parser():
    parser = argparse.ArgumentParser(prog="jang-horizons", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("find", help="solve and extract the horizon between two spheres")
    _common(p)
    p.add_argument("--inner", type=float, help="inner (trapped) sphere radius")
    p = sub.add_parser("outermost", help="outermost horizon enclosing the given seeds")
    _common(p)
    p.add_argument("--seed-sphere", dest="seed_spheres", action="append", default=[],
                   help="trapped seed sphere 'x,y[,z],r' (repeatable)")
    p.add_argument("--seed-mesh", dest="seed_meshes", action="append", default=[],
                   help="trapped seed bounded by a mesh file (repeatable)")
    p = sub.add_parser("oracle", help="radial reference values for symmetric families")
    _common(p, defaults=False)
    p = sub.add_parser("verify", help="re-run the horizon checks on a mesh file")
    _common(p)
    p.add_argument("--mesh", required=True)
    return parser


def config_from_args(args):
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None and value != []:
            setattr(cfg, f.name, value)
    if args.command == "oracle" and args.dim is None:
        cfg.dim = 3
    return cfg


def _error_block(exc, status):
    lines = ["[error]", f"type = {type(exc).__name__}", f"message = {exc}", f"exit_status = {status}"]
    for attr in ("worst_point", "margin", "max_t", "line"):
        value = getattr(exc, attr, None)
        if value is not None:
            lines.append(f"{attr} = {np.array2string(np.asarray(value), precision=6)}")
    return "\n".join(lines) + "\n"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    try:
        cfg = config_from_args(args)
        if args.command == "find":
            status, _ = run_find(cfg)
        elif args.command == "outermost":
            status, _ = run_outermost(cfg)
        elif args.command == "oracle":
            status, _ = run_oracle(cfg)
        else:
            status, _ = run_verify(cfg, args.mesh)
    except InputError as exc:
        status = EXIT_INPUT
        block = _error_block(exc, status)
    except HorizonError as exc:
        status = EXIT_SOLVER
        block = _error_block(exc, status)
    else:
        return status
    sys.stderr.write(block)
    if cfg is not None and cfg.out:
        try:
            _emit(cfg.out, "error.txt", block)
        except OSError:
            pass
    return status


if __name__ == "__main__":
    sys.exit(main())
