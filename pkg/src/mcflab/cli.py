"""Command-line front end: ``mcflab <subcommand> [-c FILE] [--key value ...]``.

Every run writes CSV data, a gnuplot script that plots it and a plain-text
manifest with the full configuration.  Exit status is 0 on success, 1 when a
built-in check fails and 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .csvio import write_columns

OUT_ENV = "MCFLAB_OUT"
SUBCOMMANDS = ("series", "soliton", "wings", "evolve", "stability", "plane", "growth")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optfloat(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    message: str = ""
    help: str = ""


def _pos(x):
    return x > 0


_COMMON = {
    "n": Key(int, 2, lambda v: v >= 2, "n must be ≥ 2", "dimension of the hypersurface"),
    "out": Key(str, None, None, "", "output directory (default: $MCFLAB_OUT or ./mcflab_out)"),
}

_SCHEMA: dict[str, dict[str, Key]] = {
    "series": {
        "order": Key(int, 9, lambda v: 1 <= v <= 21 and v % 2 == 1, "order must be odd and in [1, 21]"),
        "symbolic": Key(_bool, False, help="keep n symbolic"),
        "origin": Key(_bool, False, help="also print the series at r = 0"),
    },
    "soliton": {
        "r_max": Key(float, 50.0, _pos, "r_max must be positive"),
        "R": Key(_optfloat, None, lambda v: v is None or v > 0, "R must be positive",
                 "start radius; omit for the bowl"),
        "phi0": Key(float, 0.0, math.isfinite, "phi0 must be finite"),
        "tol": Key(float, 1e-11, lambda v: 0 < v <= 1e-3, "tol must lie in (0, 1e-3]"),
        "grid_step": Key(float, 0.005, _pos, "grid_step must be positive"),
    },
    "wings": {
        "r_wing": Key(float, 1.0, _pos, "r_wing must be positive"),
        "r_max": Key(_optfloat, None, lambda v: v is None or v > 0, "r_max must be positive"),
        "switch_slope": Key(float, 1.0, lambda v: 0.5 <= v <= 2.0, "switch_slope must lie in [0.5, 2]"),
        "epsilon": Key(float, 0.05, lambda v: v >= 0, "epsilon must be nonnegative"),
        "tol": Key(float, 1e-11, lambda v: 0 < v <= 1e-3, "tol must lie in (0, 1e-3]"),
        "grid_step": Key(float, 0.005, _pos, "grid_step must be positive"),
    },
    "evolve": {
        "initial": Key(str, "sphere", lambda v: v in ("sphere", "bowl"), "initial must be sphere or bowl"),
        "radius": Key(float, 1.0, _pos, "radius must be positive", "sphere radius"),
        "r_max": Key(_optfloat, None, lambda v: v is None or v > 0, "r_max must be positive"),
        "m": Key(int, 64, lambda v: v >= 16, "m must be >= 16"),
        "T": Key(_optfloat, None, lambda v: v is None or v >= 0, "T must be nonnegative"),
        "mode": Key(str, "explicit", lambda v: v in ("explicit", "implicit"), "mode must be explicit or implicit"),
        "cfl": Key(float, 0.15, lambda v: 0 < v <= 0.25, "cfl must lie in (0, 0.25]"),
        "dt": Key(float, 1e-3, _pos, "dt must be positive"),
        "slope_bound": Key(float, math.inf, lambda v: v >= 0, "slope_bound must be nonnegative"),
        "samples": Key(int, 5, lambda v: v >= 1, "samples must be >= 1"),
    },
    "stability": {
        "epsilon": Key(float, 0.05, _pos, "epsilon must be positive"),
        "r_wing": Key(float, 5.0, _pos, "r_wing must be positive"),
        "r_max": Key(float, 60.0, _pos, "r_max must be positive"),
        "m": Key(int, 600, lambda v: v >= 16, "m must be >= 16"),
        "kind": Key(str, "compact-bump", lambda v: v in ("compact-bump", "slow-decay"),
                    "kind must be compact-bump or slow-decay"),
        "amplitude": Key(float, 1.0, math.isfinite, "amplitude must be finite"),
        "rho": Key(float, 3.0, _pos, "rho must be positive"),
        "p": Key(float, 0.5, _pos, "p must be positive"),
        "T": Key(float, 40.0, _pos, "T must be positive"),
        "sample_dt": Key(float, 0.1, _pos, "sample_dt must be positive"),
        "cfl": Key(_optfloat, None, lambda v: v is None or 0 < v <= 0.25, "cfl must lie in (0, 0.25]"),
        "well_balanced": Key(_bool, True),
    },
    "plane": {
        "epsilon": Key(float, 0.05, _pos, "epsilon must be positive"),
        "catenoid_c": Key(_optfloat, None, lambda v: v is None or v > 0, "catenoid_c must be positive"),
        "r_max": Key(float, 30.0, _pos, "r_max must be positive"),
        "m": Key(int, 300, lambda v: v >= 16, "m must be >= 16"),
        "kind": Key(str, "compact-bump", lambda v: v in ("compact-bump", "slow-decay"),
                    "kind must be compact-bump or slow-decay"),
        "amplitude": Key(float, 1.0, math.isfinite, "amplitude must be finite"),
        "rho": Key(float, 3.0, _pos, "rho must be positive"),
        "p": Key(float, 0.5, _pos, "p must be positive"),
        "T": Key(float, 20.0, _pos, "T must be positive"),
        "sample_dt": Key(float, 0.1, _pos, "sample_dt must be positive"),
    },
    "growth": {
        "C": Key(float, 1.0, _pos, "C must be positive"),
        "tau": Key(float, 0.1, _pos, "tau must be positive"),
        "r_max": Key(float, 4.0, _pos, "r_max must be positive"),
        "m": Key(int, 40, lambda v: v >= 16, "m must be >= 16"),
    },
}


def schema(subcommand: str) -> dict[str, Key]:
    return {**_COMMON, **_SCHEMA[subcommand]}


@dataclass
class RunConfig:
    subcommand: str
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out(self) -> str:
        return self.values.get("out") or os.environ.get(OUT_ENV) or "mcflab_out"


def _read_pairs(text: str, origin: str, problems: list[str]) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{origin}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def parse_config(subcommand: str, path: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Merge a ``key = value`` file with flag overrides; report every problem at once."""
    if subcommand not in _SCHEMA:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    problems: list[str] = []
    raw: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(_read_pairs(fh.read(), path, problems))
        except OSError as exc:
            problems.append(f"config file: {exc}")
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    keys = schema(subcommand)
    if subcommand == "plane":
        keys["n"] = Key(int, 3, lambda v: v >= 2, "n must be ≥ 2", keys["n"].help)
    values: dict[str, Any] = {}
    for name, spec in keys.items():
        values[name] = spec.default
    for name in sorted(raw):
        if name not in keys:
            problems.append(f"{name}: unknown key for '{subcommand}'")
            continue
        spec = keys[name]
        try:
            val = spec.parse(raw[name])
        except ValueError:
            problems.append(f"{name}: cannot parse {raw[name]!r} as {getattr(spec.parse, '__name__', 'value')}")
            continue
        values[name] = val
    for name, spec in keys.items():
        if name in raw and spec.check is not None and name in values:
            try:
                ok = spec.check(values[name])
            except TypeError:
                ok = False
            if not ok and not any(p.startswith(f"{name}:") for p in problems):
                problems.append(f"{name}: {spec.message}")
    if problems:
        raise ConfigError(problems)
    return RunConfig(subcommand, values)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def dump_config(cfg: RunConfig) -> str:
    lines = [f"# mcflab {cfg.subcommand}"]
    for key in sorted(cfg.values):
        if cfg.values[key] is not None:
            lines.append(f"{key} = {_fmt(cfg.values[key])}")
    return "\n".join(lines) + "\n"


# --- output helpers -------------------------------------------------------------

def write_gnuplot(path: str, title: str, xlabel: str, ylabel: str, curves: list[tuple[str, int, int, str]],
                  logscale: str = "") -> str:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    parts = [f"'{f}' using {x}:{y} with lines title '{t}'" for f, x, y, t in curves]
    lines.append("plot " + ", \\\n     ".join(parts))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _manifest(cfg: RunConfig, outdir: str, files: list[str], results: dict[str, Any]) -> str:
    path = os.path.join(outdir, "manifest.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
        fh.write("# outputs\n")
        for f in files:
            fh.write(f"# file {os.path.basename(f)}\n")
        for k in sorted(results):
            fh.write(f"# result {k} = {_fmt(results[k])}\n")
    return path


# --- subcommands --------------------------------------------------------------------

def _run_series(cfg, outdir):
    from .series import dump_lines, expand_origin, expand_tail

    n = "n" if cfg["symbolic"] else cfg["n"]
    tail = expand_tail(n, cfg["order"])
    lines = [f"tail n={n} order={cfg['order']}"] + dump_lines(tail)
    if cfg["origin"]:
        lines += [f"origin n={cfg['n']} order={cfg['order']}"] + dump_lines(expand_origin(cfg["n"], cfg["order"]))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    path = os.path.join(outdir, "series.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return [path], {"terms": len(tail.coefficients)}, True


def _run_soliton(cfg, outdir):
    from .profiles import bowl_phi, height_from_phi, integrate_phi, translator_residual

    n = cfg["n"]
    if cfg["R"] is None:
        p = bowl_phi(n, cfg["r_max"], cfg["tol"], cfg["grid_step"])
        anchor = (0.0, 0.0)
    else:
        p = integrate_phi(n, cfg["R"], cfg["phi0"], cfg["r_max"], cfg["tol"], cfg["grid_step"])
        anchor = (cfg["R"], 0.0)
    hp = height_from_phi(p, anchor)
    rho = translator_residual(hp)
    f1 = write_columns(os.path.join(outdir, "phi.csv"), ("r", "phi"), (p.grid_r, p.grid_phi))
    f2 = write_columns(os.path.join(outdir, "height.csv"), ("r", "u"), (hp.r, hp.u))
    f3 = write_columns(os.path.join(outdir, "residual.csv"), ("r", "residual"), (hp.r, rho))
    gp = write_gnuplot(os.path.join(outdir, "soliton.gp"), "radial translator", "r", "value",
                       [("phi.csv", 1, 2, "phi"), ("height.csv", 1, 2, "u")])
    problems = p.check_invariants()
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    res = {"max_abs_residual": float(np.max(np.abs(rho))), "accepted_steps": int(p.r.size - 1)}
    print(f"max |residual| = {res['max_abs_residual']:.3e}")
    return [f1, f2, f3, gp], res, not problems


def _run_wings(cfg, outdir):
    from .profiles import bowl_height
    from .wings import build_wing_pair, calibrate_shifts, common_grid, write_arc_csv, write_wing_csv

    n, R = cfg["n"], cfg["r_wing"]
    r_max = cfg["r_max"] or 40.0 * max(R, n - 1)
    pair = build_wing_pair(n, R, r_max, cfg["switch_slope"], cfg["tol"], cfg["grid_step"])
    bowl = bowl_height(n, r_max, cfg["tol"], cfg["grid_step"])
    pair = calibrate_shifts(pair, bowl, cfg["epsilon"])
    f1 = write_wing_csv(pair, bowl, os.path.join(outdir, "wings.csv"))
    f2 = write_arc_csv(pair.inner_arc, os.path.join(outdir, "arc.csv"))
    gp = write_gnuplot(os.path.join(outdir, "wings.gp"), f"wings n={n} R={R}", "r", "height",
                       [("wings.csv", 1, 2, "W+"), ("wings.csv", 1, 3, "W-"), ("wings.csv", 1, 4, "U")])
    r = common_grid(pair, bowl)
    gap = pair.upper(r) - pair.lower(r)
    ok = bool(np.all(gap > 0))
    res = {"C_plus": pair.C_plus, "C_minus": pair.C_minus, "s_plus": pair.shifts[0], "s_minus": pair.shifts[1]}
    print(f"C+ = {pair.C_plus:.12g}  C- = {pair.C_minus:.12g}")
    return [f1, f2, gp], res, ok


def _run_evolve(cfg, outdir):
    from .evolver import BoundarySpec, EvolutionState, RadialGrid, SchemeConfig, evolve, write_trajectory
    from .profiles import bowl_height

    n = cfg["n"]
    scheme = SchemeConfig(mode=cfg["mode"], cfl=cfg["cfl"], dt=cfg["dt"], slope_bound=cfg["slope_bound"])
    if cfg["initial"] == "sphere":
        R = cfg["radius"]
        R_max = cfg["r_max"] or R / 2
        if not R_max < R:
            raise ConfigError(["r_max: must be below the sphere radius"])
        T = R * R / (8 * n) if cfg["T"] is None else cfg["T"]
        if not 2 * n * T + R_max ** 2 < R * R:
            raise ConfigError(["T: the sphere leaves the grid before T"])
        grid = RadialGrid(R_max, cfg["m"])
        r = grid.r
        u0 = -np.sqrt(R * R - r * r)
        bc = BoundarySpec(lambda t: -math.sqrt(R * R - 2 * n * t - R_max * R_max))

        def exact(t):
            return -np.sqrt(R * R - 2 * n * t - r * r)
    else:
        R_max = cfg["r_max"] or 20.0
        T = 5.0 if cfg["T"] is None else cfg["T"]
        grid = RadialGrid(R_max, cfg["m"])
        r = grid.r
        bowl = bowl_height(n, max(10.0, R_max + grid.h), 1e-11, 0.005)
        u0 = bowl(r)
        U_out = float(u0[-1])
        bc = BoundarySpec(lambda t: U_out + t)

        def exact(t):
            return u0 + t
    times = np.linspace(0.0, T, cfg["samples"] + 1)
    traj = evolve(EvolutionState(grid, u0), bc, T, scheme, n, times)
    manifest = write_trajectory(traj, outdir)
    err = [float(np.max(np.abs(s.u - exact(s.t)))) for s in traj.states]
    f1 = write_columns(os.path.join(outdir, "error.csv"), ("t", "max_error"), ([s.t for s in traj.states], err))
    last = os.path.basename(f"state_{len(traj.states) - 1:05d}.csv")
    gp = write_gnuplot(os.path.join(outdir, "evolve.gp"), f"{cfg['initial']} n={n}", "r", "u",
                       [("state_00000.csv", 1, 2, "t=0"), (last, 1, 2, f"t={traj.states[-1].t:.4g}")])
    print(f"max error vs closed form = {err[-1]:.3e} (h = {grid.h:.4g}, steps = {traj.steps})")
    return [manifest, f1, gp], {"max_error": err[-1], "h": grid.h, "steps": traj.steps}, True


def _stability_outputs(rep, outdir, title):
    csv, man = rep.write(outdir)
    gp = write_gnuplot(os.path.join(outdir, "report.gp"), title, "t", "sup deviation",
                       [("report.csv", 1, 2, "s(t)")], logscale="y")
    return [csv, man, gp]


def _run_stability(cfg, outdir):
    from .evolver import RadialGrid, SchemeConfig
    from .experiments import PerturbationSpec, run_soliton_stability

    n = cfg["n"]
    pert = PerturbationSpec(cfg["kind"], cfg["amplitude"], cfg["rho"], cfg["p"])
    cfl = cfg["cfl"] or min(0.25, 1.0 / (2 * n))
    scheme = SchemeConfig(cfl=cfl, well_balanced=cfg["well_balanced"])
    grid = RadialGrid(cfg["r_max"], cfg["m"])
    rep = run_soliton_stability(n, pert, cfg["epsilon"], cfg["r_wing"], grid, scheme, cfg["T"], cfg["sample_dt"])
    files = _stability_outputs(rep, outdir, f"soliton stability n={n}")
    bound = 20 * grid.h ** 2
    ok = (rep.T_star is not None and rep.barrier_violation_max <= bound
          and rep.nonincreasing_after_max() and rep.omega_clear_after_t_star())
    print(f"T* = {rep.T_star}  barrier violation max = {rep.barrier_violation_max:.3e} (bound {bound:.3e})")
    return files, {"T_star": rep.T_star, "barrier_violation_max": rep.barrier_violation_max}, ok


def _run_plane(cfg, outdir):
    from .evolver import RadialGrid
    from .experiments import PerturbationSpec, run_plane_stability

    pert = PerturbationSpec(cfg["kind"], cfg["amplitude"], cfg["rho"], cfg["p"])
    grid = RadialGrid(cfg["r_max"], cfg["m"])
    rep = run_plane_stability(cfg["n"], pert, cfg["catenoid_c"], cfg["epsilon"], grid, None, cfg["T"],
                              cfg["sample_dt"])
    files = _stability_outputs(rep, outdir, f"plane stability n={cfg['n']}")
    bound = 20 * grid.h ** 2
    ok = rep.T_star is not None and rep.barrier_violation_max <= bound
    print(f"T* = {rep.T_star}  barrier violation max = {rep.barrier_violation_max:.3e} (bound {bound:.3e})")
    return files, {"T_star": rep.T_star, "barrier_violation_max": rep.barrier_violation_max}, ok


def _run_growth(cfg, outdir):
    from .evolver import RadialGrid
    from .experiments import quadratic_growth_check

    grid = RadialGrid(cfg["r_max"], cfg["m"])
    excess = quadratic_growth_check(cfg["C"], grid, None, cfg["tau"], cfg["n"])
    path = write_columns(os.path.join(outdir, "growth.csv"), ("C", "tau", "h", "max_excess"),
                         ([cfg["C"]], [cfg["tau"]], [grid.h], [excess]))
    gp = write_gnuplot(os.path.join(outdir, "growth.gp"), "max excess over C r^2 + 2Cnt", "h", "excess",
                       [("growth.csv", 3, 4, "excess")])
    bound = 20 * grid.h ** 2
    print(f"max excess = {excess:.3e} (bound {bound:.3e})")
    return [path, gp], {"max_excess": excess}, excess <= bound


_RUNNERS = {
    "series": _run_series,
    "soliton": _run_soliton,
    "wings": _run_wings,
    "evolve": _run_evolve,
    "stability": _run_stability,
    "plane": _run_plane,
    "growth": _run_growth,
}


def run(cfg: RunConfig) -> int:
    from .evolver import SchemeError
    from .experiments import ExperimentConfigError

    outdir = cfg.out
    try:
        os.makedirs(outdir, exist_ok=True)
        files, results, ok = _RUNNERS[cfg.subcommand](cfg, outdir)
    except (ConfigError, ExperimentConfigError, SchemeError) as exc:
        for msg in getattr(exc, "problems", [str(exc)]):
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    _manifest(cfg, outdir, files, results)
    if not ok:
        print("check failed; see manifest.txt", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcflab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="key = value file; flags override it")
        for key, spec in schema(name).items():
            p.add_argument(f"--{key}", dest=f"opt_{key}", default=None, metavar="VALUE",
                           help=spec.help or None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}
    try:
        cfg = parse_config(args.subcommand, args.config, overrides)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
