"""Batch command-line front end.

Subcommands: constants, spectrum, hp-verify, eigenfunction, evolve,
evolve-linear, entropy-report, gronwall, quotient, rescale.  Outputs are CSV
(default; header row plus '#' comment lines echoing the full configuration)
or JSON via --format json where noted.  Numbers are printed with 17
significant digits so outputs round-trip exactly and runs with identical
configuration and seed produce identical bytes.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import entropy as ent
from . import exponents as exp_mod
from . import flow as flow_mod
from . import numerics as num
from . import profiles as prof
from . import spectral as spec
from .numerics import NonConvergenceError

__all__ = ["main", "parse_config", "RunConfig", "ConfigError"]


class ConfigError(ValueError):
    """Invalid run configuration (bad key, value, or cross-field constraint)."""


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# run configuration files (key=value)

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}

# key -> (parser, default); None default means "unset"
_CONFIG_KEYS = {
    "d": (int, None),
    "m": (float, None),
    "alpha": (float, None),
    "D": (float, 1.0),
    "D0": (float, None),
    "D1": (float, None),
    "data.kind": (str, "profile-blend"),
    "data.seed": (int, None),
    "data.epsilon": (float, 0.05),
    "data.amplitude": (float, 0.1),
    "data.mode_l": (int, 0),
    "data.mode_k": (int, 1),
    "data.match_D": (lambda s: _BOOL[s.lower()], True),
    "data.clip": (lambda s: _BOOL[s.lower()], True),
    "grid.R_max": (float, 100.0),
    "grid.N": (int, 800),
    "grid.grading": (str, "sinh"),
    "sector.l": (int, 0),
    "time.dt": (float, 1e-3),
    "time.t_end": (float, 1.0),
    "output.cadence": (float, None),
    "output.path": (str, None),
    "fit.window_start": (float, None),
    "fit.window_end": (float, None),
    "fit.kind": (str, "exp"),
}


@dataclass
class RunConfig:
    """Validated key=value run configuration."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def echo_lines(self):
        return [f"# {k}={_fmt(v)}" for k, v in sorted(self.values.items())
                if v is not None]

    def exponent_set(self):
        d = self.values.get("d")
        if d is None:
            raise ConfigError("config must set d")
        m = self.values.get("m")
        alpha = self.values.get("alpha")
        if m is None and alpha is None:
            raise ConfigError("config must set m or alpha")
        if m is not None and alpha is not None:
            raise ConfigError("set only one of m and alpha")
        if m is None:
            m = exp_mod.alpha_to_m(d, alpha)
        return exp_mod.derive_exponents(d, m)


def parse_config(text: str) -> RunConfig:
    """Parse key=value configuration text ('#' comments, one pair per line)."""
    values = {k: v for k, (_, v) in _CONFIG_KEYS.items()}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})"
            )
        seen[key] = lineno
        parser = _CONFIG_KEYS[key][0]
        try:
            values[key] = parser(val)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from e
    cfg = RunConfig(values=values)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig):
    v = cfg.values
    if v.get("m") is not None and not v["m"] < 1:
        raise ConfigError(f"m must be < 1, got {v['m']}")
    if v.get("alpha") is not None and not v["alpha"] < 0:
        raise ConfigError(f"alpha must be < 0, got {v['alpha']}")
    if v.get("d") is not None and v["d"] < 1:
        raise ConfigError(f"d must be >= 1, got {v['d']}")
    D0, D1 = v.get("D0"), v.get("D1")
    if D0 is not None and D1 is not None and not D0 > D1 > 0:
        raise ConfigError(f"need D0 > D1 > 0, got D0={D0}, D1={D1}")
    if not v["D"] > 0:
        raise ConfigError(f"D must be positive, got {v['D']}")
    if not v["grid.R_max"] > 0:
        raise ConfigError(f"grid.R_max must be positive, got {v['grid.R_max']}")
    if v["grid.N"] < 16:
        raise ConfigError(f"grid.N must be >= 16, got {v['grid.N']}")
    if not v["time.dt"] > 0:
        raise ConfigError(f"time.dt must be positive, got {v['time.dt']}")
    if not v["time.t_end"] > 0:
        raise ConfigError(f"time.t_end must be positive, got {v['time.t_end']}")
    cad = v.get("output.cadence")
    if cad is not None and not cad > 0:
        raise ConfigError(f"output.cadence must be positive, got {cad}")
    w0, w1 = v.get("fit.window_start"), v.get("fit.window_end")
    if (w0 is None) != (w1 is None):
        raise ConfigError("set both fit.window_start and fit.window_end or neither")
    if w0 is not None and not w0 < w1:
        raise ConfigError(f"fit window must be increasing, got [{w0}, {w1}]")


def _load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# output helpers


def _emit(lines, path):
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(comments, header, rows, path):
    lines = list(comments)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _emit(lines, path)


def _trace_csv(trace, cfg, subcommand, path):
    comments = [f"# fdrates {subcommand}"] + cfg.echo_lines()
    _csv(comments, ent.EntropyTrace.COLUMNS, list(trace.rows()), path)


def _max_workers():
    env = os.environ.get("FDRATES_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_constants(args):
    if (args.m is None) == (args.alpha is None):
        raise ConfigError("give exactly one of --m and --alpha")
    m = args.m if args.m is not None else exp_mod.alpha_to_m(args.d, args.alpha)
    e = exp_mod.derive_exponents(args.d, m)
    alpha = float(e.alpha)
    out = {
        "d": e.d, "m": float(e.m), "alpha": alpha,
        "m_c": float(e.m_c), "m_star": float(e.m_star), "m_1": float(e.m_1),
        "m_2": float(e.m_2), "alpha_star": float(e.alpha_star),
        "alpha_1": float(e.alpha_1), "alpha_2": float(e.alpha_2),
        "regime": e.regime.value, "log_limit": e.log_limit,
        "Lambda": float(exp_mod.sharp_rate(e.d, alpha)),
        "lambda_cont": float(exp_mod.lambda_continuum(e.d, alpha)),
    }
    try:
        imp = spec.improved_constant(e.d, alpha)
        out["Lambda_improved"] = float(imp)
        out["improved_flag"] = imp.discrepancy_flag
    except ValueError:
        pass
    if args.format == "json":
        _emit([json.dumps(out, sort_keys=True)], args.output)
    else:
        _csv(["# fdrates constants"], ["key", "value"],
             sorted(out.items()), args.output)
    return 0


def _cmd_spectrum(args):
    report = spec.spectrum_report(args.d, args.alpha, args.l_max, args.k_max)
    if args.format == "json":
        out = {
            "d": report.d, "alpha": float(report.alpha),
            "sharp_constant": float(report.sharp_constant),
            "continuum_bottom": float(report.continuum_bottom),
            "improved_constant": (float(report.improved_constant)
                                  if report.improved_constant is not None else None),
            "gap_source": list(report.gap_source),
            "constraint_needed": report.constraint_needed,
            "modes": [
                {"l": mo.l, "k": mo.k, "lambda": float(mo.lam),
                 "admissible": mo.admissible,
                 "below_continuum": mo.below_continuum,
                 "multiplicity": mo.multiplicity}
                for mo in report.modes
            ],
        }
        _emit([json.dumps(out, sort_keys=True)], args.output)
    else:
        comments = [
            "# fdrates spectrum",
            f"# d={args.d}",
            f"# alpha={_fmt(float(args.alpha))}",
            f"# sharp_constant={_fmt(float(report.sharp_constant))}",
            f"# continuum_bottom={_fmt(float(report.continuum_bottom))}",
            f"# gap_source={':'.join(str(s) for s in report.gap_source)}",
        ]
        rows = [
            (mo.l, mo.k, float(mo.lam), mo.admissible, mo.below_continuum,
             mo.multiplicity)
            for mo in report.modes
        ]
        _csv(comments, ["l", "k", "lambda", "admissible", "below_continuum",
                        "multiplicity"], rows, args.output)
    return 0


def _cmd_hp_verify(args):
    alphas = [float(s) for s in args.alpha.split(",")]

    def one(a):
        return num.verify_constants(args.d, a, D=args.D, l_max=args.l_max,
                                    R_max=args.R, N=args.N,
                                    extrapolate=not args.no_extrapolate)
    if len(alphas) > 1:
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            results = list(pool.map(one, alphas))
    else:
        results = [one(alphas[0])]
    rows = []
    for res in results:
        for s in res.sectors:
            rows.append((res.alpha, s.l, "mean-zero" if s.constrained else "none",
                         res.R_max, res.N, s.lambda_numeric, res.closed_form,
                         abs(s.lambda_numeric - res.closed_form) / abs(res.closed_form)))
        rows.append((res.alpha, "min", "mean-zero", res.R_max, res.N,
                     res.minimum, res.closed_form, res.rel_err))
    comments = ["# fdrates hp-verify", f"# d={args.d}", f"# D={_fmt(args.D)}",
                f"# extrapolate={_fmt(not args.no_extrapolate)}"]
    _csv(comments, ["alpha", "l", "constraints", "R_max", "N",
                    "lambda_numeric", "lambda_closed_form", "rel_err"],
         rows, args.output)
    return 0


def _cmd_eigenfunction(args):
    from fractions import Fraction

    alpha = Fraction(args.alpha).limit_denominator(10**9)
    mode = spec.discrete_mode(args.d, alpha, args.l, args.k)
    resid = spec.ode_residual(args.d, alpha, args.l, args.k, dps=args.dps)
    comments = ["# fdrates eigenfunction", f"# d={args.d}",
                f"# alpha={_fmt(float(alpha))}", f"# l={args.l}", f"# k={args.k}",
                f"# lambda={_fmt(float(mode.lam))}",
                f"# admissible={_fmt(mode.admissible)}",
                f"# below_continuum={_fmt(mode.below_continuum)}",
                f"# multiplicity={mode.multiplicity}",
                f"# max_ode_residual={_fmt(resid)}"]
    rows = [(j, float(c)) for j, c in enumerate(mode.radial_poly)]
    _csv(comments, ["power_of_r2", "coefficient"], rows, args.output)
    return 0


def _build_state(cfg: RunConfig):
    e = cfg.exponent_set()
    grid = num.build_grid(cfg["grid.R_max"], cfg["grid.N"], e.d,
                          grading=cfg["grid.grading"],
                          scale=math.sqrt(cfg["D"]))
    return flow_mod.make_initial_data(
        grid, e, cfg["data.kind"], D=cfg["D"], D0=cfg.get("D0"),
        D1=cfg.get("D1"), epsilon=cfg["data.epsilon"],
        mode=(cfg["data.mode_l"], cfg["data.mode_k"]),
        amplitude=cfg["data.amplitude"], seed=cfg.get("data.seed"),
        clip=cfg["data.clip"], match_D=cfg["data.match_D"])


def _cmd_evolve(args):
    cfg = _load_config(args.config)
    state = _build_state(cfg)
    trace = flow_mod.evolve_nonlinear(state, cfg["time.t_end"], cfg["time.dt"],
                                      cadence=cfg.get("output.cadence"))
    w0, w1 = cfg.get("fit.window_start"), cfg.get("fit.window_end")
    if w0 is not None:
        trace.fitted = ent.fit_rate(trace, (w0, w1), kind=cfg["fit.kind"])
    path = args.output or cfg.get("output.path")
    comments = ["# fdrates evolve"] + cfg.echo_lines()
    comments.append(f"# matched_D={_fmt(state.profile.D)}")
    if trace.fitted is not None:
        comments.append(f"# fitted_rate={_fmt(trace.fitted.rate)}")
        comments.append(f"# fit_r2={_fmt(trace.fitted.r2)}")
    _csv(comments, ent.EntropyTrace.COLUMNS, list(trace.rows()), path)
    return 0


def _cmd_evolve_linear(args):
    cfg = _load_config(args.config)
    e = cfg.exponent_set()
    if e.d < 2:
        raise ConfigError("linear sector evolution needs d >= 2")
    grid = num.build_grid(cfg["grid.R_max"], cfg["grid.N"], e.d,
                          grading=cfg["grid.grading"],
                          scale=math.sqrt(cfg["D"]))
    l = cfg["sector.l"]
    alpha = float(e.alpha)
    if cfg["data.kind"] == "mode":
        mode = spec.discrete_mode(e.d, alpha, cfg["data.mode_l"], cfg["data.mode_k"])
        f0 = spec.mode_field(mode, grid).values
        l = cfg["data.mode_l"]
    else:
        r = grid.nodes
        f0 = r**l * np.exp(-(r**2))
    state = flow_mod.LinearState(grid=grid, alpha=alpha, D=cfg["D"], l=l, f=f0)
    trace = flow_mod.evolve_linear_sector(state, cfg["time.t_end"], cfg["time.dt"],
                                          cadence=cfg.get("output.cadence"))
    w0, w1 = cfg.get("fit.window_start"), cfg.get("fit.window_end")
    if w0 is not None:
        trace.fitted = ent.fit_rate(trace, (w0, w1), kind=cfg["fit.kind"])
    path = args.output or cfg.get("output.path")
    comments = ["# fdrates evolve-linear"] + cfg.echo_lines()
    if trace.fitted is not None:
        comments.append(f"# fitted_rate={_fmt(trace.fitted.rate)}")
        comments.append(f"# fit_r2={_fmt(trace.fitted.r2)}")
    _csv(comments, ent.EntropyTrace.COLUMNS, list(trace.rows()), path)
    return 0


def _cmd_entropy_report(args):
    cfg = _load_config(args.config)
    state = _build_state(cfg)
    rep = ent.sandwich_from_x(state.x, state.grid, state.profile)
    md = ent.mass_defect_from_x(state.x, state.grid, state.profile)
    out = {
        "entropy": rep.entropy, "fisher": rep.fisher, "f_norm": rep.f_norm,
        "grad_norm": rep.grad_norm, "h1": rep.h1, "h2": rep.h2, "h": rep.h,
        "slack_entropy_lower": rep.slack_entropy_lower,
        "slack_entropy_upper": rep.slack_entropy_upper,
        "slack_fisher": rep.slack_fisher, "mass_defect": md,
        "matched_D": state.profile.D,
    }
    comments = ["# fdrates entropy-report"] + cfg.echo_lines()
    _csv(comments, ["key", "value"], sorted(out.items()), args.output)
    return 0


def _cmd_gronwall(args):
    e = exp_mod.derive_exponents(args.d, args.m)
    Lambda = args.Lambda
    if Lambda is None:
        Lambda = float(exp_mod.sharp_rate(e.d, float(e.alpha)))
    params = ent.GronwallParams(exponents=e, Lambda=Lambda, C_unif=args.C)
    h0 = 1.0 + args.C * args.F0 ** params.e_unif
    t, G = ent.gronwall_bound(args.F0, h0, params, args.t_end, args.dt)
    comments = ["# fdrates gronwall", f"# d={args.d}", f"# m={_fmt(args.m)}",
                f"# Lambda={_fmt(Lambda)}", f"# C={_fmt(args.C)}",
                f"# F0={_fmt(args.F0)}", f"# h0={_fmt(h0)}",
                f"# h_star={_fmt(params.h_star)}",
                f"# e_unif={_fmt(params.e_unif)}", f"# dt={_fmt(args.dt)}"]
    _csv(comments, ["t", "G"], zip(t, G), args.output)
    return 0


def _quotient_test_function(name, grid, alpha):
    if name == "gauss":
        return num.RadialField(grid=grid, values=np.exp(-grid.nodes**2))
    if name == "ring":
        return num.RadialField(grid=grid,
                               values=np.exp(-((grid.nodes - 1.0) ** 2)))
    if name.startswith("mode:"):
        l_str, k_str = name[5:].split(",")
        mode = spec.discrete_mode(grid.d, alpha, int(l_str), int(k_str))
        return spec.mode_field(mode, grid)
    raise ConfigError(f"unknown test function {name!r}; "
                      "use gauss, ring, or mode:l,k")


def _cmd_quotient(args):
    e = exp_mod.derive_exponents(args.d, args.m)
    alpha = float(e.alpha)
    grid = num.build_grid(args.R, args.N, args.d, scale=math.sqrt(args.D))
    p = prof.Profile(exponents=e, D=args.D)
    f = _quotient_test_function(args.f, grid, alpha)
    forms = num.assemble_sector_forms(grid, alpha, args.D, f.l)
    # Rayleigh quotient of the mean-zero projection of f
    w2 = args.D + grid.nodes**2
    mu = num.cell_volumes(grid) * w2 ** (alpha - 1.0)
    proj = f.values - np.sum(mu * f.values) / np.sum(mu)
    rq = num.rayleigh_quotient(num.RadialField(grid=grid, values=proj, l=f.l), forms)
    rows = []
    for n in (int(s) for s in args.n.split(",")):
        q = ent.variational_quotient(f, n, p)
        rows.append((n, q, rq, q / rq))
    comments = ["# fdrates quotient", f"# d={args.d}", f"# m={_fmt(args.m)}",
                f"# D={_fmt(args.D)}", f"# f={args.f}",
                f"# R_max={_fmt(args.R)}", f"# N={args.N}"]
    _csv(comments, ["n", "quotient", "rayleigh", "ratio"], rows, args.output)
    return 0


def _cmd_rescale(args):
    e = exp_mod.derive_exponents(args.d, args.m)
    rmap = prof.RescalingMap(exponents=e, T=args.T)
    t, x, v = prof.to_selfsimilar(rmap, args.tau, args.y, args.u)
    row = (args.tau, args.y, args.u, rmap.R(args.tau), t, float(x), v)
    comments = ["# fdrates rescale", f"# d={args.d}", f"# m={_fmt(args.m)}",
                f"# T={_fmt(args.T)}", f"# regime={e.regime.value}"]
    _csv(comments, ["tau", "y", "u", "R", "t", "x", "v"], [row], args.output)
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser():
    p = argparse.ArgumentParser(
        prog="fdrates",
        description="Numerical laboratory for sharp fast-diffusion decay rates.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--output", default=None, help="write to file instead of stdout")
        return sp

    sp = add("constants", _cmd_constants, "exponents, thresholds, sharp constants")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = add("spectrum", _cmd_spectrum, "discrete spectrum table for (d, alpha)")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--l-max", type=int, default=3)
    sp.add_argument("--k-max", type=int, default=3)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = add("hp-verify", _cmd_hp_verify,
             "verify sharp constants by constrained eigensolve")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--alpha", type=str, required=True,
                    help="alpha value or comma-separated sweep")
    sp.add_argument("--D", type=float, default=1.0)
    sp.add_argument("--R", type=float, default=100.0)
    sp.add_argument("--N", type=int, default=1600)
    sp.add_argument("--l-max", type=int, default=3)
    sp.add_argument("--no-extrapolate", action="store_true")

    sp = add("eigenfunction", _cmd_eigenfunction,
             "polynomial eigenfunction and its ODE residual")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--alpha", type=str, required=True)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--dps", type=int, default=50)

    sp = add("evolve", _cmd_evolve, "nonlinear radial flow run from a config file")
    sp.add_argument("--config", required=True)

    sp = add("evolve-linear", _cmd_evolve_linear,
             "linear sector flow run from a config file")
    sp.add_argument("--config", required=True)

    sp = add("entropy-report", _cmd_entropy_report,
             "functionals and sandwich slacks of configured initial data")
    sp.add_argument("--config", required=True)

    sp = add("gronwall", _cmd_gronwall, "integrate the Gronwall comparison ODE")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--F0", type=float, required=True)
    sp.add_argument("--C", type=float, default=0.0)
    sp.add_argument("--Lambda", type=float, default=None)
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)

    sp = add("quotient", _cmd_quotient, "variational sharpness quotient sweep")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--D", type=float, default=1.0)
    sp.add_argument("--f", type=str, default="gauss")
    sp.add_argument("--n", type=str, default="50,100,200,400")
    sp.add_argument("--R", type=float, default=50.0)
    sp.add_argument("--N", type=int, default=1200)

    sp = add("rescale", _cmd_rescale,
             "map original variables (tau, y, u) to rescaled (t, x, v)")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--y", type=float, default=1.0)
    sp.add_argument("--u", type=float, default=1.0)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as e:
        print(f"fdrates: error: {e}", file=sys.stderr)
        return 1
    except (NonConvergenceError, flow_mod.FlowError, ArithmeticError,
            RuntimeError) as e:
        print(f"fdrates: numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
