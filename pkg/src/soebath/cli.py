"""
Command-line interface.

Exit codes: 0 success, 2 partial result (flagged rows, refinement or fit
target missed, oracle tolerance missed), 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import gle as gle_mod
from .contour import RefinementError, build_bcf_soe
from .oracle import BcfOracle, OracleToleranceWarning, reference_for
from .prony import esprit, minimal_modes, sample
from .soe import SoeRepresentation, l1_error, linf_error, time_grid
from .spectral import SpectralModel
from .sweep import PRESETS, SweepSpec, emit, run_sweep

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 2, 3

log = logging.getLogger("soebath")


class ConfigError(Exception):
    pass


def _load_json(text_or_path):
    if isinstance(text_or_path, dict):
        return text_or_path
    s = str(text_or_path).strip()
    if s.startswith("{"):
        return json.loads(s)
    with open(s) as fh:
        return json.load(fh)


def _load_config(name):
    if name is None:
        return {}
    if name in PRESETS:
        return dict(PRESETS[name])
    return _load_json(name)


def _model(args) -> SpectralModel:
    if args.model is None:
        raise ConfigError("a model is required (--model or config key 'model')")
    return SpectralModel.from_json(_load_json(args.model))


def _write_json(doc, out):
    text = json.dumps(doc, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_rows(header, rows, out, fmt):
    if fmt == "json":
        _write_json({"columns": list(header), "rows": [dict(zip(header, r)) for r in rows]}, out)
        return
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    finally:
        if out:
            fh.close()


# ------------------------------------------------------------ subcommands

def cmd_build(args):
    model = _model(args)
    try:
        soe = build_bcf_soe(model, args.eps, args.T, args.norm, args.theta0, args.theta1,
                            args.kappa, refine=not args.no_refine, dt=args.dt)
        code = EXIT_OK
    except RefinementError as exc:
        log.warning("%s", exc)
        soe, code = exc.best, EXIT_PARTIAL
    _write_json(soe.to_json(), args.out)
    return code


def cmd_oracle(args):
    model = _model(args)
    t = time_grid(args.tmax, args.dt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OracleToleranceWarning)
        res = BcfOracle(model, args.abs_tol).evaluate(t)
    rows = [(tk, v.real, v.imag, e) for tk, v, e in zip(t, res.values, res.error)]
    _write_rows(("t", "re", "im", "err_estimate"), rows, args.out, args.format)
    return EXIT_PARTIAL if res.flagged else EXIT_OK


def cmd_error(args):
    model = _model(args)
    if args.soe is None:
        raise ConfigError("--soe is required")
    soe = SoeRepresentation.load(args.soe)
    ref = reference_for(model)
    t = time_grid(args.tmax, args.dt)
    vals = np.asarray(ref(t), dtype=complex)
    doc = {"N": soe.N, "T": args.tmax, "dt": args.dt,
           "l1": l1_error(soe, vals, args.tmax, args.dt),
           "linf": linf_error(soe, vals, args.tmax, args.dt)}
    _write_json(doc, args.out)
    return EXIT_OK


def _synthetic(n_terms, seed, dt):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-5, 5, n_terms) - 1j * rng.uniform(0.01, 1, n_terms)
    c = rng.uniform(0.5, 2, n_terms) * np.exp(2j * np.pi * rng.uniform(size=n_terms))
    return SoeRepresentation(c, z)


def cmd_esprit(args):
    if args.synthetic:
        truth = _synthetic(args.synthetic, args.seed, args.dt)
        ref = truth
    else:
        ref = reference_for(_model(args))
    if args.n is not None:
        soe = esprit(sample(ref, args.tmax, args.dt), args.n, method=args.method)
        soe = soe.with_error("L1", l1_error(soe, ref, args.tmax, args.dt))
        code = EXIT_OK
    else:
        _, soe = minimal_modes(ref, args.tmax, args.eps, args.dt, args.nmax, args.method)
        code = EXIT_PARTIAL if soe.meta.get("flagged") else EXIT_OK
    _write_json(soe.to_json(), args.out)
    return code


def cmd_sweep(args, config):
    doc = {k: v for k, v in config.items()}
    for key in ("model", "axis", "values", "eps", "T", "beta", "method", "norm", "dt"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = _load_json(val) if key == "model" else val
    if args.nmax is not None:
        doc["N_max"] = args.nmax
    if "model" not in doc:
        raise ConfigError("sweep needs a model")
    spec = SweepSpec.from_json(doc)
    result = run_sweep(spec, args.jobs)
    out = args.out or f"sweep.{args.format}"
    emit(result, out, args.format)
    for r in result.rows:
        log.info("%s=%g N=%d error=%.3g time=%.2fs%s", spec.axis, r.axis_value, r.N, r.error,
                 r.wall_time_s, " FLAGGED " + r.message if r.flagged else "")
    return EXIT_PARTIAL if result.partial else EXIT_OK


def cmd_gle(args):
    params = args.params or []
    if args.kernel == "chain":
        m, K = (params + [1.0, 1.0][len(params):])[:2]
        kernel = gle_mod.kernel_to_soe(gle_mod.chain_kernel(m, K), args.eps, args.tmax)
        mass = m
    elif args.kernel == "fractional":
        g, nu = (params + [math.gamma(0.5), 0.5][len(params):])[:2]
        kernel = gle_mod.fractional_kernel(g, nu, args.tmin, args.tmax, args.eps)
        mass = 1.0
        if args.mode != "aux":
            raise ConfigError("the fractional kernel is singular at t = 0; use --mode aux")
    else:
        raise ConfigError(f"unknown kernel '{args.kernel}'")
    system = gle_mod.harmonic(mass, kernel, args.stiffness, args.u0, args.v0)
    rows = []
    modes = ["aux", "conv"] if args.mode == "both" else [args.mode]
    for mode in modes:
        run = gle_mod.integrate_aux if mode == "aux" else gle_mod.integrate_convolution
        traj = run(system, args.dt, args.tmax)
        stride = max(1, int(round(args.every / args.dt))) if args.every else 1
        for i in range(0, len(traj), stride):
            rows.append((traj.t[i], traj.u[i], traj.v[i], traj.E[i], mode))
    _write_rows(("t", "u", "v", "E", "mode"), rows, args.out, args.format)
    return EXIT_OK


# ---------------------------------------------------------------- parsing

def _globals(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="config JSON file or preset name (fig1)")
    parser.add_argument("--out", default=d, help="output path (stdout when omitted)")
    parser.add_argument("--format", choices=("csv", "json"), default=d)
    parser.add_argument("--jobs", type=int, default=d, help="worker processes for sweeps")
    parser.add_argument("--seed", type=int, default=d, help="seed for synthetic SOEs")
    parser.add_argument("-v", "--verbose", action="store_true", default=d)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soebath", description=__doc__.strip().splitlines()[0])
    _globals(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    def quad(sp):
        sp.add_argument("--eps", type=float)
        sp.add_argument("--T", "--tmax", dest="T", type=float)
        sp.add_argument("--norm", choices=("l1", "linf", "L1", "Linf"))
        sp.add_argument("--theta0", type=float)
        sp.add_argument("--theta1", type=float)
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--no-refine", action="store_true", default=None)
        sp.add_argument("--dt", type=float)

    b = sub.add_parser("build", parents=[common], help="quadrature SOE of a model's BCF")
    b.add_argument("--model")
    quad(b)

    o = sub.add_parser("oracle", parents=[common], help="reference BCF samples")
    o.add_argument("--model")
    o.add_argument("--tmax", type=float)
    o.add_argument("--dt", type=float)
    o.add_argument("--abs-tol", type=float)

    e = sub.add_parser("error", parents=[common], help="L1 / Linf error of an SOE file")
    e.add_argument("--model")
    e.add_argument("--soe")
    e.add_argument("--tmax", type=float)
    e.add_argument("--dt", type=float)

    s = sub.add_parser("esprit", parents=[common], help="minimal ESPRIT fit")
    s.add_argument("--model")
    s.add_argument("--eps", type=float)
    s.add_argument("--tmax", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--nmax", type=int)
    s.add_argument("--n", type=int, help="fit exactly this many modes")
    s.add_argument("--method", choices=("full", "decimated"))
    s.add_argument("--synthetic", type=int, help="fit a random SOE with this many terms")

    w = sub.add_parser("sweep", parents=[common], help="sweep over T, eps or beta")
    w.add_argument("--model")
    w.add_argument("--axis", choices=("T", "eps", "beta"))
    w.add_argument("--values", type=float, nargs="+")
    w.add_argument("--eps", type=float)
    w.add_argument("--T", type=float)
    w.add_argument("--beta", type=float)
    w.add_argument("--method", choices=("quadrature", "quadrature+refine", "esprit"))
    w.add_argument("--norm", choices=("l1", "linf", "L1", "Linf"))
    w.add_argument("--dt", type=float)
    w.add_argument("--nmax", type=int)

    g = sub.add_parser("gle", parents=[common], help="integrate a GLE with an SOE kernel")
    g.add_argument("--kernel", choices=("chain", "fractional"))
    g.add_argument("--params", type=float, nargs="+")
    g.add_argument("--dt", type=float)
    g.add_argument("--tmax", type=float)
    g.add_argument("--mode", choices=("aux", "conv", "both"))
    g.add_argument("--eps", type=float)
    g.add_argument("--tmin", type=float)
    g.add_argument("--stiffness", type=float)
    g.add_argument("--u0", type=float)
    g.add_argument("--v0", type=float)
    g.add_argument("--every", type=float, help="output spacing in time units")
    return p


DEFAULTS = {
    "build": {"eps": 0.01, "T": 100.0, "norm": "L1", "theta0": math.pi / 12,
              "theta1": math.pi / 12, "kappa": 1.0, "no_refine": False, "dt": 0.01},
    "oracle": {"tmax": 10.0, "dt": 0.01, "abs_tol": 1e-10},
    "error": {"tmax": 100.0, "dt": 0.01},
    "esprit": {"eps": 0.01, "tmax": 100.0, "dt": 0.01, "nmax": 20, "method": "full",
               "synthetic": None, "n": None},
    "sweep": {},
    "gle": {"kernel": "chain", "dt": 1e-3, "tmax": 50.0, "mode": "both", "eps": 1e-6,
            "tmin": 1e-3, "stiffness": 1.0, "u0": 1.0, "v0": 0.0, "every": None,
            "params": None},
}
GLOBAL_DEFAULTS = {"config": None, "out": None, "format": "csv", "jobs": None, "seed": 0,
                   "verbose": False}


def _apply_defaults(args, config):
    for key, val in GLOBAL_DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, val))
    if args.command == "sweep":
        return
    for key, val in DEFAULTS[args.command].items():
        if getattr(args, key, None) is None:
            alias = {"T": "tmax", "tmax": "T"}.get(key)
            setattr(args, key, config.get(key, config.get(alias, val) if alias else val))
    if getattr(args, "model", None) is None and "model" in config:
        args.model = config["model"]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        _apply_defaults(args, config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {"build": cmd_build, "oracle": cmd_oracle, "error": cmd_error,
                "esprit": cmd_esprit, "gle": cmd_gle}
    try:
        if args.command == "sweep":
            return cmd_sweep(args, config)
        return handlers[args.command](args)
    except (ConfigError, ValueError, KeyError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
