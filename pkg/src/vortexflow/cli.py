"""Command-line experiment runner.

Subcommands::

    vortexflow run CONFIG [--resume CHECKPOINT] [--section.key VALUE ...]
    vortexflow weights CONFIG [--xi "[-1]"] [--snapshot FILE]
    vortexflow classify CONFIG [--snapshot FILE]
    vortexflow uniqueness CONFIG [--seed N]
    vortexflow finitedim {dominant-weight,weight,flow,lojasiewicz} --weights W --tau T --x X
    vortexflow lojfit SERIES.csv [--column f_moment]

Any ``--section.key value`` pair overrides the matching config entry. Exit
codes: 0 converged or done, 2 ``t_max`` reached, 3 blow-up, 64 bad
configuration or arguments, 74 file errors, 1 any other failure.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np
import yaml

from . import config as cf
from . import fields as fl
from . import finitedim as fd
from . import io
from . import lattice as lat
from . import stability as st
from .exceptions import BlowUp, ConfigError, VortexFlowError
from .flow import lojasiewicz_fit, run_flow

log = logging.getLogger("vortexflow")

EXIT_OK, EXIT_OTHER, EXIT_TMAX, EXIT_BLOWUP, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 64, 74
SNAP_EXT = {"binary": ".vfs", "csv": ".csv"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write_report(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary(title, payload):
    print(f"{title}:")
    for key, val in payload.items():
        if isinstance(val, (dict, list)):
            continue
        print(f"  {key}: {val}")


def _load(args):
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{args.config}: cannot parse configuration: {exc}") from exc
    raw = cf.apply_overrides(raw, args.overrides)
    return cf.validate(raw)


def _outdir(cfg):
    out = cfg["output"]["dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _pair_from(cfg, snapshot):
    if snapshot:
        return io.snapshot_to_pair(io.read_snapshot(snapshot))
    return cf.build_initial(cfg)


def _truncate_series(path, t):
    """Drop rows recorded after ``t`` so a resumed run appends where the checkpoint left off."""
    with open(path) as fh:
        lines = fh.readlines()
    keep = lines[:1] + [ln for ln in lines[1:] if float(ln.split(",", 1)[0]) <= t]
    with open(path, "w") as fh:
        fh.writelines(keep)


# ---- run -------------------------------------------------------------------

def cmd_run(args):
    cfg = _load(args)
    out = _outdir(cfg)
    fmt = cfg["output"]["snapshot_format"]
    ext = SNAP_EXT[fmt]
    snapdir = os.path.join(out, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    fcfg = cf.flow_config(cfg)
    series_path = os.path.join(out, "timeseries.csv")
    ckpt_path = os.path.join(out, "checkpoint" + ext)

    if args.resume:
        state = io.snapshot_to_state(io.read_snapshot(args.resume))
        A0, u0 = state.A0, state.u0
        skip = [True]
        append = os.path.exists(series_path)
        if append:
            _truncate_series(series_path, state.t)
    else:
        A0, u0 = cf.build_initial(cfg)
        state = None
        skip = [False]
        append = False
    every = fcfg.snapshot_every

    def on_snapshot(s):
        snap = io.state_to_snapshot(s)
        idx = int(round(s.t / every))
        io.write_snapshot(os.path.join(snapdir, f"snap_{idx:05d}{ext}"), snap, fmt)
        io.write_snapshot(ckpt_path, snap, fmt)

    with io.TimeSeriesWriter(series_path, append=append) as writer:
        def on_record(row):
            if skip[0]:
                skip[0] = False
                return
            writer(row)

        try:
            rep = run_flow(A0, u0, fcfg, state=state, on_record=on_record, on_snapshot=on_snapshot)
        except BlowUp as exc:
            _write_report(os.path.join(out, "report.json"), {"status": "blow-up", "message": str(exc)})
            print(f"blow-up: {exc}", file=sys.stderr)
            return EXIT_BLOWUP
    fin = rep.final
    io.write_snapshot(os.path.join(out, "final" + ext), io.state_to_snapshot(fin), fmt)
    summary = rep.summary()
    summary["sup_u2_ok"] = bool(np.max(rep.column("sup_u2")) <= rep.sup_u2_bound)
    if cfg["analysis"]["loj_fit"]:
        try:
            phi = rep.column("f_moment")
            f_inf = float(phi[-1]) if rep.series["phi_l2"][-1] > 1e-6 else 0.0
            g, q, _ = lojasiewicz_fit(rep.column("t"), phi, f_inf=f_inf)
            summary["gamma"], summary["gamma_quality"] = g, q
        except VortexFlowError as exc:
            summary["gamma_error"] = str(exc)
    _write_report(os.path.join(out, "report.json"), summary)
    _summary("run", summary)
    return EXIT_OK if rep.status == "converged" else EXIT_TMAX


# ---- analyses ----------------------------------------------------------------

def _ray_directions(cfg, args, grid, spec):
    if args.xi is not None:
        vals = yaml.safe_load(args.xi)
        return [("cli", _constant_xi(vals, grid, spec))]
    rays = cfg["analysis"]["rays"]
    if not rays:
        raise ConfigError("no directions: pass --xi or set analysis.rays")
    out = []
    for k, ray in enumerate(rays):
        if "constant" in ray:
            out.append((f"ray{k}", _constant_xi(ray["constant"], grid, spec)))
        else:
            if "seed" not in ray:
                raise ConfigError(f"analysis.rays[{k}] needs a seed for a random direction")
            rng = cf.make_rng(ray["seed"])
            xi = fl.smooth_random_field(grid, (spec.k,), rng, modes=int(ray.get("modes", 1)),
                                        amplitude=float(ray.get("amplitude", 1.0)))
            out.append((f"ray{k}", xi))
    return out


def _constant_xi(vals, grid, spec):
    v = np.atleast_1d(np.asarray(vals, dtype=float))
    if v.size not in (1, spec.k):
        raise ConfigError(f"a direction needs {spec.k} entries")
    v = np.broadcast_to(v, (spec.k,))
    return np.broadcast_to(v[:, None, None], (spec.k,) + grid.shape).copy()


def cmd_weights(args):
    cfg = _load(args)
    out = _outdir(cfg)
    A, u = _pair_from(cfg, args.snapshot)
    t_max = args.tmax if args.tmax is not None else cfg["analysis"]["weight_tmax"]
    report = {}
    for name, xi in _ray_directions(cfg, args, A.grid, A.spec):
        res = st.weight(A, u, xi, t_max=t_max, tol=args.tol)
        entry = res.as_dict()
        entry["xi_norm"] = float(np.sqrt(lat.inner(xi, xi, A.grid)))
        report[name] = entry
        print(f"{name}: weight = {entry['value']}  (bounded={res.bounded})")
    _write_report(os.path.join(out, "weights.json"), report)
    return EXIT_OK


def cmd_classify(args):
    cfg = _load(args)
    out = _outdir(cfg)
    A, u = _pair_from(cfg, args.snapshot)
    v = st.classify_limit(A, u, tol=args.tol, phi_tol=args.phi_tol or cfg["analysis"]["phi_tol"],
                          sigma_tol=args.sigma_tol or cfg["analysis"]["sigma_tol"])
    payload = v.as_dict()
    _write_report(os.path.join(out, "classify.json"), payload)
    _summary("classify", payload)
    return EXIT_OK


def cmd_uniqueness(args):
    cfg = _load(args)
    out = _outdir(cfg)
    seed = args.seed if args.seed is not None else cfg["analysis"]["uniqueness_gauge_seed"]
    if seed is None:
        raise ConfigError("uniqueness needs --seed or analysis.uniqueness_gauge_seed")
    A0, u0 = cf.build_initial(cfg)
    rng = cf.make_rng(seed)
    amp = cfg["analysis"]["uniqueness_amplitude"]
    shape = (A0.spec.k,)
    g = fl.ComplexGauge(fl.smooth_random_field(A0.grid, shape, rng, amplitude=amp),
                        fl.smooth_random_field(A0.grid, shape, rng, amplitude=amp))
    res = st.ness_uniqueness_test(A0, u0, g, cf.flow_config(cfg))
    res.pop("reports")
    _write_report(os.path.join(out, "uniqueness.json"), res)
    _summary("uniqueness", res)
    return EXIT_OK if all(s == "converged" for s in res["status"]) else EXIT_TMAX


def cmd_finitedim(args):
    spec = fl.ActionSpec(yaml.safe_load(args.weights), yaml.safe_load(args.tau))
    x = np.asarray(yaml.safe_load(args.x) if args.x else np.zeros(spec.n), dtype=complex)
    if args.imag:
        x = x + 1j * np.asarray(yaml.safe_load(args.imag), dtype=float)
    if x.shape != (spec.n,):
        raise ConfigError(f"--x needs {spec.n} entries")
    task = args.task
    if task == "dominant-weight":
        xi, val = fd.fd_dominant_weight_bruteforce(x, spec, n_grid=args.n_grid)
        payload = {"xi": xi, "value": val}
    elif task == "weight":
        if args.xi is None:
            raise ConfigError("finitedim weight needs --xi")
        xi = np.asarray(yaml.safe_load(args.xi), dtype=float)
        payload = {"xi": xi, "closed_form": fd.fd_weight(x, xi, spec),
                   "numeric": fd.fd_weight_numeric(x, xi, spec)}
    elif task == "flow":
        res = fd.fd_flow(x, spec, t_max=args.tmax, tol=args.tol, raise_on_tmax=False)
        payload = {"limit_re": res.limit.real, "limit_im": res.limit.imag, "converged": res.converged,
                   "mu_norm": float(res.mu_norm[-1]), "t": float(res.t[-1])}
    else:
        res = fd.fd_lojasiewicz_probe(x, spec)
        payload = {k: v for k, v in res.items() if np.ndim(v) == 0 or k == "radii"}
    payload["task"] = task
    os.makedirs(args.out, exist_ok=True)
    _write_report(os.path.join(args.out, "finitedim.json"), payload)
    _summary(f"finitedim {task}", payload)
    if task == "flow" and not payload["converged"]:
        return EXIT_TMAX
    return EXIT_OK


def cmd_lojfit(args):
    data = io.read_timeseries(args.series)
    if args.column not in data:
        raise ConfigError(f"column {args.column!r} not in {sorted(data)}")
    f = data[args.column]
    f_inf = args.f_inf
    if f_inf is None:
        f_inf = float(f[-1]) if f[-1] > 1e-12 else 0.0
    g, q, info = lojasiewicz_fit(data["t"], f, f_inf=f_inf)
    payload = {"gamma": g, "quality": q, "f_inf": f_inf, "column": args.column}
    payload.update({k: v for k, v in info.items() if np.ndim(v) == 0})
    os.makedirs(args.out, exist_ok=True)
    _write_report(os.path.join(args.out, "lojfit.json"), payload)
    _summary("lojfit", payload)
    return EXIT_OK


# ---- entry point ---------------------------------------------------------------

def build_parser():
    p = _Parser(prog="vortexflow", description="Gradient flows of vortex equations on a lattice torus.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(name, fn, help_):
        q = sub.add_parser(name, help=help_)
        q.add_argument("config", help="YAML experiment file")
        q.set_defaults(fn=fn)
        return q

    q = with_config("run", cmd_run, "run the flow and write series, snapshots and a report")
    q.add_argument("--resume", help="checkpoint file to continue from")

    q = with_config("weights", cmd_weights, "weights of the initial pair (or a snapshot) along rays")
    q.add_argument("--xi", help="constant direction, e.g. '[-1]'; defaults to analysis.rays")
    q.add_argument("--snapshot", help="take the pair from this snapshot instead of init")
    q.add_argument("--tmax", type=float, default=None, help="largest ray time (analysis.weight_tmax)")
    q.add_argument("--tol", type=float, default=1e-10, help="settling tolerance (default 1e-10)")

    q = with_config("classify", cmd_classify, "classify a (near-)critical pair")
    q.add_argument("--snapshot", help="pair to classify, usually final.vfs of a run")
    q.add_argument("--tol", type=float, default=1e-6, help="critical-point tolerance (default 1e-6)")
    q.add_argument("--phi-tol", type=float, default=None, help="|Phi| threshold (analysis.phi_tol)")
    q.add_argument("--sigma-tol", type=float, default=None, help="sigma_min threshold (analysis.sigma_tol)")

    q = with_config("uniqueness", cmd_uniqueness, "flow two gauge-related starts and compare the limits")
    q.add_argument("--seed", type=int, default=None, help="gauge seed (analysis.uniqueness_gauge_seed)")

    q = sub.add_parser("finitedim", help="finite-dimensional torus action on C^n")
    q.add_argument("task", choices=["dominant-weight", "weight", "flow", "lojasiewicz"])
    q.add_argument("--weights", required=True, help="k x n weight matrix, e.g. '[[1,0],[0,1]]'")
    q.add_argument("--tau", required=True, help="central element, e.g. '[1,3]'")
    q.add_argument("--x", default=None, help="real parts of the point (default 0)")
    q.add_argument("--imag", default=None, help="imaginary parts of the point")
    q.add_argument("--xi", default=None, help="direction for the weight task")
    q.add_argument("--tmax", type=float, default=200.0)
    q.add_argument("--tol", type=float, default=1e-10)
    q.add_argument("--n-grid", type=int, default=3600, help="sphere samples for the search")
    q.add_argument("--out", default=".", help="directory for finitedim.json")
    q.set_defaults(fn=cmd_finitedim, config=None)

    q = sub.add_parser("lojfit", help="fit the decay exponent of a recorded series")
    q.add_argument("series", help="timeseries.csv from a run")
    q.add_argument("--column", default="f_moment")
    q.add_argument("--f-inf", type=float, default=None, help="limit value (default: last value or 0)")
    q.add_argument("--out", default=".", help="directory for lojfit.json")
    q.set_defaults(fn=cmd_lojfit, config=None)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        parser = build_parser()
        args, extra = parser.parse_known_args(argv)
        if extra and args.config is None:
            raise ConfigError(f"unrecognised arguments: {' '.join(extra)}")
        args.overrides = extra
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VortexFlowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
