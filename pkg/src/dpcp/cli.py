"""Command-line experiment runner.

Subcommands::

    synth    --config CFG.json --out DIR
    central  --data Y.csv --lambda1 F --lambdastar F [--max-iters --tol] --out DIR
    dpcp     --data Y.csv --graph G.json --rho K --c F --lambda1 F --lambdastar F
             [--rounds --consensus-tol --p-reg {lambda_star,one}] --out DIR
    compare  --spec SPEC.json [--out DIR]
    impute   --data Y.csv --solution DIR --out OUT.csv
    ingest   --raw RAW.csv --downsample K --out OUT.csv

Exit status: 0 success, 2 parse error, 3 validation error, 4 solver did not
converge, 5 numerical failure. ``DPCP_LOG_LEVEL`` sets log verbosity.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, central, io, network
from .datagen import SynthConfig, synthesize
from .errors import DpcpError, NotConvergedError, ValidationError
from .metrics import error_report, relative_error

log = logging.getLogger("dpcp")

MODES = ("synth", "central", "dpcp", "compare", "impute", "ingest")


def _meta(command, **extra):
    import scipy

    meta = {
        "command": command,
        "versions": {
            "dpcp": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
    }
    meta.update(extra)
    return meta


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_truth(truth_dir):
    if truth_dir is None:
        return None
    d = Path(truth_dir)
    X, _ = io.read_matrix(d / "X.csv")
    O, _ = io.read_matrix(d / "O.csv")
    return X, O


def _args_doc(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _executor(workers):
    return ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else nullcontext()


# -- building blocks shared by the subcommands and by `cmd_compare` -----------


def write_dataset(out, ds, graph):
    out = _outdir(out)
    io.write_matrix(out / "X.csv", ds.X)
    io.write_matrix(out / "O.csv", ds.O)
    io.write_matrix(out / "Y.csv", ds.Y_obs, ds.mask)
    io.write_graph(out / "graph.json", graph)
    io.write_json(out / "meta.json", _meta("synth", config=ds.config.to_dict(), seed=ds.config.seed))


def run_central(obs, cfg, out=None, truth=None):
    sol = central.solve(obs, cfg, record_gaps=True)
    summary = {
        "converged": sol.converged,
        "iters": sol.iters,
        "objective": central.objective(sol.X_hat, sol.O_hat, obs, cfg),
        "kkt": {
            "spectral_gap": sol.kkt_spectral,
            "inf_gap": sol.kkt_inf,
            "support_gap": sol.kkt_support,
            "alignment_gap": sol.kkt_alignment,
        },
    }
    if truth is not None:
        summary["errors"] = error_report(
            sol.X_hat, sol.O_hat, truth[0], truth[1], obs.mask, lambda_1=cfg.lambda_1
        ).to_dict()
    if out is not None:
        out = _outdir(out)
        io.write_matrix(out / "X_hat.csv", sol.X_hat)
        io.write_matrix(out / "O_hat.csv", sol.O_hat)
        io.write_central_trace(out / "trace.csv", sol)
        io.write_json(out / "summary.json", summary)
    return sol, summary


def run_dpcp(obs, graph, cfg, out=None, truth=None, workers=None):
    with _executor(workers) as ex:
        states, trace, stop = network.run(obs, graph, cfg, truth=truth, executor=ex)
    X_hat, O_hat = network.aggregate_estimate(states)
    holds, resid = network.certificate(states, obs, cfg.lambda_star)
    pcp_cfg = central.PcpConfig(lambda_star=cfg.lambda_star, lambda_1=cfg.lambda_1)
    summary = {
        "stop_reason": stop,
        "rounds": len(trace),
        "consensus_max": trace[-1].consensus_max if trace else None,
        "objective_factored": trace[-1].objective if trace else None,
        "objective": central.objective(X_hat, O_hat, obs, pcp_cfg),
        "certificate": {"holds": holds, "residual_spectral": resid, "lambda_star": cfg.lambda_star},
        "config": asdict(cfg),
    }
    if truth is not None:
        summary["errors"] = error_report(
            X_hat, O_hat, truth[0], truth[1], obs.mask, lambda_1=cfg.lambda_1
        ).to_dict()
    if out is not None:
        out = _outdir(out)
        io.write_matrix(out / "X_hat.csv", X_hat)
        io.write_matrix(out / "O_hat.csv", O_hat)
        io.write_dpcp_trace(out / "trace.csv", trace)
        io.write_json(out / "summary.json", summary)
    return (states, trace, stop, X_hat, O_hat), summary


# -- experiment specs ----------------------------------------------------------

_DPCP_KEYS = set(network.DpcpConfig.__dataclass_fields__) - {"lambda_star", "lambda_1"}
_PCP_KEYS = set(central.PcpConfig.__dataclass_fields__) - {"lambda_star", "lambda_1"}


def load_spec(path_or_dict):
    """Validate a compare spec; returns a plain dict with defaults filled in.

    Layout::

        {"mode": "compare", "seed": 0, "out": "runs/x",
         "lambda_1": 0.0141, "lambda_star": 0.346,
         "data": {"synth": {...SynthConfig fields...}}
                 | {"Y": "Y.csv", "graph": "graph.json", "truth": "dir"},
         "central": {"max_iters": ..., "tol_rel": ...},
         "dpcp": {"rho": 5, "c": 1.0, "max_rounds": 3000, ...},
         "workers": 1}

    Relative paths resolve against the spec file's directory.
    """
    base = Path(".")
    if isinstance(path_or_dict, (str, Path)):
        base = Path(path_or_dict).parent
        spec = io.read_json(path_or_dict)
    else:
        spec = dict(path_or_dict)
    if not isinstance(spec, dict):
        raise ValidationError("spec must be a JSON object")
    mode = spec.get("mode", "compare")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    for key in ("lambda_1", "lambda_star", "data"):
        if key not in spec:
            raise ValidationError(f"spec is missing {key!r}")
    data = spec["data"]
    if not isinstance(data, dict) or ("synth" in data) == ("Y" in data):
        raise ValidationError("spec 'data' needs exactly one of 'synth' or 'Y'")
    if "Y" in data:
        if "graph" not in data:
            raise ValidationError("file-based data needs a 'graph' path")
        data = {k: str(base / v) for k, v in data.items()}
        for k, v in data.items():
            if not Path(v).exists():
                raise ValidationError(f"data file {k}={v} does not exist")
    unknown = set(spec.get("dpcp", {})) - _DPCP_KEYS
    unknown |= set(spec.get("central", {})) - _PCP_KEYS
    if unknown:
        raise ValidationError(f"unknown solver settings: {sorted(unknown)}")
    if "rho" not in spec.get("dpcp", {}):
        raise ValidationError("spec 'dpcp' needs 'rho'")
    out = dict(spec, mode=mode, data=data)
    out.setdefault("seed", 0)
    out.setdefault("central", {})
    out.setdefault("workers", 1)
    if "out" in out:
        out["out"] = str(base / out["out"])
    return out


def cmd_compare(spec, out=None):
    """Run the centralized and distributed solvers on one dataset and compare.

    Returns the report dict that is also written to ``report.json``.
    """
    spec = load_spec(spec)
    out = out if out is not None else spec.get("out")
    if out is None:
        raise ValidationError("no output directory: set 'out' in the spec or pass --out")
    out = _outdir(out)
    lam1, lams = float(spec["lambda_1"]), float(spec["lambda_star"])
    truth = None
    if "synth" in spec["data"]:
        scfg = SynthConfig.from_dict({"seed": spec["seed"], **spec["data"]["synth"]})
        ds, graph = synthesize(scfg)
        write_dataset(out / "data", ds, graph)
        obs, truth = ds.observations, (ds.X, ds.O)
    else:
        obs = io.read_observations(spec["data"]["Y"])
        graph = io.read_graph(spec["data"]["graph"])
        truth = _read_truth(spec["data"].get("truth"))

    pcp_cfg = central.PcpConfig(lambda_star=lams, lambda_1=lam1, **spec["central"])
    dcfg = network.DpcpConfig(
        lambda_star=lams, lambda_1=lam1, **{"seed": spec["seed"], **spec["dpcp"]}
    )
    sol, csum = run_central(obs, pcp_cfg, out / "central", truth)
    (states, trace, stop, X_d, O_d), dsum = run_dpcp(
        obs, graph, dcfg, out / "dpcp", truth, workers=spec["workers"]
    )
    try:
        disc = relative_error(X_d, sol.X_hat)
    except ValidationError:
        disc = float(np.linalg.norm(X_d - sol.X_hat))
    report = {
        "discrepancy_X": disc,
        "objective_gap_rel": abs(dsum["objective"] - csum["objective"]) / max(abs(csum["objective"]), 1e-300),
        "central": csum,
        "dpcp": dsum,
        "flags": {
            "central_converged": sol.converged,
            "dpcp_converged": stop == "converged",
        },
    }
    io.write_json(out / "spec.json", spec)
    io.write_json(out / "report.json", report)
    io.write_json(out / "meta.json", _meta("compare", seed=spec["seed"]))
    return report


# -- argparse front end --------------------------------------------------------


def _synth(args):
    cfg_doc = io.read_json(args.config) if args.config else {}
    if not isinstance(cfg_doc, dict):
        raise ValidationError("synth config must be a JSON object")
    if args.seed is not None:
        cfg_doc["seed"] = args.seed
    cfg = SynthConfig.from_dict(cfg_doc)
    ds, graph = synthesize(cfg)
    write_dataset(args.out, ds, graph)
    return 0


def _central(args):
    obs = io.read_observations(args.data)
    cfg = central.PcpConfig(
        lambda_star=args.lambdastar,
        lambda_1=args.lambda1,
        max_iters=args.max_iters,
        tol_rel=args.tol,
        step=args.step,
    )
    sol, _ = run_central(obs, cfg, args.out, _read_truth(args.truth))
    io.write_json(Path(args.out) / "meta.json", _meta("central", args=_args_doc(args)))
    if not sol.converged:
        raise NotConvergedError(f"PCP did not converge in {cfg.max_iters} iterations")
    return 0


def _dpcp(args):
    obs = io.read_observations(args.data)
    graph = io.read_graph(args.graph)
    cfg = network.DpcpConfig(
        rho=args.rho,
        c=args.c,
        lambda_star=args.lambdastar,
        lambda_1=args.lambda1,
        max_rounds=args.rounds,
        consensus_tol=args.consensus_tol,
        objective_tol=args.objective_tol,
        seed=args.seed,
        p_reg=args.p_reg,
        init=args.init,
    )
    (_, trace, stop, _, _), _ = run_dpcp(
        obs, graph, cfg, args.out, _read_truth(args.truth), workers=args.workers
    )
    io.write_json(Path(args.out) / "meta.json", _meta("dpcp", args=_args_doc(args), seed=args.seed))
    if stop != "converged":
        raise NotConvergedError(f"D-PCP stopped at max_rounds={cfg.max_rounds}")
    return 0


def _compare(args):
    report = cmd_compare(args.spec, args.out)
    print(f"discrepancy_X={report['discrepancy_X']:.6g} "
          f"certificate={report['dpcp']['certificate']['holds']} "
          f"dpcp={report['dpcp']['stop_reason']}")
    return 0


def _impute(args):
    Y, mask = io.read_matrix(args.data)
    X_hat, _ = io.read_matrix(Path(args.solution) / "X_hat.csv")
    if X_hat.shape != Y.shape:
        raise ValidationError(f"solution shape {X_hat.shape} does not match data {Y.shape}")
    filled = X_hat if args.cleansed else np.where(mask > 0, Y, X_hat)
    io.write_matrix(args.out, filled)
    return 0


def _ingest(args):
    Y, mask = io.read_matrix(args.raw)
    if args.transpose:
        Y, mask = Y.T, mask.T
    io.write_matrix(args.out, io.downsample(Y, args.downsample), io.downsample(mask, args.downsample))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dpcp", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"dpcp {__version__}")
    sub = p.add_subparsers(dest="mode", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset and graph")
    s.add_argument("--config", help="JSON with SynthConfig fields (defaults otherwise)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_synth)

    s = sub.add_parser("central", help="centralized PCP")
    s.add_argument("--data", required=True)
    s.add_argument("--lambda1", type=float, required=True)
    s.add_argument("--lambdastar", type=float, required=True)
    s.add_argument("--max-iters", type=int, default=20000)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--truth", help="directory with X.csv and O.csv")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_central)

    s = sub.add_parser("dpcp", help="distributed PCP over a meter graph")
    s.add_argument("--data", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--rho", type=int, required=True)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--lambda1", type=float, required=True)
    s.add_argument("--lambdastar", type=float, required=True)
    s.add_argument("--rounds", type=int, default=3000)
    s.add_argument("--consensus-tol", type=float, default=1e-3)
    s.add_argument("--objective-tol", type=float, default=1e-6)
    s.add_argument("--p-reg", choices=network.P_REG_CHOICES, default="lambda_star")
    s.add_argument("--init", choices=network.INIT_CHOICES, default="gaussian")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--truth", help="directory with X.csv and O.csv")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_dpcp)

    s = sub.add_parser("compare", help="run both solvers from an experiment spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.set_defaults(func=_compare)

    s = sub.add_parser("impute", help="fill unobserved entries from a solution")
    s.add_argument("--data", required=True)
    s.add_argument("--solution", required=True, help="directory holding X_hat.csv")
    s.add_argument("--cleansed", action="store_true", help="emit X_hat everywhere")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_impute)

    s = sub.add_parser("ingest", help="downsample a raw matrix CSV")
    s.add_argument("--raw", required=True)
    s.add_argument("--downsample", type=int, default=1)
    s.add_argument("--transpose", action="store_true", help="input rows are time slots")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_ingest)
    return p


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("DPCP_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DpcpError as exc:
        print(f"dpcp {args.mode}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"dpcp {args.mode}: {exc}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
