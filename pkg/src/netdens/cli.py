"""Command-line interface.

Subcommands: ``estimate``, ``test-vertices``, ``simulate`` and
``benchmark``.  Options may also come from a JSON file given with
``--config`` (keys are the long option names with dashes or
underscores); explicit flags win over the file.  ``NETDENS_SEED``
overrides a seed from the file but not an explicit ``--seed``.

Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.  Errors
are printed to stderr as a JSON object with an ``error`` field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .binning import bin_events, default_bin_width, write_histogram_csv
from .errors import NetdensError, NetworkError, NumericalError
from .io import load_events, load_network, write_events, write_network
from .kernels import KERNELS, get_kernel
from .piecewise import density_profile, write_profile_csv
from .simulate import (
    CASES,
    METHODS,
    TYPE2_BANDWIDTH,
    TYPE2_PAIRS,
    case_spec,
    replicate_streams,
    run_benchmark,
    sample_case,
    star_network,
    type2_study,
    write_manifest,
    write_metrics_csv,
    write_type2_csv,
)
from .vertex_test import SCHEMA_VERSION, run_vertex_tests

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_NUMERICAL", "EXIT_USAGE"]

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "h": None,
    "omega": None,
    "alpha": 0.05,
    "kernel": "epanechnikov",
    "step": None,
    "out": ".",
    "seed": 0,
    "threads": None,
    "holm": False,
    "no_slopes": False,
    "histogram": False,
    "case": "II",
    "reps": 100,
    "n_per_edge": 1000,
    "methods": ",".join(METHODS),
    "study": "compare",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap (default: all cores)")
    common.add_argument("--kernel", choices=sorted(KERNELS))
    common.add_argument("--alpha", type=float, help="test level; accept when p > alpha")

    data = _Parser(add_help=False, argument_default=S)
    data.add_argument("--network", help="network JSON")
    data.add_argument("--events", help="events CSV (edge_id,offset)")
    data.add_argument("--h", type=float, help="bandwidth")
    data.add_argument("--omega", type=float, help="bin width (default h/20)")
    data.add_argument("--holm", action="store_true", help="Holm correction across vertices")
    data.add_argument("--histogram", action="store_true", help="also write histogram.csv")

    p = _Parser(prog="netdens", description="Density estimation on linear networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    est = sub.add_parser("estimate", parents=[common, data], argument_default=S,
                         help="density profile along every edge")
    est.add_argument("--step", type=float, help="grid step (default min(h/4, length/20))")
    est.add_argument("--no-slopes", action="store_true", help="skip the slope pretest")
    sub.add_parser("test-vertices", parents=[common, data], argument_default=S,
                   help="equality tests at every vertex")
    sim = sub.add_parser("simulate", parents=[common], argument_default=S,
                         help="write one synthetic data set")
    sim.add_argument("--case", type=str.upper, choices=sorted(CASES))
    sim.add_argument("--n-per-edge", type=int)
    bench = sub.add_parser("benchmark", parents=[common], argument_default=S,
                           help="Monte Carlo comparison of estimators")
    bench.add_argument("--study", choices=["compare", "type2"])
    bench.add_argument("--case", type=str.upper, choices=sorted(CASES))
    bench.add_argument("--reps", type=int)
    bench.add_argument("--n-per-edge", type=int)
    bench.add_argument("--h", type=float)
    bench.add_argument("--omega", type=float)
    bench.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    return p


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise FileNotFoundError(f"config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: invalid JSON ({exc})") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        file_cfg.pop("command", None)
    cfg.update(file_cfg)
    env = os.environ.get("NETDENS_SEED")
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise UsageError(f"NETDENS_SEED must be an integer, got {env!r}") from None
    cfg.update({k: v for k, v in vars(args).items() if k != "config"})
    if cfg.get("h") is not None and not cfg["h"] > 0:
        raise UsageError("--h must be positive")
    if not 0.0 <= float(cfg["alpha"]) <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    if cfg.get("omega") is not None and not cfg["omega"] > 0:
        raise UsageError("--omega must be positive")
    if cfg["kernel"] not in KERNELS:
        raise UsageError(f"unknown kernel {cfg['kernel']!r}")
    if cfg.get("threads") is not None and cfg["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_inputs(cfg):
    _need(cfg, "network", "events", "h")
    for k in ("network", "events"):
        if not Path(cfg[k]).is_file():
            raise FileNotFoundError(f"{k} file not found: {cfg[k]}")
    net = load_network(cfg["network"])
    events = load_events(cfg["events"], net)
    omega = cfg["omega"] or default_bin_width(cfg["h"])
    binned = bin_events(net, events, omega)
    return net, events, binned, omega


def _run_config(cfg, omega=None) -> dict:
    keep = {k: v for k, v in cfg.items() if k not in ("out",)}
    if omega is not None:
        keep["omega"] = omega
    return keep


def cmd_test_vertices(cfg) -> int:
    net, _, binned, omega = _load_inputs(cfg)
    k = get_kernel(cfg["kernel"])
    t0 = time.perf_counter()
    dec = run_vertex_tests(net, binned, cfg["h"], cfg["alpha"], k, holm=cfg["holm"])
    out = _outdir(cfg)
    doc = dec.to_json()
    doc["omega"] = omega
    _write_json(out / "vertex_report.json", doc)
    if cfg["histogram"]:
        write_histogram_csv(binned, out / "histogram.csv")
    write_manifest(out / "manifest.json", spec=_run_config(cfg, omega), seed=cfg["seed"],
                   timings={"tests_s": time.perf_counter() - t0}, command="test-vertices")
    for r in doc["vertices"]:
        print(f"{r['vertex']}: stat={r['statistic']:.4g} df={r['df']} p={r['p_value']:.4g} {r['decision']}")
    return EXIT_OK


def cmd_estimate(cfg) -> int:
    net, _, binned, omega = _load_inputs(cfg)
    k = get_kernel(cfg["kernel"])
    t0 = time.perf_counter()
    dec = run_vertex_tests(net, binned, cfg["h"], cfg["alpha"], k, holm=cfg["holm"])
    t1 = time.perf_counter()
    rows = density_profile(net, binned, cfg["h"], dec, k, step=cfg["step"], threads=cfg["threads"],
                           use_slopes=not cfg["no_slopes"])
    t2 = time.perf_counter()
    out = _outdir(cfg)
    write_profile_csv(rows, out / "profile.csv")
    doc = dec.to_json()
    doc["omega"] = omega
    _write_json(out / "vertex_report.json", doc)
    if cfg["histogram"]:
        write_histogram_csv(binned, out / "histogram.csv")
    write_manifest(out / "manifest.json", spec=_run_config(cfg, omega), seed=cfg["seed"],
                   timings={"tests_s": t1 - t0, "profile_s": t2 - t1}, command="estimate",
                   extra={"n_events": binned.total, "n_points": len(rows)})
    print(f"wrote {len(rows)} profile points to {out / 'profile.csv'}")
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    spec = case_spec(cfg["case"], n_per_edge=cfg["n_per_edge"], reps=1, seed=cfg["seed"])
    net = star_network(spec.n_edges)
    ev = sample_case(spec, replicate_streams(cfg["seed"], 1)[0])
    out = _outdir(cfg)
    write_network(net, out / "network.json")
    write_events(ev, out / "events.csv")
    write_manifest(out / "manifest.json", spec=spec.describe(), seed=cfg["seed"], timings={},
                   command="simulate")
    print(f"wrote {out / 'network.json'} and {out / 'events.csv'}")
    return EXIT_OK


def cmd_benchmark(cfg) -> int:
    out = _outdir(cfg)
    if cfg["study"] == "type2":
        h = cfg["h"] or TYPE2_BANDWIDTH
        t0 = time.perf_counter()
        rows = type2_study(TYPE2_PAIRS, reps=cfg["reps"], n_per_edge=cfg["n_per_edge"],
                           alpha=cfg["alpha"], h=h, omega=cfg["omega"], seed=cfg["seed"],
                           threads=cfg["threads"])
        write_type2_csv(rows, out / "type2.csv")
        write_manifest(out / "manifest.json", spec=_run_config(cfg) | {"h": h}, seed=cfg["seed"],
                       timings={"wall_s": time.perf_counter() - t0}, command="benchmark")
        print(f"wrote {out / 'type2.csv'}")
        return EXIT_OK
    methods = [m.strip().upper() for m in str(cfg["methods"]).split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise UsageError(f"--methods must be a comma list from {','.join(METHODS)}")
    kw = dict(reps=cfg["reps"], n_per_edge=cfg["n_per_edge"], seed=cfg["seed"],
              alpha=cfg["alpha"], kernel=cfg["kernel"], omega=cfg["omega"])
    if cfg["h"] is not None:
        kw["h"] = cfg["h"]
    spec = case_spec(cfg["case"], **kw)
    res = run_benchmark(spec, methods, threads=cfg["threads"])
    name = f"compare_case_{cfg['case']}.csv"
    write_metrics_csv(res.rows, out / name, case=cfg["case"])
    write_manifest(out / "manifest.json", spec=spec.describe(), seed=cfg["seed"],
                   timings=res.timings, command="benchmark")
    print(f"wrote {out / name}")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "test-vertices": cmd_test_vertices,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}


def _fail(kind: str, message: str, code: int) -> int:
    doc = {"error": kind, "message": message, "schema_version": SCHEMA_VERSION}
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        return _fail("io", str(exc), EXIT_USAGE)
    except NetworkError as exc:
        return _fail("network", str(exc), EXIT_USAGE)
    except NumericalError as exc:
        return _fail("numerical", str(exc), EXIT_NUMERICAL)
    except (NetdensError, ValueError, KeyError) as exc:
        return _fail("input", str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_USAGE)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
