"""Command-line front end.

Every subcommand prints a JSON run report to stdout: the command, a digest
of its inputs, the configuration used, the outputs and the wall time.

Exit codes: 0 on success (an ``Unknown`` oracle verdict is a reported
outcome), 2 on invalid input, 3 when stabilisation is aborted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .automaton import Automaton, entropy, lift, perron_root
from .css import Css
from .models import (
    CosimConfig,
    CoupledLinearPair,
    cosim_step_matrix,
    pendulum_instance,
    stability_domain_grid,
)
from .oracle import OracleConfig, oracle
from .stabilizer import (
    OracleUnknown,
    SearchBudgetExceeded,
    optimal_stabilize,
    stabilize,
    stabilize_impl,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ABORTED = 3

log = logging.getLogger("switchstab")


class InputError(Exception):
    pass


def _read_json(path: str) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _digest(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(hashlib.sha256(c).digest())
    return h.hexdigest()


def _write_json(path: str | Path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def _load_css(args) -> tuple[Css, str]:
    if getattr(args, "preset", None) == "pendulum":
        inst = pendulum_instance()
        return inst.css, _digest(b"preset:pendulum", json.dumps(inst.mode_map, sort_keys=True).encode())
    if not args.css:
        raise InputError("a css file or --preset is required")
    data, raw = _read_json(args.css)
    try:
        return Css.from_json(data), _digest(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.css}: invalid css ({exc})") from None


def _oracle_config(args) -> OracleConfig:
    kw = {"epsilon": args.eps, "seed": args.seed}
    if args.budget is not None:
        kw["state_budget"] = args.budget
        kw["walk_budget"] = args.budget
    try:
        return OracleConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _graph_summary(g: Automaton) -> dict:
    return {
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "perron_root": perron_root(g),
        "entropy_bits": entropy(g, warn=False),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_entropy(args) -> tuple[dict, int]:
    data, raw = _read_json(args.automaton)
    try:
        if data.get("schema", "").startswith("css/"):
            g = Css.from_json(data).graph
        else:
            g = Automaton.from_json(data)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{args.automaton}: invalid automaton ({exc})") from None
    return {"inputs_digest": _digest(raw), "config": {"automaton": args.automaton},
            "outputs": _graph_summary(g)}, EXIT_OK


def cmd_stabilize(args) -> tuple[dict, int]:
    s, digest = _load_css(args)
    cfg = _oracle_config(args)
    if args.lift < 0:
        raise InputError("--lift must be non-negative")
    s = s.with_graph(lift(s.graph, args.lift))
    out_path = Path(args.output)
    trace_path = Path(args.trace) if args.trace else out_path.with_suffix(".trace.json")
    config = {"css": args.css, "preset": args.preset, "lift": args.lift, "optimal": args.optimal,
              "driver": args.driver, "search_budget": args.search_budget, "oracle": cfg.to_json()}
    report = {"inputs_digest": digest, "config": config,
              "outputs": {"lifted": _graph_summary(s.graph)}}

    if args.optimal:
        try:
            res = optimal_stabilize(s, cfg, search_budget=args.search_budget)
        except (OracleUnknown, SearchBudgetExceeded) as exc:
            trace = getattr(exc, "trace", None)
            _write_json(trace_path, {"aborted": True, "error": str(exc),
                                     "partial": trace.to_json() if trace else None})
            report["outputs"].update(aborted=True, error=str(exc), trace=str(trace_path))
            return report, EXIT_ABORTED
        _write_json(out_path, res.css.graph.to_json())
        _write_json(trace_path, res.to_json())
        report["outputs"].update(stabilized=_graph_summary(res.css.graph),
                                 verdict=res.verdict.to_json() if res.verdict else None,
                                 automaton=str(out_path), trace=str(trace_path))
        return report, EXIT_OK

    driver = stabilize_impl if args.driver == "batch" else stabilize
    try:
        trace = driver(s, cfg)
    except OracleUnknown as exc:
        if exc.trace is not None:
            _write_json(trace_path, exc.trace.to_json())
        report["outputs"].update(aborted=True, error=str(exc), trace=str(trace_path))
        return report, EXIT_ABORTED
    _write_json(out_path, trace.final.graph.to_json())
    _write_json(trace_path, trace.to_json())
    report["outputs"].update(
        stabilized=_graph_summary(trace.final.graph),
        removed_edges=len(trace.steps),
        oracle_calls=trace.oracle_calls,
        verdict=trace.final_verdict.to_json(),
        automaton=str(out_path),
        trace=str(trace_path),
    )
    return report, EXIT_OK


def cmd_oracle(args) -> tuple[dict, int]:
    s, digest = _load_css(args)
    cfg = _oracle_config(args)
    v = oracle(s, cfg)
    return {"inputs_digest": digest, "config": {"css": args.css, "oracle": cfg.to_json()},
            "outputs": {"verdict": v.to_json()}}, EXIT_OK


def cmd_cosim_build(args) -> tuple[dict, int]:
    if args.preset == "pendulum":
        inst = pendulum_instance()
        s, configs = inst.css, inst.configs
        digest = _digest(b"preset:pendulum", json.dumps(inst.mode_map, sort_keys=True).encode())
    else:
        if not (args.model and args.config):
            raise InputError("cosim-build needs MODEL and CONFIG files, or --preset")
        model, raw_m = _read_json(args.model)
        conf, raw_c = _read_json(args.config)
        try:
            pair = CoupledLinearPair.from_json(model)
            entries = conf["configs"] if isinstance(conf, dict) else conf
            configs = [CosimConfig.from_json(c) for c in entries]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"invalid model or config ({exc})") from None
        if not configs:
            raise InputError("no configurations given")
        mats = tuple(cosim_step_matrix(pair, c) for c in configs)
        s = Css(mats, Automaton.full_shift(len(mats)), tuple(c.label for c in configs))
        digest = _digest(raw_m, raw_c)
    mode_map = [{"label": j + 1, **c.to_json(), "name": c.label} for j, c in enumerate(configs)]
    _write_json(args.output, s.to_json())
    return {"inputs_digest": digest,
            "config": {"model": args.model, "config": args.config, "preset": args.preset},
            "outputs": {"css": args.output, "modes": len(configs), "mode_map": mode_map}}, EXIT_OK


def cmd_stability_domain(args) -> tuple[dict, int]:
    methods = [m for m in args.methods.split(",") if m]
    try:
        grid = stability_domain_grid(methods, tuple(args.re), tuple(args.im),
                                     args.resolution, literal_rk4=args.literal_rk4)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    with open(args.output, "w", newline="") as fh:
        grid.to_csv(fh)
    return {"inputs_digest": _digest(json.dumps(vars(args), sort_keys=True, default=str).encode()),
            "config": {"methods": methods, "re": args.re, "im": args.im,
                       "resolution": args.resolution, "literal_rk4": args.literal_rk4},
            "outputs": {"csv": args.output, "points": int(grid.magnitude.size),
                        "stable_points": int(grid.stable.sum())}}, EXIT_OK


# ---------------------------------------------------------------------------


def _add_oracle_flags(p):
    p.add_argument("--eps", type=float, default=1e-6, help="cycle growth tolerance")
    p.add_argument("--budget", type=int, default=None,
                   help="state budget for each path search (default: library default)")
    p.add_argument("--seed", type=int, default=0, help="seed of the randomised cycle search")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchstab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--report", help="also write the run report to this file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="entropy of an automaton (or a css file's automaton)")
    p.add_argument("automaton")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("stabilize", help="remove edges until the system is certified stable")
    p.add_argument("css", nargs="?")
    p.add_argument("--preset", choices=["pendulum"])
    p.add_argument("--lift", type=int, default=0, help="path-memory depth of the lift")
    p.add_argument("--optimal", action="store_true", help="search for the maximal-entropy removal")
    p.add_argument("--driver", choices=["batch", "plain"], default="batch",
                   help="batch: clear short cycles first; plain: one oracle call per removal")
    p.add_argument("--search-budget", type=int, default=200_000,
                   help="node budget of the --optimal search")
    p.add_argument("-o", "--output", default="stabilized.json")
    p.add_argument("--trace", help="trace file (default: OUTPUT with .trace.json)")
    _add_oracle_flags(p)
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("oracle", help="certify stability or find an unstable cycle")
    p.add_argument("css", nargs="?")
    p.add_argument("--preset", choices=["pendulum"])
    _add_oracle_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("cosim-build", help="build the co-simulation switched system")
    p.add_argument("model", nargs="?")
    p.add_argument("config", nargs="?")
    p.add_argument("--preset", choices=["pendulum"])
    p.add_argument("-o", "--output", default="cosim.json")
    p.set_defaults(func=cmd_cosim_build)

    p = sub.add_parser("stability-domain", help="stability-domain grid of a (hybrid) solver as CSV")
    p.add_argument("--methods", default="fe", help="comma-separated, applied in sequence")
    p.add_argument("--re", type=float, nargs=2, default=(-3.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--im", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--literal-rk4", action="store_true",
                   help="use the 1/12 second-order RK4 coefficient")
    p.add_argument("-o", "--output", default="stability_domain.csv")
    p.set_defaults(func=cmd_stability_domain)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        body, code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = {"command": args.command, "version": __version__, **body,
              "wall_time_s": round(time.perf_counter() - t0, 6)}
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
