"""
Command-line interface
======================

``qflow run``
    run the configured flows for every step size of the sweep, write one
    trajectory CSV per member, then run the selected suites against the
    configured fixture;
``qflow verify``
    run suites on their acceptance fixtures;
``qflow list-suites``
    print every suite with the statement it checks;
``qflow space``
    emit a space as JSON.

Exit status is 0 when every selected check passes, 1 when a check fails
and 2 for configuration errors. ``QFLOW_OUT`` overrides the output
directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, initial_density, load_config, weight_function
from .heatflow import FlowTrajectory, ProximalConfig, run_flow
from .jko import JkoConfig, run_jko
from .suites import REGISTRY, list_suites

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, FlowTrajectory):
        return {"times": list(obj.times), "diagnostics": obj.diagnostics}
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, default=_jsonable) + "\n")


def _tag(tau: float) -> str:
    return f"{tau:g}"


def _suite_names(selected) -> list:
    names = list(REGISTRY) if not selected or selected == ["all"] else list(selected)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise ConfigError(f"suites: unknown suite(s) {unknown}; see 'qflow list-suites'")
    return names


def run_suites(names, cfg: ExperimentConfig, out: Path, use_config: bool) -> list:
    """Run suites, write ``<name>.json`` reports and return their summaries."""
    summaries = []
    for name in names:
        s = REGISTRY[name]
        overrides = s.overrides_from(cfg) if use_config else {}
        result = s.run(cfg, **overrides)
        summary = result.summary()
        write_json(out / f"{name}.json", {**summary, "data": result.data})
        summaries.append(summary)
        print(f"== {name} ({result.elapsed:.1f}s) {'PASS' if result.passed else 'FAIL'}")
        for c in result.checks:
            print(f"   {c.line()}")
    return summaries


def run_flows(cfg: ExperimentConfig, out: Path) -> list:
    """Integrate the selected flows for each ``τ`` and write their CSVs."""
    space = cfg.build_space()
    f0 = initial_density(space, cfg.init)
    V = weight_function(space, cfg.weight)
    q = cfg.p / (cfg.p - 1.0)
    written = []
    for tau in cfg.tau:
        if cfg.flow in ("heat", "both"):
            traj = run_flow(space, f0, cfg.T, ProximalConfig(tau), q, V=V, p=cfg.p)
            path = out / f"heat_tau{_tag(tau)}.csv"
            traj.to_csv(path)
            written.append(str(path))
        if cfg.flow in ("jko", "both"):
            jcfg = JkoConfig(tau, cfg.p, normalization=cfg.normalization, seed=cfg.seed)
            traj = run_jko(space, f0 * space.measure, cfg.T, jcfg)
            path = out / f"jko_tau{_tag(tau)}.csv"
            traj.to_csv(path)
            write_json(out / f"jko_tau{_tag(tau)}.json", traj.meta)
            written.append(str(path))
    return written


def _finish(cfg: ExperimentConfig, out: Path, summaries: list, files: list) -> int:
    failed = [s["suite"] for s in summaries if not s["passed"]]
    write_json(out / "summary.json", {"config": cfg.to_dict(), "files": files,
                                      "suites": summaries, "failed": failed})
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        for s in summaries:
            for c in s["checks"]:
                if not c["passed"]:
                    print(f"  {s['suite']}: {c['name']}: observed {c['observed']:.6g}, "
                          f"tolerated {c['limit']:.6g}")
        return EXIT_FAIL
    print(f"all {len(summaries)} suite(s) passed" if summaries else "done")
    return EXIT_PASS


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    files = run_flows(cfg, out)
    summaries = run_suites(_suite_names(cfg.suites), cfg, out, use_config=True) if cfg.suites else []
    return _finish(cfg, out, summaries, files)


def cmd_verify(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    summaries = run_suites(_suite_names(cfg.suites), cfg, out, use_config=False)
    return _finish(cfg, out, summaries, [])


def cmd_list(args) -> int:
    print(list_suites())
    return EXIT_PASS


def cmd_space(args) -> int:
    cfg = _config(args)
    text = cfg.build_space().to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_PASS


def _config(args) -> ExperimentConfig:
    suites = None
    if getattr(args, "suite", None):
        suites = [s for item in args.suite for s in item.split(",") if s]
    return load_config(getattr(args, "config", None), space=getattr(args, "space", None),
                       p=getattr(args, "p", None), flow=getattr(args, "flow", None),
                       T=getattr(args, "T", None), tau=getattr(args, "tau", None),
                       init=getattr(args, "init", None), weight=getattr(args, "weight", None),
                       suites=suites, out=getattr(args, "out", None),
                       seed=getattr(args, "seed", None),
                       normalization=getattr(args, "normalization", None))


def _outdir(cfg: ExperimentConfig) -> Path:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qflow", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, flows: bool):
        p.add_argument("--config", help="TOML file; flags override its fields")
        p.add_argument("--space", help="builder spec, e.g. path:32, cycle:8, grid2d:5x5, or a JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (QFLOW_OUT takes precedence)")
        p.add_argument("--suite", action="append", help="suite name(s), comma separated or repeated")
        if flows:
            p.add_argument("--p", type=float, help="exponent in (1, 3)")
            p.add_argument("--flow", choices=("heat", "jko", "both"))
            p.add_argument("--T", type=float, help="final time")
            p.add_argument("--tau", help="step size or strictly decreasing comma list")
            p.add_argument("--init", help="uniform, bump[:floor], spike, two-bumps, file:<path>")
            p.add_argument("--weight", help="distance:<C>,<eps>[,<x0>]")
            p.add_argument("--normalization", choices=("scaled", "standard"),
                           help="w_p with (scaled) or without (standard) the extra 1/p")

    p_run = sub.add_parser("run", help="run flows and suites on the configured fixture")
    common(p_run, True)
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run suites on their acceptance fixtures")
    common(p_verify, False)
    p_verify.set_defaults(func=cmd_verify)

    p_list = sub.add_parser("list-suites", help="list suites and what they check")
    p_list.set_defaults(func=cmd_list)

    p_space = sub.add_parser("space", help="emit a space as JSON")
    p_space.add_argument("--config")
    p_space.add_argument("--space")
    p_space.add_argument("-o", "--output", help="write to a file instead of stdout")
    p_space.set_defaults(func=cmd_space)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
