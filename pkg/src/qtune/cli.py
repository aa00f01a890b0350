"""Command-line experiment runner.

Subcommands::

    qtune run <config> [--seed N] [--out DIR] [--parallel K] [--quiet]
    qtune gen-surface <config> --out FILE [--kind random_smooth|quadratic] [--seed N]
    qtune compare <dir> [--within PCT]
    qtune best-of <surface-file>

``run`` writes ``<agent>_seed<N>.csv`` (trace) and ``<agent>_seed<N>.summary.json``
per (agent, seed). Exit status is 0 on success, 2 for configuration errors and
1 when an agent fails at runtime.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import agents as ag
from .bench import DESK_LIMIT, CountingSurface, best_of, load_tabular, save_tabular
from .config import AgentSpec, ConfigError, ExperimentConfig, load_config
from .policy import Softmax

DEFAULT_OUT = "qtune-out"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def evaluation_budget(cfg: ExperimentConfig, spec: AgentSpec) -> int:
    """Upper bound on surface evaluations for one run of ``spec``."""
    p = spec.params
    if spec.name == "qi":
        return p.get("budget", 200) + 1  # plus the random seed configuration
    if spec.name == "random":
        return p.get("budget", 100)
    if spec.name == "grid":
        return cfg.space.cardinality
    return p.get("episodes", 100) * p.get("actions_per_episode", 10) + p.get("find_iters", 10) + 1


def run_agent(cfg: ExperimentConfig, spec: AgentSpec, seed: int) -> tuple[ag.Result, Any]:
    """Run one agent for one seed on a freshly built, evaluation-counting surface."""
    surface_rng = ag.split_seed(seed)[2]
    base = cfg.build_surface(surface_rng)
    surface = CountingSurface(base)
    space = cfg.space
    p = spec.params
    policy = cfg.make_policy()
    if spec.name == "qi":
        result = ag.qi_optimize(surface, space, ag.QiConfig(
            n_trials=p.get("budget", 200),
            alpha=float(p.get("alpha", 0.1)),
            gamma=float(p.get("gamma", 0.9)),
            seed=seed,
            threshold=float(p.get("threshold", 0.01)),
            invert_break=bool(p.get("invert_break", False)),
            q_init=float(p.get("q_init", 1.0)),
            policy=policy,
        ))
    elif spec.name == "random":
        result = ag.random_search(surface, space, p.get("budget", 100), seed)
    elif spec.name == "grid":
        result = ag.grid_search(surface, space, p.get("limit", DESK_LIMIT))
    else:
        result = _run_hyprl(cfg, surface, p, seed, policy)
    budget = evaluation_budget(cfg, spec)
    if surface.count > budget:
        raise RuntimeError(f"{spec.name} used {surface.count} evaluations, budget {budget}")
    result.evaluations = surface.count
    return result, base


def _run_hyprl(cfg: ExperimentConfig, surface, p: dict, seed: int, policy) -> ag.Result:
    meta = cfg.metafeatures()
    hcfg = ag.HypRLConfig(
        gamma=float(p.get("gamma", 0.5)),
        target_update_every=p.get("target_update_every", 10),
        buffer_capacity=p.get("buffer_capacity", 1000),
        episodes_per_dataset=p.get("episodes", 100),
        actions_per_episode=p.get("actions_per_episode", 10),
        epsilon=float(cfg.policy.get("epsilon", 1.0)),
        epsilon_final=p.get("epsilon_final", 0.05),
        minibatch_size=p.get("minibatch_size", 32),
        learning_rate=float(p.get("learning_rate", 1e-2)),
        hidden=tuple(p.get("hidden", (64, 64))),
        activation=p.get("activation", "relu"),
        seed=seed,
        policy=policy if isinstance(policy, Softmax) else None,
    )
    net, trace = ag.hyprl_train([(surface, meta)], hcfg)
    selected = ag.hyprl_find_optimal(net, meta, cfg.space, p.get("find_iters", 10), surface)
    best_rec = max(trace.records, key=lambda r: (r.reward, -r.action))
    return ag.Result(
        cfg.space.config_from_flat_index(best_rec.action), trace.records[-1].best_metric, trace,
        0, {"selected_config": list(selected.indices), "selected_metric": surface.score(selected)},
    )


def summarize(cfg: ExperimentConfig, spec: AgentSpec, seed: int, result: ag.Result,
              surface) -> dict[str, Any]:
    summary: dict[str, Any] = {
        "agent": spec.name,
        "seed": seed,
        "best_config": list(result.best_config.indices),
        "best_values": cfg.space.values_of(result.best_config),
        "best_metric": result.best_metric,
        "evaluations": result.evaluations,
        "trace_rows": len(result.trace),
        "surface": surface.provenance or surface.kind,
    }
    if cfg.space.cardinality <= DESK_LIMIT:
        opt, _ = best_of(surface)
        summary["optimum"] = surface.score(opt)
    summary.update(result.extra)
    return summary


def _job(args: tuple[ExperimentConfig, int, int, Path]) -> str:
    cfg, agent_idx, seed, out_dir = args
    spec = cfg.agents[agent_idx]
    result, surface = run_agent(cfg, spec, seed)
    stem = out_dir / f"{spec.name}_seed{seed}"
    _atomic_write(stem.with_suffix(".csv"), result.trace.to_csv(timing=cfg.timing))
    summary = summarize(cfg, spec, seed, result, surface)
    _atomic_write(Path(f"{stem}.summary.json"), json.dumps(summary, sort_keys=True) + "\n")
    return f"{spec.name} seed={seed} best={result.best_metric:.6f} evals={result.evaluations}"


def resolve_out(cfg: ExperimentConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    if cfg.out:
        return cfg.base_dir / cfg.out
    return Path(os.environ.get("QTUNE_OUT_DIR", DEFAULT_OUT))


def run(config_path: str | Path, seed: int | None = None, out: str | None = None,
        parallel: int = 1, quiet: bool = False) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg.seeds = [seed]
    out_dir = resolve_out(cfg, out)
    jobs = [(cfg, i, s, out_dir) for i in range(len(cfg.agents)) for s in cfg.seeds]
    try:
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                lines = list(pool.map(_job, jobs))
        else:
            lines = [_job(j) for j in jobs]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # agent failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not quiet:
        for line in lines:
            print(line)
    return 0


def gen_surface(config_path: str | Path, out: str | Path, kind: str | None = None,
                seed: int | None = None) -> int:
    try:
        cfg = load_config(config_path)
        if kind is not None:
            cfg.surface = {**cfg.surface, "kind": kind}
        if seed is not None:
            cfg.surface = {**cfg.surface, "seed": seed}
        if cfg.surface["kind"] not in ("random_smooth", "quadratic"):
            raise ConfigError("gen-surface needs a random_smooth or quadratic surface",
                              cfg.line_of("kind", "surface"), cfg.path)
        if cfg.space.cardinality > DESK_LIMIT:
            raise ConfigError(f"space of {cfg.space.cardinality} cells exceeds {DESK_LIMIT}",
                              None, cfg.path)
        surface = cfg.build_surface(ag.split_seed(cfg.seeds[0])[2])
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tabular(surface, out)
    return 0


def compare_dir(trace_dir: str | Path, within: float = 1.0) -> dict[str, Any]:
    """Per-agent best-metric statistics at the largest budget every run reached."""
    trace_dir = Path(trace_dir)
    runs = []
    for summary_path in sorted(trace_dir.glob("*.summary.json")):
        lines = summary_path.read_text(encoding="utf-8").strip().splitlines()
        summary = json.loads(lines[-1])
        stem = summary_path.name[: -len(".summary.json")]
        trace = ag.Trace.from_csv((trace_dir / f"{stem}.csv").read_text(encoding="utf-8"))
        runs.append((summary, trace))
    if not runs:
        raise ValueError(f"no summaries found in {trace_dir}")
    lengths = {len(t) for _, t in runs}
    budget = min(lengths)
    warnings = []
    if len(lengths) > 1:
        warnings.append(f"runs have different budgets {sorted(lengths)}; comparing at {budget}")
    agents: dict[str, dict[str, Any]] = {}
    for name in sorted({s["agent"] for s, _ in runs}):
        vals = np.array([t.best_at(budget) for s, t in runs if s["agent"] == name])
        optima = [s.get("optimum") for s, _ in runs if s["agent"] == name]
        row = {
            "runs": int(vals.size),
            "median": float(np.median(vals)),
            "q25": float(np.percentile(vals, 25)),
            "q75": float(np.percentile(vals, 75)),
            "within": None,
        }
        if all(o is not None for o in optima):
            hits = [v >= o - within / 100.0 * abs(o) for v, o in zip(vals, optima)]
            row["within"] = float(np.mean(hits))
        agents[name] = row
    return {"budget": budget, "within_pct": within, "agents": agents, "warnings": warnings}


def format_report(report: dict[str, Any]) -> str:
    pct = report["within_pct"]
    head = f"{'agent':<10}{'runs':>6}{'budget':>8}{'median':>10}{'q25':>10}{'q75':>10}" \
           f"{f'within{pct:g}%':>12}"
    lines = [head, "-" * len(head)]
    for name, r in report["agents"].items():
        within = "n/a" if r["within"] is None else f"{r['within']:.2f}"
        lines.append(f"{name:<10}{r['runs']:>6}{report['budget']:>8}{r['median']:>10.4f}"
                     f"{r['q25']:>10.4f}{r['q75']:>10.4f}{within:>12}")
    return "\n".join(lines)


def best_of_file(path: str | Path) -> dict[str, Any]:
    surface = load_tabular(path)
    config, metric = best_of(surface)
    return {
        "config": list(config.indices),
        "flat_index": surface.space.flat_index(config),
        "values": surface.space.values_of(config),
        "metric": metric,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the agents declared in a config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("gen-surface", help="materialize a synthetic surface as a tabular file")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("random_smooth", "quadratic"))
    p.add_argument("--seed", type=int)

    p = sub.add_parser("compare", help="compare agents from a run directory")
    p.add_argument("dir")
    p.add_argument("--within", type=float, default=1.0, help="optimum tolerance in percent")

    p = sub.add_parser("best-of", help="exhaustive optimum of a tabular surface")
    p.add_argument("surface")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run(args.config, args.seed, args.out, args.parallel, args.quiet)
    if args.command == "gen-surface":
        return gen_surface(args.config, args.out, args.kind, args.seed)
    if args.command == "compare":
        try:
            report = compare_dir(args.dir, args.within)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for w in report["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        print(format_report(report))
        return 0
    try:
        print(json.dumps(best_of_file(args.surface)))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
