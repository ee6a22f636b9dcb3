"""
Command-line entry point: training, evaluation, oracle certification, penalty
sensitivity sweeps, export of plot-ready tables, synthetic scenarios and the scenario schema.

Every command writes a manifest to `<out>/<command>/manifest.json` before any other output;
each output file carries or sits next to the manifest id.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import typing as t
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import pandas as pd
import pydantic
import yaml
from pydantic import BaseModel, ConfigDict

from . import exceptions
from . import oracle as orc
from . import td3_agent as agent_mod
from .approximator import extractors
from .compile import compile_object
from .dataio import dump_scenario, load_scenario, synth_scenario
from .domain import Scenario
from .market_env import trace_record
from .marshal import marshal_schema, marshal_value
from .td3_agent import AgentConfig

__all__ = ("RunManifest", "build_parser", "content_hash", "main")

logger = logging.getLogger(__name__)

DEFAULT_OUT = "runs"
EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3


class RunManifest(BaseModel):
    """
    Everything needed to rerun a command.

    :param command: Subcommand name.
    :param scenario_path: Scenario file, when one was given.
    :param synth_profile: Synthetic profile, when the scenario was generated.
    :param synth_seed: Seed of the synthetic scenario.
    :param scenario_hash: Content hash of the resolved scenario.
    :param agent: Agent configuration.
    :param seeds: Training or evaluation seeds.
    :param out: Output directory of the command.
    :param options: Command-specific options.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    scenario_path: t.Optional[str] = None
    synth_profile: t.Optional[str] = None
    synth_seed: t.Optional[int] = None
    scenario_hash: str
    agent: t.Optional[AgentConfig] = None
    seeds: t.List[int] = []
    out: str
    options: t.Dict[str, t.Any] = {}

    def canonical(self) -> str:
        return json.dumps(marshal_value(self), sort_keys=True, indent=2)

    @property
    def manifest_id(self) -> str:
        return content_hash(self.canonical().encode("utf-8"))


def content_hash(content: bytes) -> str:
    """Git blob hash: sha1 over `blob <len>\\0` followed by the content."""
    header = f"blob {len(content)}\0".encode()
    return hashlib.sha1(header + content, usedforsecurity=False).hexdigest()


def scenario_hash(scenario: Scenario) -> str:
    return content_hash(json.dumps(marshal_value(scenario), sort_keys=True).encode("utf-8"))


def _resolve_scenario(args: argparse.Namespace) -> Scenario:
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = synth_scenario(args.synth_seed, args.synth)
    if getattr(args, "penalty_off", False):
        scenario = scenario._replace(penalty=scenario.penalty._replace(mode="off"))
    return scenario


def _agent_config(args: argparse.Namespace) -> AgentConfig:
    base: t.Dict[str, t.Any] = {}
    if getattr(args, "agent_config", None):
        with open(args.agent_config, encoding="utf-8") as fp:
            base = marshal_value(compile_object(AgentConfig, arguments=yaml.safe_load(fp) or {}))
    overrides = {
        "extractor": getattr(args, "extractor", None),
        "total_steps": getattr(args, "steps", None),
        "warmup_steps": getattr(args, "warmup", None),
        "batch": getattr(args, "batch", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return AgentConfig(**base)


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get("DRLAB_OUT", DEFAULT_OUT)) / args.command


def _write_manifest(
    args: argparse.Namespace,
    scenario: t.Optional[Scenario],
    agent: t.Optional[AgentConfig] = None,
    seeds: t.Sequence[int] = (),
    **options: t.Any,
) -> RunManifest:
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        scenario_path=getattr(args, "scenario", None),
        synth_profile=None if getattr(args, "scenario", None) else getattr(args, "synth", None),
        synth_seed=None if getattr(args, "scenario", None) else getattr(args, "synth_seed", None),
        scenario_hash=scenario_hash(scenario) if scenario is not None else "",
        agent=agent,
        seeds=list(seeds),
        out=str(out),
        options=options,
    )
    (out / "manifest.json").write_text(manifest.canonical() + "\n", encoding="utf-8")
    logger.info("manifest %s written to %s", manifest.manifest_id, out)
    return manifest


def _write_trace(path: Path, rows: t.Sequence[t.Mapping[str, t.Any]], manifest_id: str) -> None:
    frame = pd.DataFrame(list(rows))
    frame.insert(0, "manifest_id", manifest_id)
    frame.to_csv(path, index=False)


class _TrainJob(t.NamedTuple):
    scenario: Scenario
    cfg: AgentConfig
    seed: int
    run_dir: str
    manifest_id: str


def _train_seed(job: _TrainJob) -> t.Dict[str, t.Any]:
    run_dir = Path(job.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    with agent_mod.MetricsWriter(run_dir / "metrics.jsonl") as writer:
        result = agent_mod.train(job.scenario, job.cfg, job.seed, writer=writer, manifest_id=job.manifest_id)
    agent_mod.save_checkpoint(
        run_dir / "checkpoint.npz", result.agent, job.scenario.sequence_len, manifest_id=job.manifest_id
    )
    greedy = agent_mod.evaluate(result.agent.actor.act, job.scenario)
    _write_trace(run_dir / "trace.csv", greedy.traces[0], job.manifest_id)
    tail = result.metrics[-max(1, len(result.metrics) // 10) :]
    return {
        "seed": job.seed,
        "final_return": sum(m.ret for m in tail) / len(tail),
        "final_c_ave": sum(m.mean_c_ave for m in tail) / len(tail),
        "greedy_return": greedy.mean_return,
        "greedy_c_ave": greedy.mean_satisfaction,
    }


def _run_jobs(jobs: t.Sequence[_TrainJob], workers: int) -> t.List[t.Dict[str, t.Any]]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_train_seed, jobs))
    return [_train_seed(j) for j in jobs]


def cmd_train(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args)
    cfg = _agent_config(args)
    seeds = list(range(args.seeds))
    manifest = _write_manifest(args, scenario, cfg, seeds, penalty_off=args.penalty_off)
    out = Path(manifest.out)
    jobs = [_TrainJob(scenario, cfg, s, str(out / f"seed_{s}"), manifest.manifest_id) for s in seeds]
    summary = _run_jobs(jobs, args.workers)
    pd.DataFrame(summary).assign(manifest_id=manifest.manifest_id).to_csv(out / "summary.csv", index=False)
    for row in summary:
        print(f"seed {row['seed']}: greedy return {row['greedy_return']:.3f}, satisfaction {row['greedy_c_ave']:.3f}")
    return EXIT_OK


def _parse_pairs(text: str) -> t.List[t.Tuple[float, float]]:
    pairs = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        lin, _, sqr = item.partition(":")
        try:
            pairs.append((float(lin), float(sqr)))
        except ValueError as err:
            raise exceptions.InvalidArgumentException(arg=item, type_base="pair", valid_args=["lin:sqr"]) from err
    return pairs


def cmd_sensitivity(args: argparse.Namespace) -> int:
    pairs = _parse_pairs(args.pairs)
    if not pairs:
        raise exceptions.InvalidArgumentException(arg=args.pairs, type_base="pairs", valid_args=["lin:sqr,..."])
    scenario = _resolve_scenario(args)
    if args.beta0:
        (b_lin, b_sqr), *_ = _parse_pairs(args.beta0)
        scenario = scenario._replace(penalty=scenario.penalty._replace(beta_lin0=b_lin, beta_sqr0=b_sqr))
    cfg = _agent_config(args)
    seeds = list(range(args.seeds))
    manifest = _write_manifest(args, scenario, cfg, seeds, pairs=[list(p) for p in pairs], beta0=args.beta0)
    out = Path(manifest.out)

    jobs, keys = [], []
    for lin, sqr in sorted(pairs):
        variant = scenario._replace(penalty=scenario.penalty._replace(eta_lin=lin, eta_sqr=sqr))
        for s in seeds:
            jobs.append(_TrainJob(variant, cfg, s, str(out / f"eta_{lin:g}_{sqr:g}" / f"seed_{s}"), manifest.manifest_id))
            keys.append((lin, sqr))
    rows = [
        {"eta_lin": lin, "eta_sqr": sqr, **row} for (lin, sqr), row in zip(keys, _run_jobs(jobs, args.workers))
    ]
    table = pd.DataFrame(rows).sort_values(["eta_lin", "eta_sqr", "seed"], kind="stable")
    table.assign(manifest_id=manifest.manifest_id).to_csv(out / "summary.csv", index=False)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args)
    agent = agent_mod.load_checkpoint(args.checkpoint)
    manifest = _write_manifest(args, scenario, agent.cfg, [], checkpoint=args.checkpoint, episodes=args.episodes)
    result = agent_mod.evaluate(agent.actor.act, scenario, args.episodes)
    _write_trace(Path(manifest.out) / "trace.csv", result.traces[0], manifest.manifest_id)
    print(f"mean return {result.mean_return:.4f}, mean satisfaction {result.mean_satisfaction:.4f}")
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args)
    if args.horizon is not None:
        scenario = scenario._replace(horizon=args.horizon)
    grid = orc.GridSpec(n_price=args.n_price, n_batt=args.n_batt)
    if not args.replay_oracle:
        if not args.checkpoint:
            raise exceptions.InvalidArgumentException(
                arg=None, type_base="checkpoint", valid_args=["--checkpoint PATH", "--replay-oracle"]
            )
        policy: agent_mod.Policy = agent_mod.load_checkpoint(args.checkpoint).actor.act
    manifest = _write_manifest(
        args, scenario, None, [], grid=list(grid[:2]), method=args.method,
        checkpoint=args.checkpoint, replay_oracle=args.replay_oracle,
    )  # fmt: skip
    if args.method == "exhaustive":
        best = orc.exhaustive_optimal(scenario, grid, workers=args.workers)
    else:
        best = orc.dp_optimal(scenario, grid, args.soc_levels)
    if args.replay_oracle:
        policy = agent_mod.ReplayPolicy(best.raw_actions)
    result = orc.certify(policy, scenario, grid, oracle=best)

    out = Path(manifest.out)
    _write_trace(out / "oracle_trace.csv", [trace_record(o) for o in best.trace], manifest.manifest_id)
    _write_trace(out / "agent_trace.csv", result.agent_trace, manifest.manifest_id)
    diff = pd.DataFrame(
        {
            "t": [o.t for o in best.trace],
            "price_diff": [r["price"] - o.price for r, o in zip(result.agent_trace, best.trace)],
            "p_b_diff": [r["p_b"] - o.battery for r, o in zip(result.agent_trace, best.trace)],
            "reward_diff": [r["reward"] - o.reward for r, o in zip(result.agent_trace, best.trace)],
        }
    )
    print(diff.to_string(index=False))
    print(f"ratio {result.ratio:.6f} (agent {result.agent_return:.4f} / oracle {best.best_value:.4f})")
    print(f"gap {result.gap:.6f} (midpoint {result.baseline_return:.4f})")
    return EXIT_OK


def _band(frame: pd.DataFrame, keys: t.List[str], column: str) -> pd.DataFrame:
    g = frame.groupby(keys)[column]
    return pd.DataFrame(
        {
            f"{column}_mean": g.mean(),
            f"{column}_std": g.std(ddof=0),
            f"{column}_min": g.min(),
            f"{column}_max": g.max(),
        }
    )


def cmd_export(args: argparse.Namespace) -> int:
    runs = Path(args.runs)
    logs = sorted(runs.rglob("metrics.jsonl"))
    if not logs:
        raise FileNotFoundError(f"No metrics logs under {runs}")
    manifest = _write_manifest(args, None, None, [], runs=str(runs))
    out = Path(manifest.out)

    metrics = pd.concat([pd.read_json(p, lines=True) for p in logs], ignore_index=True)
    keys = ["extractor", "episode"]
    curves = pd.concat([_band(metrics, keys, "return"), _band(metrics, keys, "mean_c_ave")], axis=1)
    curves["n_seeds"] = metrics.groupby(keys)["seed"].nunique()
    curves.reset_index().assign(manifest_id=manifest.manifest_id).to_csv(out / "curves.csv", index=False)

    satisfaction = metrics[["extractor", "seed", "episode", "mean_c_ave", "beta_lin", "beta_sqr", "penalty"]]
    satisfaction.assign(manifest_id=manifest.manifest_id).to_csv(out / "satisfaction.csv", index=False)

    for trace in sorted(runs.rglob("trace.csv")):
        rel = trace.parent.relative_to(runs)
        name = "_".join(rel.parts) or "run"
        pd.read_csv(trace, float_precision="round_trip").drop(columns="manifest_id", errors="ignore").to_csv(out / f"trace_{name}.csv", index=False)

    for summary in sorted(runs.rglob("summary.csv")):
        table = pd.read_csv(summary)
        if {"eta_lin", "eta_sqr"} <= set(table.columns):
            grid = table.groupby(["eta_lin", "eta_sqr"])[["final_c_ave", "final_return"]].agg(["mean", "std"])
            grid.columns = ["_".join(c) for c in grid.columns]
            grid.reset_index().assign(manifest_id=manifest.manifest_id).to_csv(out / "sensitivity_grid.csv", index=False)
    print(f"exported {len(logs)} metric logs to {out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    scenario = synth_scenario(args.synth_seed, args.synth)
    manifest = _write_manifest(args, scenario)
    path = Path(manifest.out) / f"scenario_{args.synth}_{args.synth_seed}.yaml"
    dump_scenario(scenario, path)
    print(path)
    return EXIT_OK


def cmd_schema(args: argparse.Namespace) -> int:
    target = AgentConfig if args.agent else Scenario
    print(json.dumps(marshal_schema(target), indent=2))
    return EXIT_OK


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="Scenario YAML file.")
    src.add_argument("--synth", choices=["winter", "summer"], default="winter", help="Synthetic profile.")
    p.add_argument("--synth-seed", type=int, default=0, help="Seed of the synthetic scenario.")
    p.add_argument("--penalty-off", action="store_true", help="Disable the satisfaction penalty.")


def _agent_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--agent-config", help="Agent configuration YAML file.")
    p.add_argument("--extractor", choices=extractors.names(), help="Feature extractor.")
    p.add_argument("--steps", type=int, help="Environment steps per run.")
    p.add_argument("--warmup", type=int, help="Random-action warmup steps.")
    p.add_argument("--batch", type=int, help="Replay minibatch size.")
    p.add_argument("--seeds", type=int, default=1, help="Number of seeds, 0..K-1.")
    p.add_argument("--workers", type=int, default=1, help="Parallel processes.")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    common.add_argument("--out", help=f"Output root (default: $DRLAB_OUT or {DEFAULT_OUT!r}).")

    parser = argparse.ArgumentParser(prog="drlab", description="Demand response pricing with TD3.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="Train agents, one per seed.")
    _scenario_flags(p)
    _agent_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sensitivity", parents=[common], help="Sweep penalty ascent steps.")
    _scenario_flags(p)
    _agent_flags(p)
    p.add_argument("--pairs", default="5:1,5:5", help="Comma separated eta_lin:eta_sqr pairs.")
    p.add_argument("--beta0", help="Initial coefficients as lin:sqr.")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("evaluate", parents=[common], help="Greedy rollouts of a checkpoint.")
    _scenario_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("certify", parents=[common], help="Compare a checkpoint against the grid oracle.")
    _scenario_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--replay-oracle", action="store_true", help="Certify the oracle's own actions.")
    p.add_argument("--method", choices=["dp", "exhaustive"], default="dp")
    p.add_argument("--n-price", type=int, default=3)
    p.add_argument("--n-batt", type=int, default=3)
    p.add_argument("--horizon", type=int)
    p.add_argument("--soc-levels", type=int, default=21)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("export", parents=[common], help="Aggregate run logs into plot-ready tables.")
    p.add_argument("--runs", required=True, help="Directory holding run outputs.")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic scenario file.")
    p.add_argument("--synth", choices=["winter", "summer"], default="winter")
    p.add_argument("--synth-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("schema", parents=[common], help="Print the documented configuration schema.")
    p.add_argument("--agent", action="store_true", help="Agent configuration instead of scenario.")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        return args.func(args)
    except exceptions.OracleGuardException as err:
        logger.error("%s", err)
        return EXIT_GUARD
    except (exceptions.DrlabException, pydantic.ValidationError, yaml.YAMLError, OSError) as err:
        logger.error("%s", err)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
