"""Operator entry point.

Subcommands: gen-env (map synthesis), train (full learning run), eval
(drl/scan/aco over independent realizations), export-plots (plot-ready
delimited text). Exit codes: 0 success, 1 usage error, 2 divergence/abort.
All randomness fans out from the single configured seed.
"""

from __future__ import annotations

import argparse
import csv
import os
import shutil
import sys

import numpy as np

from . import baselines, ddpg
from .config import ConfigError, RunConfig, load_config, save_config
from .ddpg import DdpgAgent, ScaleSpec, TrainingDiverged
from .environment import MapGenerationError, UrbanMap, generate_buildings, place_gts
from .mdp import Mission
from .seeding import derive_seed, stream_rng

USAGE_ERROR = 1
ABORT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._usage_exit(message))

    def _usage_exit(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return USAGE_ERROR


def _build_parser():
    parser = _Parser(prog="uavtraj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--gts", type=int, help="override the terminal count")
        p.add_argument("--out", help="override the output path")

    p_gen = sub.add_parser("gen-env", parents=[], help="generate and store a map")
    common(p_gen)

    p_train = sub.add_parser("train", help="run the full training loop")
    common(p_train)
    p_train.add_argument("--episodes", type=int, help="override the episode count")
    p_train.add_argument("--resume", help="checkpoint directory to continue from")

    p_eval = sub.add_parser("eval", help="evaluate a strategy")
    common(p_eval)
    p_eval.add_argument("--strategy", choices=("drl", "scan", "aco"), required=True)
    p_eval.add_argument("--checkpoint", help="trained model directory (drl only)")
    p_eval.add_argument("--realizations", type=int, help="override the realization count")

    p_export = sub.add_parser("export-plots", help="emit plot-ready files from a run")
    p_export.add_argument("--run", required=True, help="run directory to export from")
    p_export.add_argument("--out", help="destination directory (default: <run>/plots)")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "gts", None) is not None:
        cfg.env = type(cfg.env)(**{**_as_kwargs(cfg.env), "num_gts": args.gts})
    if getattr(args, "episodes", None) is not None:
        cfg.train = type(cfg.train)(**{**_as_kwargs(cfg.train), "episodes": args.episodes})
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def _as_kwargs(dc):
    import dataclasses

    return {f.name: getattr(dc, f.name) for f in dataclasses.fields(dc)}


def build_map(cfg: RunConfig) -> UrbanMap:
    """Deterministic map + terminal layout from the run seed."""
    umap = generate_buildings(cfg.env, derive_seed(cfg.seed, "map"))
    return place_gts(umap, cfg.env.num_gts, derive_seed(cfg.seed, "gts"))


def cmd_gen_env(args):
    cfg = _load_run_config(args)
    umap = build_map(cfg)
    out = cfg.out_dir
    if args.out and (args.out.endswith(".json") or os.path.isfile(args.out)):
        path = args.out
    else:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "map.json")
    umap.save(path)
    print(f"map written to {path}")
    print(f"buildings: {len(umap.buildings)}")
    print(f"built fraction: {umap.built_fraction():.4f}")
    print(f"terminals: {len(umap.gts)}")
    return 0


def cmd_train(args):
    cfg = _load_run_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_config(cfg, os.path.join(cfg.out_dir, "config.yaml"))
    umap = build_map(cfg)
    umap.save(os.path.join(cfg.out_dir, "map.json"))
    env = Mission(umap, cfg.channel, cfg.mdp)
    start_episode = 0
    if args.resume:
        agent = DdpgAgent.load(args.resume, cfg.train)
        marker = os.path.join(args.resume, "episode.txt")
        if os.path.exists(marker):
            with open(marker) as f:
                start_episode = int(f.read().strip())
    else:
        agent = DdpgAgent(ScaleSpec.from_mission(env), cfg.train,
                          derive_seed(cfg.seed, "agent"))
    ckpt_dir = os.path.join(cfg.out_dir, "checkpoints")

    def progress(row):
        if (row.episode + 1) % 50 == 0:
            print(f"episode {row.episode + 1}/{cfg.train.episodes} "
                  f"reward {row.accumulated_reward:.2f} steps {row.steps}",
                  file=sys.stderr)

    try:
        ddpg.train(env, agent, cfg.train, derive_seed(cfg.seed, "train"),
                   reward_path=os.path.join(cfg.out_dir, "reward_curve.csv"),
                   checkpoint_dir=ckpt_dir, progress=progress,
                   start_episode=start_episode)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return ABORT_ERROR
    with open(os.path.join(ckpt_dir, "final", "episode.txt"), "w") as f:
        f.write(str(cfg.train.episodes))
    print(f"training complete; outputs in {cfg.out_dir}")
    return 0


def _write_summary(path, strategy, rows, num_gts):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["strategy", "realization", "mission_time_s", "steps",
                         "served", "completed", "num_gts"])
        for r in rows:
            writer.writerow([strategy, r.realization, repr(r.mission_time_s),
                             r.steps, r.served, int(r.completed), num_gts])
        mean_t = float(np.mean([r.mission_time_s for r in rows]))
        mean_steps = float(np.mean([r.steps for r in rows]))
        mean_served = float(np.mean([r.served for r in rows]))
        rate = float(np.mean([float(r.completed) for r in rows]))
        writer.writerow([strategy, "mean", repr(mean_t), repr(mean_steps),
                         repr(mean_served), repr(rate), num_gts])


def cmd_eval(args):
    cfg = _load_run_config(args)
    if args.strategy == "drl" and not args.checkpoint:
        print("uavtraj eval: error: --strategy drl requires --checkpoint",
              file=sys.stderr)
        return USAGE_ERROR
    realizations = args.realizations or cfg.eval.realizations
    os.makedirs(cfg.out_dir, exist_ok=True)
    umap = build_map(cfg)
    root = derive_seed(cfg.seed, f"eval/{args.strategy}")
    trajectory_path = os.path.join(cfg.out_dir, f"trajectory_{args.strategy}.csv")
    rows = []
    if args.strategy == "drl":
        agent = DdpgAgent.load(args.checkpoint, cfg.train)
        env = Mission(umap, cfg.channel, cfg.mdp)
        if agent.scale.state_dim != env.state_dim:
            print("uavtraj eval: error: checkpoint was trained for "
                  f"{agent.scale.num_gts} terminals, map has {env.num_gts}",
                  file=sys.stderr)
            return USAGE_ERROR
        summary = ddpg.evaluate(agent, [env], realizations, root,
                                trajectory_path=trajectory_path)
        rows = summary.rows
    else:
        for i in range(realizations):
            seed_i = derive_seed(root, f"eval/{i}")
            if args.strategy == "scan":
                _, env, summary = baselines.scan_trajectory(
                    umap, cfg.channel, cfg.mdp, cfg.scan, seed_i)
            else:
                env, summary = baselines.aco_episode(
                    umap, cfg.channel, cfg.mdp, cfg.aco, seed_i,
                    stream_rng(root, f"route/{i}"))
            if i == 0:
                env.write_trajectory(trajectory_path)
            rows.append(ddpg.EvalRow(i, summary.mission_time_s, summary.steps,
                                     summary.served, summary.completed))
    out_path = os.path.join(cfg.out_dir, f"eval_{args.strategy}.csv")
    _write_summary(out_path, args.strategy, rows, cfg.env.num_gts)
    mean_t = float(np.mean([r.mission_time_s for r in rows]))
    rate = float(np.mean([float(r.completed) for r in rows]))
    print(f"{args.strategy}: mean completion time {mean_t:.1f} s over "
          f"{len(rows)} realizations (completion rate {rate:.2f})")
    print(f"summary written to {out_path}")
    return 0


def cmd_export_plots(args):
    run = args.run
    out = args.out or os.path.join(run, "plots")
    exported = []
    os.makedirs(out, exist_ok=True)
    map_path = os.path.join(run, "map.json")
    if os.path.exists(map_path):
        umap = UrbanMap.load(map_path)
        with open(os.path.join(out, "buildings.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x0", "x1", "y0", "y1", "height"])
            for box in umap.boxes:
                writer.writerow([repr(float(v)) for v in box])
        with open(os.path.join(out, "gts.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y"])
            for g in umap.gts:
                writer.writerow([repr(float(g[0])), repr(float(g[1]))])
        exported.extend(["buildings.csv", "gts.csv"])
    curve = os.path.join(run, "reward_curve.csv")
    if os.path.exists(curve):
        shutil.copyfile(curve, os.path.join(out, "reward_curve.csv"))
        exported.append("reward_curve.csv")
    for name in sorted(os.listdir(run)):
        if name.startswith("trajectory_") and name.endswith(".csv"):
            shutil.copyfile(os.path.join(run, name), os.path.join(out, name))
            exported.append(name)
    table = _completion_table(run)
    if table:
        with open(os.path.join(out, "completion_times.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["K", "drl", "aco", "scan"])
            for k in sorted(table):
                row = table[k]
                writer.writerow([k] + [row.get(s, "") for s in ("drl", "aco", "scan")])
        exported.append("completion_times.csv")
    if not exported:
        print(f"uavtraj export-plots: error: nothing to export in {run}",
              file=sys.stderr)
        return USAGE_ERROR
    print(f"exported {', '.join(exported)} to {out}")
    return 0


def _completion_table(run):
    table = {}
    for name in os.listdir(run):
        if not (name.startswith("eval_") and name.endswith(".csv")):
            continue
        with open(os.path.join(run, name)) as f:
            for row in csv.DictReader(f):
                if row["realization"] == "mean":
                    k = int(row["num_gts"])
                    table.setdefault(k, {})[row["strategy"]] = row["mission_time_s"]
    return table


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    handlers = {
        "gen-env": cmd_gen_env,
        "train": cmd_train,
        "eval": cmd_eval,
        "export-plots": cmd_export_plots,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, MapGenerationError, FileNotFoundError) as exc:
        print(f"uavtraj {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
