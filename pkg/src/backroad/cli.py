"""Command-line surface: train, eval, defend, plot, print-defaults.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.
Every run is reproducible from (config file, seed); outputs land in the run's
out_dir (optionally re-rooted by the BACKROAD_OUT environment variable).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .agents import QNetwork, run_training
from .backdoor import train_backdoored
from .config import ConfigError, RunConfig, config_hash, dump_defaults, load_run_config
from .evaldef import (
    activation_cluster,
    asr_dc,
    evaluate_policy,
    pvr,
    rank_auc,
    render_trajectories,
    spectral_scores,
    whiten,
)
from .evaldef.figures import (
    cluster_scatter_figure,
    spectral_histogram_figure,
    training_curves_figure,
)
from .numkit import CheckpointError, load_checkpoint, save_checkpoint
from .trafficsim import ACTIONS, TRACE_HEADER, World

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

AUDIT_HEADER = "episode,step,phase,reward_used,attacker_id"
CURVES_HEADER = "episode,reward,duration_s,epsilon,loss_mean"
EPISODES_HEADER = "episode,seed,reward,duration_s,mean_speed,ldd,crashed,crash_step,arrived"
ACTIVATIONS_HEADER = "episode,fire_step,attacker,crash_step,success,dc_s"


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _write_trace(path: Path, trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, vid, role, lane, x, y, v, heading, crashed in trace:
            fh.write(f"{t:.1f},{vid},{role},{lane},{x:.6f},{y:.6f},"
                     f"{v:.6f},{heading:.6f},{crashed}\n")


def _load_net(checkpoint_path: str) -> tuple[QNetwork, dict]:
    arch, tensors, meta = load_checkpoint(checkpoint_path)
    net = QNetwork(arch, np.random.default_rng(0))
    net.load_tensors(tensors)
    return net, meta


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    run = load_run_config(args.config, poisoned=args.poisoned)
    out = Path(args.out) if args.out else run.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(run)

    def make_world(seed: int) -> World:
        return World(run.scenario, seed, run.weights)

    def checkpoint_cb(episode: int, agent) -> None:
        meta = {"arch": run.arch, "episodes": episode, "seed": run.seed,
                "config_hash": chash, "partial": True}
        save_checkpoint(out / f"checkpoint_ep{episode}.ckpt", run.arch,
                        agent.online.tensors(), meta)

    if args.poisoned:
        result = train_backdoored(run.arch, make_world, run.train, run.attack,
                                  run.seed, checkpoint_cb=checkpoint_cb,
                                  log_every=args.log_every)
    else:
        result = run_training(run.arch, make_world, run.train, run.seed,
                              checkpoint_cb=checkpoint_cb, log_every=args.log_every)

    meta = dict(result.meta)
    meta["config_hash"] = chash
    meta["poisoned"] = bool(args.poisoned)
    save_checkpoint(out / "checkpoint.ckpt", run.arch, result.tensors, meta)
    _write_rows(out / "curves.csv", CURVES_HEADER,
                [(e, repr(r), repr(d), repr(eps), repr(lm))
                 for e, r, d, eps, lm in result.curves])
    training_curves_figure(result.curves, out / "curves.png")
    if args.poisoned:
        _write_rows(out / "audit.csv", AUDIT_HEADER, result.audit)
        _write_rows(out / "backdoor_curves.csv",
                    "episode,clean_reward,stored_reward,poisoned_steps,activations",
                    [(e, repr(c), repr(s), p, a)
                     for e, c, s, p, a in result.backdoor_curves])
        _write_rows(out / "activations.csv", ACTIVATIONS_HEADER,
                    [(a["episode"], a["fire_step"], a["attacker"],
                      a["crash_step"] if a["crash_step"] is not None else -1,
                      int(a["success"]), repr(a["dc_s"]) if a["dc_s"] is not None else -1.0)
                     for a in result.activations])
        stats = {
            "replay_poisoned_fraction": result.replay_poisoned_fraction,
            "replay_episode_ids": result.replay_episode_ids,
            "activations": len(result.activations),
        }
        (out / "replay_stats.json").write_text(json.dumps(stats, indent=2))
    print(f"trained {run.arch} for {run.train.episodes} episodes -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    run = load_run_config(args.config, poisoned=args.attack)
    if args.episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    net, meta = _load_net(args.checkpoint)
    chash = config_hash(run)
    if meta.get("config_hash") and meta["config_hash"] != chash:
        print("warning: checkpoint config hash differs from the supplied config",
              file=sys.stderr)
    out = Path(args.out) if args.out else run.resolved_out_dir() / "eval"
    out.mkdir(parents=True, exist_ok=True)
    seeds = None
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    attack = run.attack if args.attack else None
    report, rows, activations, audit, _, traces = evaluate_policy(
        net, run.scenario, args.episodes, seeds=seeds,
        master_seed=args.master_seed, attack=attack, workers=args.workers)

    _write_rows(out / "episodes.csv", EPISODES_HEADER,
                [(r["episode"], r["seed"], repr(r["reward"]), repr(r["duration_s"]),
                  repr(r["mean_speed"]), repr(r["ldd"]), r["crashed"],
                  r["crash_step"], r["arrived"]) for r in rows])
    payload = {
        "checkpoint": str(args.checkpoint),
        "arch": net.arch,
        "episodes": args.episodes,
        "master_seed": args.master_seed,
        "config_hash": chash,
        "eval": report.to_dict(),
        "attack": None,
        "pvr": None,
    }
    if attack is not None:
        _write_rows(out / "audit.csv", AUDIT_HEADER, audit)
        _write_rows(out / "activations.csv", ACTIVATIONS_HEADER,
                    [(a["episode"], a["fire_step"], a["attacker"], a["crash_step"],
                      a["success"], repr(a["dc_s"])) for a in activations])
        if activations:
            payload["attack"] = asr_dc(activations).to_dict()
    if args.baseline_report:
        base = json.loads(Path(args.baseline_report).read_text())
        payload["pvr"] = pvr(base["eval"]["er_mean"], report.er_mean)
    for i, trace in enumerate(traces[:args.traces]):
        _write_trace(out / f"trace_ep{i}.csv", trace)
        (out / f"trace_ep{i}.svg").write_text(
            render_trajectories([{"t": r[0], "vehicle_id": r[1], "role": r[2],
                                  "x": r[4], "y": r[5], "v": r[6],
                                  "crashed": r[8]} for r in trace],
                                speed_range=(run.scenario.v_min, run.scenario.v_max)))
    (out / "report.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload["eval"], indent=2))
    if payload["attack"]:
        print(json.dumps(payload["attack"], indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# defend
# ---------------------------------------------------------------------------

def cmd_defend(args) -> int:
    run = load_run_config(args.config, poisoned=False)
    net, _meta = _load_net(args.checkpoint)
    out = Path(args.out) if args.out else run.resolved_out_dir() / "defense"
    out.mkdir(parents=True, exist_ok=True)
    attack = run.attack
    rng = np.random.default_rng(args.master_seed)

    collected: list = []
    episode = 0
    while len(collected) < args.samples and episode < args.max_episodes:
        _, rows, _, _, reps, _ = evaluate_policy(
            net, run.scenario, 1, master_seed=args.master_seed + episode,
            attack=attack, collect_reps=True)
        for step_reps in reps:
            collected.extend(step_reps)
        episode += 1
    if len(collected) < 2:
        raise RuntimeError("could not collect enough representation samples")

    reps = np.array([c[0] for c in collected])
    acts = np.array([c[1] for c in collected])
    flags = np.array([c[2] for c in collected], dtype=bool)
    payload = {
        "samples": int(len(collected)),
        "episodes": episode,
        "poisoned_samples": int(flags.sum()),
        "injections_enabled": attack is not None,
        "classes": {},
    }
    for a, name in enumerate(ACTIONS):
        m = acts == a
        cls: dict = {"samples": int(m.sum()), "poisoned": int(flags[m].sum())}
        scores = None
        if m.sum() >= 2:
            scores = spectral_scores(reps[m])
            cls["spectral_auc"] = rank_auc(scores, flags[m])
            creport = activation_cluster(reps[m], flags[m], rng)
            cls["clusters"] = creport.composition()
            points2d, _ = whiten(reps[m], 2)
            cluster_scatter_figure(points2d, creport.labels, flags[m], name,
                                   out / f"clusters_{name}.png")
            spectral_histogram_figure(scores, flags[m], name,
                                      out / f"spectral_{name}.png")
            _write_rows(out / f"clusters_{name}.csv", "sample,cluster,poisoned",
                        [(i, int(c), int(f)) for i, (c, f)
                         in enumerate(zip(creport.labels, flags[m]))])
        else:
            cls["note"] = "fewer than two samples; detectors skipped"
        _write_rows(out / f"spectral_{name}.csv", "sample,score,poisoned",
                    [(i, repr(float(s)), int(f)) for i, (s, f)
                     in enumerate(zip(scores if scores is not None else [],
                                      flags[m]))])
        payload["classes"][name] = cls
    (out / "defense_report.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps({k: v for k, v in payload.items() if k != "classes"}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def cmd_plot(args) -> int:
    text = Path(args.trace).read_text(encoding="utf-8")
    svg = render_trajectories(text)
    out = Path(args.out) if args.out else Path(args.trace).with_suffix(".svg")
    out.write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="backroad",
                                 description="traffic-sim Q-learning backdoor workbench")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a clean or poisoned agent")
    p.add_argument("config")
    p.add_argument("--poisoned", action="store_true",
                   help="enable trigger injection per the [attack] section")
    p.add_argument("--out", default=None)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=40)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--seeds", default=None, help="comma-separated explicit seeds")
    p.add_argument("--attack", action="store_true",
                   help="enable trigger injection during evaluation")
    p.add_argument("--baseline-report", default=None,
                   help="clean report.json for performance-variance computation")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--traces", type=int, default=0,
                   help="write trajectory CSV+SVG for the first N episodes")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("defend", help="run both backdoor detectors on rollouts")
    p.add_argument("checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=6000)
    p.add_argument("--max-episodes", type=int, default=1000)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("plot", help="render a trajectory trace CSV to SVG")
    p.add_argument("trace")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("print-defaults", help="dump every built-in default")
    p.set_defaults(func=lambda args: (print(dump_defaults(), end=""), EXIT_OK)[1])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if __debug__ and sys.stderr.isatty():
            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
