"""Command-line experiment runner.

    vsrl train --env gf --agent q --shield on --episodes 1000 --seed 1
    vsrl verify-theory --instances 200 --tol 1e-9
    vsrl detect-check --frames 1000
    vsrl render --env xo --steps 5
    vsrl report [RUN_DIR ...]

Outputs go under --out-dir, else $VSRL_OUT, else ./vsrl-out. A JSON config
file (--config) may override environment settings ("envs": {name: {...}}) and
command defaults ("train": {...}).

Exit codes: 0 success, 1 a requested check failed, 2 usage or input error,
3 the shield found no safe action.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from collections import defaultdict
from pathlib import Path
from statistics import median

import numpy as np

from vsrl.core import ContractError, write_pgm
from vsrl.envs import ENVS, make_env
from vsrl.learn import LEARNERS, train
from vsrl.mdp import WrapReport, chain_mdp, gridworld_mdp, random_mdp, verify_theorem2
from vsrl.perceive import make_extractor
from vsrl.shield import EmptySafeSet, RandomPolicy, ShieldedEnv, env_monitor

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EMPTY_SAFE_SET = 0, 1, 2, 3
CONFIG_SECTIONS = {"envs", "train"}
RUN_NAME = re.compile(r"train_(?P<env>\w+?)_(?P<agent>\w+?)_(?P<shield>on|off)_(?P<extractor>\w+?)_seed(?P<seed>\d+)\.csv")


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict) or set(cfg) - CONFIG_SECTIONS:
        raise UsageError(f"config must be an object with sections {sorted(CONFIG_SECTIONS)}")
    return cfg


def output_root(args) -> Path:
    root = Path(args.out_dir or os.environ.get("VSRL_OUT") or "vsrl-out")
    root.mkdir(parents=True, exist_ok=True)
    return root


def _env(name: str, cfg: dict, seed: int):
    return make_env(name, cfg.get("envs", {}).get(name), seed)


def cmd_train(args, cfg) -> int:
    defaults = cfg.get("train", {})
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    episodes = args.episodes if args.episodes is not None else 1000
    env = _env(args.env, cfg, args.seed)
    monitor = env_monitor(env) if args.shield == "on" else None
    extractor = make_extractor(args.extractor, env, args.epsilon or 0.0, seed=args.seed + 1)
    senv = ShieldedEnv(env, monitor, extractor if monitor else None, seed=args.seed + 2)
    agent = RandomPolicy(env.info.actions, args.seed) if args.agent == "random" else \
        LEARNERS[args.agent](env, seed=args.seed)
    out = output_root(args) / f"train_{args.env}_{args.agent}_{args.shield}_{args.extractor}_seed{args.seed}.csv"
    result = train(agent, senv, episodes, seed=args.seed, max_steps=args.max_steps, csv_path=out)
    summary = {"csv": str(out), "episodes": episodes, "violations": result.violations,
               "interventions": sum(r["interventions"] for r in result.rows),
               "mean_return": float(np.mean([r["return"] for r in result.rows])) if result.rows else 0.0}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_FAIL if monitor is not None and result.violations else EXIT_OK


def cmd_verify(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    report = WrapReport()
    cases = [random_mdp(rng) for _ in range(args.instances)]
    cases += [gridworld_mdp(), chain_mdp(), chain_mdp(10.0)]
    for mdp in cases:
        report.merge(verify_theorem2(mdp, args.tol, args.policies, rng))
    out = output_root(args) / "wrap_report.json"
    body = report.as_dict() | {"instances": len(cases), "tol": args.tol}
    out.write_text(json.dumps(body, indent=2, sort_keys=True))
    print(json.dumps({k: body[k] for k in sorted(body) if k not in ("counterexample", "notes")}, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_FAIL


def detect_check(env_name: str, frames: int, seed: int, cfg: dict | None = None) -> dict:
    """Template detector vs ground truth on decision-time frames of shielded random rollouts."""
    from vsrl.perceive import DetectorExtractor

    env = _env(env_name, cfg or {}, seed)
    senv = ShieldedEnv(env, env_monitor(env), make_extractor("oracle", env), seed=seed)
    policy = RandomPolicy(env.info.actions, seed)
    det = DetectorExtractor(env)
    stats = {"env": env_name, "frames": 0, "misses": 0, "false_positives": 0, "max_error_px": 0.0}
    obs = senv.reset()
    while stats["frames"] < frames:
        truth = env.true_symbolic_state()
        found = det(env, obs)
        m = env.pixel_map()
        stats["frames"] += 1
        for k in env.info.safety_classes:
            t_px = m.to_pixel(truth.of_class(k))
            f_px = m.to_pixel(found.of_class(k))
            unmatched = list(range(len(f_px)))
            for p in t_px:
                if not unmatched:
                    stats["misses"] += 1
                    continue
                d = [float(np.hypot(*(f_px[j] - p))) for j in unmatched]
                j = int(np.argmin(d))
                stats["max_error_px"] = max(stats["max_error_px"], d[j])
                unmatched.pop(j)
            stats["false_positives"] += len(unmatched)
        result = senv.step(policy(obs))
        obs = senv.reset() if result.done else result.observation
    stats["tolerance_px"] = env.info.pixel_tolerance
    stats["passed"] = (stats["misses"] == 0 and stats["false_positives"] == 0
                       and stats["max_error_px"] <= env.info.pixel_tolerance)
    return stats


def cmd_detect(args, cfg) -> int:
    names = [args.env] if args.env else sorted(ENVS)
    results = [detect_check(n, args.frames, args.seed, cfg) for n in names]
    (output_root(args) / "detect_check.json").write_text(json.dumps(results, indent=2))
    for r in results:
        print(json.dumps(r, sort_keys=True))
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


def cmd_render(args, cfg) -> int:
    env = _env(args.env, cfg, args.seed)
    policy = RandomPolicy(env.info.actions, args.seed)
    root = output_root(args)
    obs = env.reset()
    paths = []
    for t in range(args.steps + 1):
        path = root / f"{args.env}_seed{args.seed}_t{t:03d}.pgm"
        write_pgm(path, obs.frame)
        paths.append(str(path))
        if t == args.steps:
            break
        result = env.step(policy(obs))
        if result.done:
            break
        obs = result.observation
    print(json.dumps({"frames": paths}))
    return EXIT_OK


def load_runs(dirs: list[Path]) -> list[dict]:
    runs = []
    for d in dirs:
        if not d.is_dir():
            raise UsageError(f"not a directory: {d}")
        for path in sorted(d.glob("train_*.csv")):
            m = RUN_NAME.fullmatch(path.name)
            if not m:
                continue
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
            runs.append({**m.groupdict(), "path": path,
                         "returns": [float(r["return"]) for r in rows],
                         "violations": sum(int(r["violations"]) for r in rows)})
    return runs


def summarize(runs: list[dict], tail: float = 0.1) -> list[dict]:
    """Per (env, agent, shield, extractor): final reward R (median over seeds of the
    mean return in the last ``tail`` of training) and total unsafe actions U."""
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in runs:
        groups[(r["env"], r["agent"], r["shield"], r["extractor"])].append(r)
    table = []
    for key, rs in sorted(groups.items()):
        finals = []
        for r in rs:
            n = max(1, int(len(r["returns"]) * tail))
            finals.append(float(np.mean(r["returns"][-n:])) if r["returns"] else 0.0)
        table.append({"env": key[0], "agent": key[1], "shield": key[2], "extractor": key[3],
                      "replicates": len(rs), "R": median(finals), "U": sum(r["violations"] for r in rs)})
    return table


def plot_curves(runs: list[dict], path: Path, window: int = 50) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    envs = sorted({r["env"] for r in runs})
    fig, axes = plt.subplots(1, len(envs), figsize=(4 * len(envs), 3), squeeze=False)
    for ax, env in zip(axes[0], envs):
        groups: dict[str, list[np.ndarray]] = defaultdict(list)
        for r in runs:
            if r["env"] == env and r["returns"]:
                groups[f'{r["agent"]}/{r["shield"]}'].append(np.asarray(r["returns"]))
        for label, curves in sorted(groups.items()):
            n = min(len(c) for c in curves)
            y = np.median(np.stack([c[:n] for c in curves]), axis=0)
            w = max(1, min(window, n))
            ax.plot(np.convolve(y, np.ones(w) / w, mode="valid"), label=label)
        ax.set_title(env)
        ax.set_xlabel("episode")
        ax.set_ylabel("return")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_report(args, cfg) -> int:
    root = output_root(args)
    dirs = [Path(d) for d in args.runs] or [root]
    runs = load_runs(dirs)
    if not runs:
        raise UsageError(f"no training CSVs found in {', '.join(map(str, dirs))}")
    table = summarize(runs)
    out = root / "report.csv"
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["env", "agent", "shield", "extractor", "replicates", "R", "U"])
        w.writeheader()
        w.writerows(table)
    plot_curves(runs, root / "learning_curves.svg")
    print(f"{'env':5} {'agent':7} {'shield':6} {'extractor':9} {'n':>3} {'R':>10} {'U':>7}")
    for row in table:
        print(f"{row['env']:5} {row['agent']:7} {row['shield']:6} {row['extractor']:9} {row['replicates']:>3} "
              f"{row['R']:>10.3f} {row['U']:>7d}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsrl", description="Verifiably safe exploration experiments.")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", help="output directory (default $VSRL_OUT or ./vsrl-out)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train or run an agent, optionally shielded")
    t.add_argument("--env", choices=sorted(ENVS), required=True)
    t.add_argument("--agent", choices=["random", *LEARNERS], default="q")
    t.add_argument("--shield", choices=["on", "off"], default="on")
    t.add_argument("--extractor", choices=["oracle", "detector"], default="oracle")
    t.add_argument("--epsilon", type=float, default=None, help="oracle perception noise radius (world units)")
    t.add_argument("--episodes", type=int, default=None)
    t.add_argument("--max-steps", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify-theory", help="wrapped-MDP equivalence checks on random finite MDPs")
    v.add_argument("--instances", type=int, default=200)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--policies", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("detect-check", help="detector error bound on generated frames")
    d.add_argument("--env", choices=sorted(ENVS))
    d.add_argument("--frames", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_detect)

    r = sub.add_parser("render", help="dump frames of a random rollout as PGM")
    r.add_argument("--env", choices=sorted(ENVS), required=True)
    r.add_argument("--steps", type=int, default=10)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_render)

    s = sub.add_parser("report", help="aggregate training CSVs into a summary table and SVG curves")
    s.add_argument("runs", nargs="*", help="directories holding train_*.csv (default: output root)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except EmptySafeSet as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_SAFE_SET
    except (UsageError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
