"""Command-line front end.

Exit codes: 0 success, 1 runtime or input error, 2 missing config file,
3 evaluation produced an empty table.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench
from .agent import load_agent, save_agent, train
from .baselines import EpsilonPolicyConfig, calibrate_epsilon
from .chanmodel import ArrivalParseError, parse_arrival_file
from .config import AppConfig, config_fingerprint, default_config, load_config, smoke_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_CONFIG = 2
EXIT_EMPTY_TABLE = 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--preset", choices=["default", "smoke"], default="default",
                   help="built-in preset used when --config is absent")


def _resolve_config(args) -> AppConfig:
    if args.config is not None:
        if not os.path.exists(args.config):
            raise FileNotFoundError(args.config)
        return load_config(args.config)
    return smoke_config() if args.preset == "smoke" else default_config()


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    env = bench.build_env(cfg)
    agent = bench.build_agent(cfg)
    episodes = args.episodes if args.episodes is not None else cfg.bench.train_episodes

    def log(row):
        if row["episode"] % args.log_every == 0:
            print(f"episode {row['episode']:4d}  reward {row['reward_mean']:+.4f}  "
                  f"success {row['success_rate']:.3f}  sigma {row['sigma']:.3f}")

    history = train(env, agent, episodes, seed=args.seed,
                    plateau_patience=args.plateau_patience, log=log)
    save_agent(agent, args.out)
    print(f"saved checkpoint to {args.out} ({len(history)} episodes, "
          f"config {config_fingerprint(cfg)})")
    if args.curves:
        bench.emit_training_curves(history, args.curves, window=cfg.bench.curve_window,
                                   config_hash=config_fingerprint(cfg))
        print(f"wrote training curves to {args.curves}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    names = [n.strip() for n in args.policies.split(",") if n.strip()]
    policies = {}
    for name in names:
        if name == "agent":
            if not args.checkpoint:
                print("policy 'agent' needs --checkpoint", file=sys.stderr)
                return EXIT_ERROR
            policies[name] = bench.agent_policy(load_agent(args.checkpoint))
        elif name == "cqi":
            policies[name] = bench.cqi_policy(
                EpsilonPolicyConfig(epsilon=args.eps_cqi, k=None), seed=cfg.bench.eval_seed)
        elif name == "ed":
            policies[name] = bench.ed_policy(args.eps_ed)
        elif name == "oracle":
            policies[name] = bench.oracle_policy()
        elif name == "random":
            policies[name] = bench.random_policy(seed=cfg.bench.eval_seed)
        else:
            print(f"unknown policy {name!r}", file=sys.stderr)
            return EXIT_ERROR
    rows = bench.run_sweep(cfg, policies, out_path=args.out,
                           episodes_per_point=args.episodes)
    if not rows:
        print("evaluation produced no rows", file=sys.stderr)
        return EXIT_EMPTY_TABLE
    for row in rows:
        print(f"snr {row['snr_db']:+5.1f} dB  {row['policy']:>8s}  "
              f"se {row['se_mean']:.4f} ± {row['se_ci95']:.4f}  "
              f"success {row['success_mean']:.3f}")
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = _resolve_config(args)
    env = bench.build_env(cfg)
    eps, achieved = calibrate_epsilon(env, args.policy, target=args.target,
                                      n_episodes=args.episodes, seed=args.seed)
    print(f"{args.policy}: epsilon {eps:.4f} reaches free-RB fit rate {achieved:.4f} "
          f"(target {args.target})")
    return EXIT_OK


def _cmd_parse_arr(args) -> int:
    try:
        with open(args.path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        af = parse_arrival_file(text)
    except ArrivalParseError as exc:
        print(f"{args.path}:{exc.line}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"frequency {af.frequency_hz:.1f} Hz, {len(af.cirs)} channel(s)")
    for i, cir in enumerate(af.cirs):
        print(f"  [{i}] taps {cir.delays.size}  spread {cir.delay_spread() * 1e3:.2f} ms  "
              f"energy {cir.energy():.3e}")
    return EXIT_OK


def _cmd_sinr_check(args) -> int:
    cfg = _resolve_config(args)
    report = bench.sinr_check(cfg, seed=args.seed, n_trials=args.trials)
    print(f"max rel err {report['max_rel_err']:.4f}  "
          f"mean rel err {report['mean_rel_err']:.4f}  ({report['n_trials']} trials)")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote report to {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwacr",
                                     description="underwater cognitive-access simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the access agent")
    _add_config_args(p)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="agent.npz")
    p.add_argument("--curves", default=None, help="training-curve CSV path")
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--plateau-patience", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="SNR sweep over one or more policies")
    _add_config_args(p)
    p.add_argument("--policies", default="agent,cqi,ed",
                   help="comma list: agent,cqi,ed,oracle,random")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--eps-cqi", type=float, default=0.37)
    p.add_argument("--eps-ed", type=float, default=0.39)
    p.add_argument("--out", default=None, help="sweep CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("calibrate-eps", help="calibrate a policy's rate backoff")
    _add_config_args(p)
    p.add_argument("--policy", choices=["cqi", "ed"], required=True)
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--episodes", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("parse-arr", help="inspect an arrival file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_parse_arr)

    p = sub.add_parser("sinr-check", help="closed form vs synthesis cross-check")
    _add_config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=4000)
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=_cmd_sinr_check)
    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its diagnostic
        return int(exc.code) if exc.code else EXIT_ERROR
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"config file not found: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
