#!/usr/bin/env python
"""Report typical magnitudes of the reward ingredients under a random policy.

The mixing weights trade off terms with different natural scales (a
cross-entropy in nats, two squared errors in (bit/s/Hz)^2, and a raw rate
in bit/s/Hz). This script prints the observed scales for a given config so
weight choices can be grounded in data rather than guesswork.

    python scripts/reward_balance.py --preset smoke --episodes 8
"""

import argparse

from uwacr.bench import build_env, reward_term_magnitudes
from uwacr.config import default_config, load_config, smoke_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None)
    parser.add_argument("--preset", choices=["default", "smoke"], default="default")
    parser.add_argument("--episodes", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = smoke_config() if args.preset == "smoke" else default_config()
    env = build_env(cfg)
    report = reward_term_magnitudes(env, n_episodes=args.episodes, seed=args.seed)
    print(f"samples:                {report['samples']}")
    print(f"|rb term| mean:         {report['rb_term_mean_abs']:.4f}")
    print(f"|rate term| mean:       {report['rate_term_mean_abs']:.4f}")
    print(f"chosen-rate mean:       {report['chosen_rate_mean']:.4f}")
    w = cfg.reward
    print(f"weighted rb:            {w.w5 * report['rb_term_mean_abs']:.4f}")
    print(f"weighted rate:          {w.w6 * report['rate_term_mean_abs']:.4f}")
    print(f"weighted chosen:        {w.w7 * report['chosen_rate_mean']:.4f}")


if __name__ == "__main__":
    main()
