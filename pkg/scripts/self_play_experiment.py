#!/usr/bin/env python3
"""Compare just-side policies in scripted self-play tournaments.

Runs one seeded tournament per requested just-side policy against the
scripted evil baseline and prints the metrics side by side. The same base
seed gives every policy the same sequence of deals, so differences in the
table reflect policy skill, not luck. Records can optionally be kept for
later `avalonplay replay` / `avalonplay analyze` passes.

Example:
    python3 scripts/self_play_experiment.py --games 1000 --base-seed 42
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from avalonplay.runner import AgentSpec, TournamentConfig, run_tournament

RATE_ROWS = (
    ("just game win rate", "just_game_win_rate"),
    ("just quest win rate", "just_quest_win_rate"),
    ("quest success rate", "quest_success_rate"),
    ("team accuracy (just-led)", "team_accuracy"),
    ("rejected ballots / game", "rejected_ballots_per_game"),
    ("assassination hit rate", "assassination_hit_rate"),
)
COUNT_ROWS = (
    ("completed games", "n_completed"),
    ("aborted games", "n_aborted"),
    ("forced approvals", "forced_approvals"),
    ("assassination attempts", "assassination_attempts"),
)


def fmt_rate(value: Fraction | None) -> str:
    if value is None:
        return "-"
    return f"{float(value):.3f} ({value.numerator}/{value.denominator})"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--policies",
        default="deduction,random",
        help="comma-separated just-side policies to compare (default: deduction,random)",
    )
    parser.add_argument("--games", type=int, default=1000, help="games per policy")
    parser.add_argument("--base-seed", type=int, default=42, help="tournament base seed")
    parser.add_argument("--parallelism", type=int, default=8, help="worker processes")
    parser.add_argument(
        "--record-dir",
        default=None,
        help="keep per-game records under DIR/<policy>/ (default: discard)",
    )
    parser.add_argument(
        "--json", action="store_true", help="emit the full reports as JSON instead of a table"
    )
    args = parser.parse_args(argv)

    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        parser.error("no policies given")

    results = {}
    for policy in policies:
        record_dir = None
        if args.record_dir:
            record_dir = str(Path(args.record_dir) / policy)
        tc = TournamentConfig(
            n_games=args.games,
            base_seed=args.base_seed,
            just_spec=AgentSpec(policy=policy),
            evil_spec=AgentSpec(policy="scripted_evil"),
            parallelism=args.parallelism,
            record_dir=record_dir,
        )
        results[policy] = run_tournament(tc)

    if args.json:
        payload = {
            policy: {"digest": result.digest(), "report": result.report.to_json()}
            for policy, result in results.items()
        }
        json.dump(payload, sys.stdout, indent=2)
        print()
        return 0

    width = max(len(label) for label, _ in RATE_ROWS + COUNT_ROWS)
    col = 24
    header = " " * (width + 2) + "".join(f"{p:>{col}}" for p in policies)
    print(f"{args.games} games per policy, base seed {args.base_seed}, evil = scripted_evil")
    print(header)
    print("-" * len(header))
    for label, key in COUNT_ROWS:
        cells = "".join(f"{getattr(results[p].report, key):>{col}}" for p in policies)
        print(f"{label:<{width}}  {cells}")
    for label, key in RATE_ROWS:
        cells = "".join(f"{fmt_rate(getattr(results[p].report, key)):>{col}}" for p in policies)
        print(f"{label:<{width}}  {cells}")
    print("-" * len(header))
    for policy, result in results.items():
        print(f"digest {policy}: {result.digest()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
