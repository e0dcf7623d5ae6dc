#!/usr/bin/env python3
"""Generate a deterministic synthetic interaction stream in the benchmark
CSV schema, for smoke-testing the pipeline without the real datasets."""

import argparse

from grnnlab.evalbench import write_synthetic_linkstream


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output CSV path")
    parser.add_argument("--events", type=int, default=5000)
    parser.add_argument("--users", type=int, default=200)
    parser.add_argument("--items", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    write_synthetic_linkstream(args.out, num_events=args.events,
                               num_users=args.users, num_items=args.items,
                               seed=args.seed)
    print(f"wrote {args.events} events to {args.out}")
