#!/usr/bin/env python3
"""Tabulate viability classifications across the standard schedule families."""

import argparse

from insider_lab.schedules import (
    AffineBelowSchedule,
    ConstantSchedule,
    PowerLawSchedule,
    ScheduleError,
    classify_viability,
    regime,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--T", type=float, default=1.0, help="time horizon (default 1)")
    args = parser.parse_args()

    entries = []
    for q in (0.25, 0.5, 0.75, 0.9, 1.0, 1.5, 2.0):
        entries.append((f"powerlaw q={q:g}", lambda q=q: PowerLawSchedule(q, args.T)))
    for v in (0.1, 0.5, 1.0):
        entries.append((f"const {v:g}", lambda v=v: ConstantSchedule(v, args.T)))
    for c in (0.25, 0.5, 1.0):
        entries.append((f"affine_below c={c:g}",
                        lambda c=c: AffineBelowSchedule(c, args.T)))

    print(f"{'schedule':20} {'regime':14} {'classification':24} "
          f"{'integral':>12}  method")
    for label, build in entries:
        try:
            sched = build()
        except ScheduleError as exc:
            print(f"{label:20} rejected: {exc}")
            continue
        rep = classify_viability(sched)
        print(f"{label:20} {regime(sched).value:14} "
              f"{rep.classification.value:24} {rep.integral_label():>12}  "
              f"{rep.method.value}")


if __name__ == "__main__":
    main()
