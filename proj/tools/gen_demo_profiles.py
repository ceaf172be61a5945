#!/usr/bin/env python3
"""Regenerates the synthetic day curves in scenarios/profiles/.

Shapes only: a morning load peak near 10:00, two afternoon bumps and a midday
PV hump. Knots every 300 s from 09:15 to 15:00, times relative to 09:15.
Each knot gets a small random step whose sign is chosen to move the residual
(load - pv) away from the previous knot, so every knot is a visible transient.
"""
import argparse
import math
import pathlib
import random

START = 9 * 3600 + 15 * 60
END = 15 * 3600
SPACING = 300


def bump(h, centre, width):
    return math.exp(-((h - centre) ** 2) / (2 * width * width))


def generate(seed):
    rng = random.Random(seed)
    rows = []
    prev_residual = None
    for t in range(0, END - START + 1, SPACING):
        h = (START + t) / 3600
        load = 5.0 + 7.0 * bump(h, 10.0, 0.5) + 5.0 * bump(h, 13.5, 0.3) + 4.5 * bump(h, 14.5, 0.3)
        pv = round(min(36.0, 12.0 * bump(h, 12.0, 1.6)), 2)
        mag = rng.uniform(0.3, 0.8)
        options = [round(min(20.0, max(0.0, load + mag)), 2), round(min(20.0, max(0.0, load - mag)), 2)]
        if prev_residual is None:
            value = options[0]
        else:
            value = max(options, key=lambda x: abs((x - pv) - prev_residual))
        rows.append((t, value, pv))
        prev_residual = value - pv
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20220510)
    ap.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path(__file__).resolve().parent.parent / "scenarios" / "profiles")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = generate(args.seed)
    with open(args.out / "load.csv", "w", newline="\n") as f:
        f.write("t_s,value_kw\n")
        f.writelines(f"{t},{v:.2f}\n" for t, v, _ in rows)
    with open(args.out / "pv.csv", "w", newline="\n") as f:
        f.write("t_s,value_kw\n")
        f.writelines(f"{t},{p:.2f}\n" for t, _, p in rows)


if __name__ == "__main__":
    main()
