#!/usr/bin/env python3
"""Generates the committed case files.

The meshed30 case is a 30-bus, 41-line, 6-unit system: a full ring plus
11 chords, so no single line outage can island a bus and every line is a
valid N-1 candidate. Flow limits were sized from a proportional-dispatch
flow survey over all 42 topologies at the 1.2x demand extreme (see
FLOW_LIMITS below); the three most loaded corridors get the least
headroom so the case exhibits mild congestion without making any
baseline infeasible.
"""

import json
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "cases")

RING = [(i, i + 1) for i in range(1, 30)] + [(30, 1)]
CHORDS = [
    (1, 15),
    (5, 20),
    (8, 25),
    (3, 12),
    (17, 28),
    (6, 23),
    (10, 27),
    (2, 18),
    (14, 22),
    (9, 26),
    (13, 29),
]

# Max |flow| in MW per line over the sizing survey: proportional and
# merit-order dispatch across the intact grid plus all 41 single-line
# outages, every demand slot, at the 1.2x demand extreme.
SURVEY_MAX_MW = [
    67.08, 116.10, 70.54, 58.43, 61.71, 45.80, 24.42, 24.01, 39.43, 47.83,
    75.05, 88.79, 59.01, 69.66, 54.13, 32.99, 30.83, 64.81, 56.11, 45.35,
    60.42, 76.65, 57.67, 30.43, 37.77, 50.64, 74.00, 70.44, 107.38, 115.89,
    113.93, 39.34, 17.87, 46.19, 38.99, 55.05, 38.75, 98.29, 41.13, 26.66,
    38.57,
]


def round_up_5(x: float) -> float:
    import math

    return 5.0 * math.ceil(x / 5.0)


def flow_limits() -> list:
    congested = sorted(range(len(SURVEY_MAX_MW)), key=lambda i: -SURVEY_MAX_MW[i])[:3]
    limits = []
    for ix, m in enumerate(SURVEY_MAX_MW):
        headroom = 1.15 if ix in congested else 1.4
        limits.append(max(25.0, round_up_5(headroom * m)))
    return limits


FLOW_LIMITS = flow_limits()

UNITS = [
    # (bus, p_min, p_max, ramp, cost_a, cost_b, cost_c)
    (1, 10.0, 180.0, 45.0, 0.012, 18.0, 80.0),
    (2, 8.0, 120.0, 30.0, 0.018, 20.0, 60.0),
    (13, 5.0, 90.0, 25.0, 0.028, 24.0, 40.0),
    (22, 5.0, 80.0, 22.0, 0.024, 23.0, 35.0),
    (23, 4.0, 70.0, 20.0, 0.032, 27.0, 30.0),
    (27, 3.0, 60.0, 18.0, 0.038, 30.0, 25.0),
]


def susceptance(line_ix: int, is_chord: bool) -> float:
    if is_chord:
        return 4.0 + 1.2 * (line_ix % 4)
    return 8.0 + 1.5 * (line_ix % 5)


def meshed30() -> dict:
    lines = []
    for ix, (a, b) in enumerate(RING + CHORDS):
        line_id = ix + 1
        limit = FLOW_LIMITS[ix] if FLOW_LIMITS else 10000.0
        lines.append(
            {
                "id": line_id,
                "from": a,
                "to": b,
                "susceptance_pu": susceptance(ix, ix >= len(RING)),
                "flow_limit_mw": limit,
            }
        )
    units = []
    for ix, (bus, p_min, p_max, ramp, a, b, c) in enumerate(UNITS):
        units.append(
            {
                "id": ix + 1,
                "bus": bus,
                "p_min_mw": p_min,
                "p_max_mw": p_max,
                "ramp_up_mw": ramp,
                "ramp_down_mw": ramp,
                "cost_a": a,
                "cost_b": b,
                "cost_c": c,
            }
        )
    return {
        "name": "meshed30",
        "base_mva": 100.0,
        "buses": [{"id": 1, "slack": True}] + [{"id": j} for j in range(2, 31)],
        "lines": lines,
        "units": units,
    }


def toy2() -> dict:
    return {
        "name": "toy2",
        "base_mva": 100.0,
        "buses": [{"id": 1, "slack": True}, {"id": 2}],
        "lines": [
            {"id": 1, "from": 1, "to": 2, "susceptance_pu": 10.0, "flow_limit_mw": 60.0}
        ],
        "units": [
            {
                "id": 1,
                "bus": 1,
                "p_min_mw": 5.0,
                "p_max_mw": 100.0,
                "ramp_up_mw": 30.0,
                "ramp_down_mw": 30.0,
                "cost_a": 0.02,
                "cost_b": 10.0,
                "cost_c": 5.0,
            }
        ],
    }


def write(name: str, case: dict) -> None:
    path = os.path.join(OUT_DIR, name)
    with open(path, "w") as f:
        json.dump(case, f, indent=2)
        f.write("\n")
    print(path)


if __name__ == "__main__":
    write("meshed30.json", meshed30())
    write("toy2.json", toy2())
