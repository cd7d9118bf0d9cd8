#!/usr/bin/env python3
"""Generates the committed demand CSVs.

Deterministic by construction (no RNG), so re-running it reproduces the
checked-in files byte for byte. The meshed30 series covers 3855 slots:
enough for the paper preset (n_t=3840, n_tau=16) and, as a prefix, the
desk preset (n_t=96).
"""

import math
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "cases")

N_BUSES = 30
SLOTS = 3855
SLOTS_PER_DAY = 96

# Relative load weight per bus; generator buses (1, 2, 13, 22, 23, 27)
# carry less local load than pure load buses.
GEN_BUSES = {1, 2, 13, 22, 23, 27}


def bus_weight(j: int) -> float:
    base = 1.0 + ((j * 7) % 13) / 6.0
    if j in GEN_BUSES:
        base *= 0.35
    return base


def day_shape(slot_of_day: int) -> float:
    """Double-peak daily profile on [0.62, ~1.0]."""
    h = slot_of_day / 4.0
    morning = 0.25 * math.exp(-(((h - 9.0) / 2.5) ** 2))
    evening = 0.33 * math.exp(-(((h - 19.0) / 2.2) ** 2))
    return 0.62 + morning + evening


def series(slot: int, j: int) -> float:
    day = slot // SLOTS_PER_DAY
    weekly = 1.0 + 0.03 * math.sin(2.0 * math.pi * day / 7.0)
    wiggle = 1.0 + 0.01 * math.sin(0.7 * slot + 1.3 * j)
    return bus_weight(j) * day_shape(slot % SLOTS_PER_DAY) * weekly * wiggle


def write_meshed30() -> None:
    weights = sum(bus_weight(j) for j in range(1, N_BUSES + 1))
    # Peak system demand ~400 MW against 600 MW of capacity, so the 1.2x
    # coefficient sweep keeps ~17% headroom.
    scale = 400.0 / weights
    path = os.path.join(OUT_DIR, "meshed30_demand.csv")
    with open(path, "w") as f:
        f.write(",".join(f"bus_{j}" for j in range(1, N_BUSES + 1)) + "\n")
        for slot in range(SLOTS):
            row = (f"{series(slot, j) * scale:.3f}" for j in range(1, N_BUSES + 1))
            f.write(",".join(row) + "\n")
    total0 = sum(series(0, j) * scale for j in range(1, N_BUSES + 1))
    print(f"{path}: {SLOTS} slots, slot-0 total {total0:.1f} MW")


def write_toy() -> None:
    path = os.path.join(OUT_DIR, "toy_demand.csv")
    with open(path, "w") as f:
        f.write("bus_1,bus_2\n")
        for slot in range(16):
            mw = 32.0 + 12.0 * math.sin(2.0 * math.pi * slot / 16.0)
            f.write(f"0.000,{mw:.3f}\n")
    print(f"{path}: 16 slots")


if __name__ == "__main__":
    write_meshed30()
    write_toy()
