#!/usr/bin/env python3
"""Build the data/eulv/ input set from the IEEE European LV test feeder.

Topology, line codes and load phases come from the copy of the feeder that
ships with pandapower (networks/IEEE_European_LV_*.json). That copy only
carries three load snapshots (minutes 1, 566 and 1440), so the 1440-minute
load shapes are synthesized: a seeded residential daily profile with
appliance events, pinned to the three snapshot values.

Usage: python3 tools/import_eulv.py [OUT_DIR]
Needs numpy and pandas; pandapower only has to be installed (it is not imported).
"""
import importlib.util
import io
import json
import os
import sys

import numpy as np
import pandas as pd

SEED = 20180
MINUTES = 1440
ANCHORS = {"Off_Peak_1": 0, "On_Peak_566": 565, "Off_Peak_1440": 1439}

# pandapower drops the dots from the OpenDSS line-code names.
CODE_NAMES = {
    "2c_007": "2c_.007",
    "2c_0225": "2c_.0225",
    "2c_16": "2c_16",
    "35_SAC_XSC": "35_SAC_XSC",
    "4c_06": "4c_.06",
    "4c_1": "4c_.1",
    "4c_35": "4c_.35",
    "4c_185": "4c_185",
    "4c_70": "4c_70",
    "4c_95_SAC_XC": "4c_95_SAC_XC",
}

AMPACITY = [
    ("2c_.007", 56),
    ("2c_.0225", 83),
    ("2c_16", 83),
    ("35_SAC_XSC", 110),
    ("4c_.06", 210),
    ("4c_.1", 560),
    ("4c_.35", 210),
    ("4c_185", 405),
    ("4c_70", 560),
    ("4c_95_SAC_XC", 180),
]


def network_dir():
    spec = importlib.util.find_spec("pandapower")
    if spec is None or not spec.submodule_search_locations:
        sys.exit("pandapower is not installed")
    return os.path.join(list(spec.submodule_search_locations)[0], "networks")


def read_tables(path):
    obj = json.load(open(path))["_object"]

    def table(key):
        v = obj[key]
        if isinstance(v, dict) and "_object" in v:
            v = v["_object"]
        return pd.read_json(io.StringIO(v), orient="split")

    return table


def diurnal(minutes):
    h = minutes / 60.0
    base = 0.12
    morning = 0.35 * np.exp(-0.5 * ((h - 7.6) / 1.0) ** 2)
    midday = 0.15 * np.exp(-0.5 * ((h - 13.0) / 2.5) ** 2)
    evening = 0.55 * np.exp(-0.5 * ((h - 19.0) / 1.9) ** 2)
    return base + morning + midday + evening


def synth_shape(rng, anchors):
    t = np.arange(MINUTES, dtype=float)
    profile = diurnal(t) * rng.lognormal(0.0, 0.3)
    shape = profile * (1.0 + 0.1 * rng.standard_normal(MINUTES))
    weights = diurnal(t)
    weights /= weights.sum()
    for _ in range(rng.poisson(10)):
        start = rng.choice(MINUTES, p=weights)
        dur = int(rng.integers(2, 30))
        power = rng.uniform(0.8, 2.5)
        shape[start : start + dur] += power
    shape = np.clip(shape, 0.0, None)
    # pin the snapshot minutes, blending the correction over +-15 minutes
    for idx, value in anchors.items():
        delta = value - shape[idx]
        lo, hi = max(0, idx - 15), min(MINUTES, idx + 16)
        ramp = 1.0 - np.abs(np.arange(lo, hi) - idx) / 16.0
        shape[lo:hi] += delta * ramp
        shape[idx] = value
    return np.clip(shape, 0.0, None)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "eulv")
    os.makedirs(os.path.join(out, "shapes"), exist_ok=True)
    nd = network_dir()
    snaps = {k: read_tables(os.path.join(nd, f"IEEE_European_LV_{k}.json")) for k in ANCHORS}
    tables = snaps["On_Peak_566"]
    bus = tables("bus")
    line = tables("line")
    name = {i: str(n) for i, n in zip(bus.index, bus.name)}

    with open(os.path.join(out, "lines.csv"), "w") as f:
        f.write("line_id,from_bus,to_bus,phases,line_code,length_m\n")
        for _, r in line.iterrows():
            f.write(f"{r['name']},{name[r.from_bus]},{name[r.to_bus]},ABC,"
                    f"{CODE_NAMES[r.std_type]},{r.length_km * 1000.0:.3f}\n")

    with open(os.path.join(out, "codes.csv"), "w") as f:
        f.write("line_code,ampacity_a\n")
        for code, amp in AMPACITY:
            f.write(f"{code},{amp}\n")

    loads = {k: t("asymmetric_load") for k, t in snaps.items()}
    base = loads["On_Peak_566"]
    rng = np.random.default_rng(SEED)
    with open(os.path.join(out, "loads.csv"), "w") as f:
        f.write("load_id,bus,phase,shape_file\n")
        for i, r in base.iterrows():
            phase = max("abc", key=lambda p: max(abs(loads[k].loc[i, f"p_{p}_mw"]) for k in loads))
            anchors = {
                idx: 1000.0 * sum(loads[k].loc[i, f"p_{p}_mw"] for p in "abc")
                for k, idx in ANCHORS.items()
            }
            shape = synth_shape(rng, anchors)
            fname = f"shapes/{r['name'].lower()}.csv"
            with open(os.path.join(out, fname), "w") as g:
                g.write("".join(f"{v:.4f}\n" for v in shape))
            f.write(f"{r['name']},{name[r.bus]},{phase.upper()},{fname}\n")


if __name__ == "__main__":
    main()
