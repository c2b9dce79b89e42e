#!/usr/bin/env python3
"""Writes the bundled synthetic 3-home, 24-hour scenario to data/bundled/."""

import argparse
import csv
import json
import math
from pathlib import Path

HOURS = 24


def outdoor_temp(h):
    # Daily swing around 70 F, warmest mid afternoon.
    return 70.0 + 8.0 * math.cos(2.0 * math.pi * (h - 15) / 24.0)


def irradiance(h):
    return max(0.0, math.sin(math.pi * (h - 6) / 13.0))


def lem_price(h):
    # Duck curve: cheap around solar noon, evening peak.
    evening = 0.30 * math.exp(-(((h - 19.0) / 2.5) ** 2))
    midday = 0.10 * math.exp(-(((h - 13.0) / 3.0) ** 2))
    return round(0.15 + evening - midday, 6)


def fixed_load(h, scale):
    morning = 0.8 * math.exp(-(((h - 7.5) / 1.5) ** 2))
    evening = 1.2 * math.exp(-(((h - 19.5) / 2.0) ** 2))
    return round(scale * (2.0 + morning + evening), 6)


def write_series(path, values):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "value"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


def home(index, gamma, pv_kw, load_scale, t_init):
    n = index + 1
    return {
        "id": f"home{n}",
        "gamma": gamma,
        "fixed_load": [fixed_load(h, load_scale) for h in range(HOURS)],
        "devices": [
            {"type": "battery", "id": f"bs{n}", "capacity_kwh": 13.5, "p_min": -5.0, "p_max": 5.0,
             "soc_min": 0.1, "soc_max": 0.95, "soc_init": 0.5, "efficiency": 1.0, "self_discharge": 0.0},
            {"type": "ev", "id": f"ev{n}", "capacity_kwh": 60.0, "p_min": -7.0, "p_max": 7.0,
             "soc_min": 0.2, "soc_max": 0.95, "soc_init": 0.6, "away_window": [9, 17],
             "soc_target": 0.9, "target_step": 9},
            {"type": "heat_pump", "id": f"hp{n}", "r_th": 2.0, "c_th": 4.75, "cop": 3.0, "p_rated": 3.0,
             "t_min": 67.0, "t_max": 73.0, "t_setpoint": 70.0, "t_init": t_init},
            {"type": "pv", "id": f"pv{n}", "p_rated": pv_kw},
        ],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "bundled")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    write_series(args.out / "outdoor_temp.csv", [outdoor_temp(h) for h in range(HOURS)])
    write_series(args.out / "irradiance_frac.csv", [irradiance(h) for h in range(HOURS)])
    write_series(args.out / "lem_price.csv", [lem_price(h) for h in range(HOURS)])

    doc = {
        "name": "bundled-3-homes",
        "time": {"dt_hours": 1.0, "total_steps": HOURS, "horizon_len": HOURS, "pad_cyclic": True},
        "units": {"temperature": "F"},
        "weights": {"alpha_cyc": 0.1, "xi_ev": 5000.0, "xi_ac": 1.0, "xi_pv": 1.0, "utilization": 1.0},
        "policy": {"beta": 0.4, "clip_to_positivity": True, "clip_to_no_saturation": True},
        "solver": {"tol": 1e-6, "max_iter": 20000, "node_limit": 20,
                   "local_search_passes": 10, "gap_tol": 1e-6},
        "series": {"outdoor_temp": "outdoor_temp.csv", "irradiance_frac": "irradiance_frac.csv",
                   "lem_price": "lem_price.csv"},
        "agents": [
            home(0, 1.0, 3.0, 1.0, 70.0),
            home(1, 1.5, 3.5, 1.2, 70.5),
            home(2, 2.0, 4.0, 1.4, 69.5),
        ],
    }
    with open(args.out / "scenario.json", "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
