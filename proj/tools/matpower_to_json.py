#!/usr/bin/env python3
"""Convert a MATPOWER/PYPOWER case into the evsched JSON case schema.

Usage: matpower_to_json.py <pypower case name> <output.json>

Column mapping (MATPOWER -> schema):
  bus:    BUS_I -> id, VMIN/VMAX -> v_min/v_max, PD/QD divided by baseMVA -> base_load_p/q
  gen:    GEN_BUS -> bus, PMIN/PMAX, QMIN/QMAX divided by baseMVA -> p_min/p_max/q_min/q_max
  gencost (polynomial, n=3): c2, c1, c0 copied verbatim ($/MW^2h, $/MWh, $/h)
  branch: F_BUS/T_BUS -> from/to, 1/(BR_R + j BR_X) -> admittance [re, im]
          BR_B (line charging), TAP and SHIFT are dropped.
          ANGMIN/ANGMAX are copied into angle_limits only when |ANG| < 90 deg.
"""
import importlib
import json
import math
import sys


def convert(ppc):
    base = float(ppc["baseMVA"])
    buses = []
    for row in ppc["bus"]:
        buses.append({
            "id": int(row[0]),
            "v_min": float(row[12]),
            "v_max": float(row[11]),
            "base_load_p": float(row[2]) / base,
            "base_load_q": float(row[3]) / base,
        })
    lines = []
    angle_limits = []
    for row in ppc["branch"]:
        if int(row[10]) == 0:
            continue
        z = complex(float(row[2]), float(row[3]))
        y = 1.0 / z
        lines.append({"from": int(row[0]), "to": int(row[1]), "admittance": [y.real, y.imag]})
        if len(row) > 12:
            amax = float(row[12])
            if 0.0 < amax < 90.0:
                angle_limits.append({"from": int(row[0]), "to": int(row[1]),
                                     "theta_max": math.radians(amax)})
    gens = []
    for row, cost in zip(ppc["gen"], ppc["gencost"]):
        if int(row[7]) == 0:
            continue
        n = int(cost[3])
        coeffs = [float(c) for c in cost[4:4 + n]]
        coeffs = [0.0] * (3 - len(coeffs)) + coeffs
        gens.append({
            "bus": int(row[0]),
            "p_min": float(row[9]) / base,
            "p_max": float(row[8]) / base,
            "q_min": float(row[4]) / base,
            "q_max": float(row[3]) / base,
            "cost": coeffs[-3:],
        })
    out = {"base_mva": base, "buses": buses, "lines": lines, "generators": gens}
    if angle_limits:
        out["angle_limits"] = angle_limits
    return out


def main():
    name, path = sys.argv[1], sys.argv[2]
    mod = importlib.import_module("pypower." + name)
    ppc = getattr(mod, name)()
    with open(path, "w") as fh:
        json.dump(convert(ppc), fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
