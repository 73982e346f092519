#!/usr/bin/env python3
"""Convert a MATPOWER radial distribution case (.m) into the gridflow JSON case format.

Mapping:
  mpc.baseMVA            -> base_mva
  bus type 3             -> psp (exactly one allowed)
  bus PD/QD (MW/MVAr)    -> p_demand/q_demand (MW/MVAr, file units)
  bus VMIN/VMAX          -> v_min/v_max (slack bus limits are dropped)
  branch R/X (ohm)       -> r/x in p.u. on (BASE_KV, baseMVA)
  branch status 0        -> normally_open: true (implies switchable)
The kW/kVAr and ohm scalings applied at the bottom of case33bw.m / case141.m are
reproduced here, including the 0.85 power-factor split used by case141.m.
"""
import argparse
import json
import math
import re


def _block(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    rows = []
    for line in m.group(1).split("\n"):
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def _num(v):
    r = round(v, 12)
    return float("%.12g" % r)


def convert(path, v0, all_switchable, pf=None):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.]+)", text).group(1))
    bus = _block(text, "bus")
    branch = _block(text, "branch")
    kv = bus[0][9]
    zbase = (kv * 1e3) ** 2 / (base * 1e6)
    root = [int(b[0]) for b in bus if int(b[1]) == 3]
    assert len(root) == 1
    buses = []
    for b in bus:
        pd, qd = b[2] / 1e3, b[3] / 1e3
        if pf is not None:
            qd = pd * math.sin(math.acos(pf))
            pd = pd * pf
        rec = {"id": int(b[0]), "p_demand": _num(pd), "q_demand": _num(qd)}
        if int(b[1]) != 3:
            rec["v_min"] = b[12]
            rec["v_max"] = b[11]
        buses.append(rec)
    branches = []
    for br in branch:
        rec = {"from": int(br[0]), "to": int(br[1]),
               "r": _num(br[2] / zbase), "x": _num(br[3] / zbase)}
        if all_switchable:
            rec["switchable"] = True
        if br[10] == 0:
            rec["normally_open"] = True
            rec["switchable"] = True
        branches.append(rec)
    return {"base_mva": base, "psp": root[0], "v0": v0, "buses": buses, "branches": branches}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("case")
    ap.add_argument("out")
    ap.add_argument("--v0", type=float, default=1.05)
    ap.add_argument("--all-switchable", action="store_true")
    ap.add_argument("--pf", type=float, default=None,
                    help="split PD (kVA) into P/Q at this power factor")
    args = ap.parse_args()
    doc = convert(args.case, args.v0, args.all_switchable, args.pf)
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
