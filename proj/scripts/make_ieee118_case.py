#!/usr/bin/env python3
"""Writes cases/ieee118.case from the MATPOWER/PYPOWER 118-bus data.

The source data carries no usable thermal ratings (every rateA is 9900 MVA)
and quadratic costs, so both are replaced. Demand (P and Q) is scaled by
LOAD_SCALE to put the grid under stress: at nominal demand no cascade ever
ends in power-flow divergence, at twice nominal the alpha = 1 policy loses
roughly half of its episodes.

  * cost   = linear coefficient c1 / COST_DIVISOR per p.u.
  * rating = max(RATE_MARGIN * |f0|, RATE_FLOOR), where f0 is the DC flow
             under the source dispatch scaled to the total demand.

The DC model ignores losses, which the slack bus picks up in the AC solution,
so ratings are then raised (never lowered) until the AC power flow under the
alpha = 1 DCOPF dispatch loads no branch above AC_TARGET. That step runs the
cascade-rl CLI.

Bus shunts and transformer taps have no field in the case format and are
dropped. Usage:
  PYTHONPATH=<pypower> make_ieee118_case.py [--cli build/tools/cascade-rl] [out-path]
"""

import argparse
import json
import subprocess
import sys

import numpy as np
from pypower.case118 import case118

COST_DIVISOR = 20.0
RATE_MARGIN = 1.1
RATE_FLOOR = 0.3
LOAD_SCALE = 2.0
AC_TARGET = 0.97
AC_RELIEF = 0.95


def dc_flows(bus_ids, branch, inj, slack_pos):
    n = len(bus_ids)
    pos = {b: i for i, b in enumerate(bus_ids)}
    B = np.zeros((n, n))
    for f, t, x in branch:
        i, j, s = pos[f], pos[t], 1.0 / x
        B[i, i] += s
        B[j, j] += s
        B[i, j] -= s
        B[j, i] -= s
    keep = [i for i in range(n) if i != slack_pos]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], inj[keep])
    return np.array([(theta[pos[f]] - theta[pos[t]]) / x for f, t, x in branch])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="cases/ieee118.case")
    ap.add_argument("--cli", default="build/tools/cascade-rl")
    ap.add_argument("--rounds", type=int, default=50)
    args = ap.parse_args()
    rates = None
    for _ in range(args.rounds):
        write_case(args.out, rates)
        if rates is None:
            rates = read_rates(args.out)
        pf = json.loads(subprocess.run([args.cli, "pf", "--case", args.out], check=True,
                                       capture_output=True, text=True).stdout)
        flow = np.abs(np.array(pf["flow_from"]))
        hot = flow / rates > AC_TARGET
        if not hot.any():
            return
        rates = np.where(hot, flow / AC_RELIEF, rates)
    sys.exit("ratings did not settle")


def read_rates(path):
    rates, section = [], None
    for line in open(path):
        line = line.strip()
        if line.startswith("["):
            section = line
        elif line and not line.startswith("#") and section == "[branch]":
            rates.append(float(line.split(",")[5]))
    return np.array(rates)


def write_case(out, rates=None):
    c = case118()
    base = float(c["baseMVA"])
    bus, gen, br, cost = c["bus"], c["gen"], c["branch"], c["gencost"]

    bus_ids = [int(b[0]) for b in bus]
    pos = {b: i for i, b in enumerate(bus_ids)}
    slack = [i for i, b in enumerate(bus) if int(b[1]) == 3][0]
    vset = {int(g[0]): float(g[5]) for g in gen}

    pd = LOAD_SCALE * bus[:, 2] / base
    pg = gen[:, 1] / base
    pg = pg * pd.sum() / pg.sum()
    inj = -pd.copy()
    for g, p in zip(gen, pg):
        inj[pos[int(g[0])]] += p
    lines = [(int(b[0]), int(b[1]), float(b[3])) for b in br]
    f0 = dc_flows(bus_ids, lines, inj, slack)
    if rates is None:
        rates = np.maximum(RATE_MARGIN * np.abs(f0), RATE_FLOOR)

    kind = {1: "pq", 2: "pv", 3: "slack"}
    rows = [
        f"# IEEE 118-bus system at {LOAD_SCALE:g}x nominal demand, per-unit on the base below.",
        "# Ratings and linear costs are synthetic (see scripts/make_ieee118_case.py);",
        "# bus shunts and transformer taps are not represented.",
        "[meta]",
        f"{base:g}",
        "[bus]",
        "# id,kind,v_set,v_init,theta_init",
    ]
    for b in bus:
        bid = int(b[0])
        k = kind[int(b[1])]
        vs = vset.get(bid, 1.0) if k != "pq" else 1.0
        rows.append(f"{bid},{k},{vs:.6g},{b[7]:.6g},{np.deg2rad(b[8]):.8g}")
    rows += ["[branch]", "# from,to,r,x,b,rate,in_service"]
    for b, rate in zip(br, rates):
        rows.append(f"{int(b[0])},{int(b[1])},{b[2]:.6g},{b[3]:.6g},{b[4]:.6g},{rate:.4f},{int(b[10])}")
    rows += ["[gen]", "# bus,p_min,p_max,q_min,q_max,cost,in_service"]
    for g, gc in zip(gen, cost):
        c1 = gc[4 + int(gc[3]) - 2]
        rows.append(
            f"{int(g[0])},{g[9] / base:.6g},{g[8] / base:.6g},{g[4] / base:.6g},{g[3] / base:.6g},"
            f"{c1 / COST_DIVISOR:.6g},{int(g[7] > 0)}"
        )
    rows += ["[load]", "# bus,p_demand,q_demand,shed_cost,in_service  (blank shed_cost: 100 x max gen cost)"]
    for b in bus:
        if b[2] > 0:
            rows.append(f"{int(b[0])},{LOAD_SCALE * b[2] / base:.6g},{LOAD_SCALE * b[3] / base:.6g},,1")
    with open(out, "w") as fh:
        fh.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
