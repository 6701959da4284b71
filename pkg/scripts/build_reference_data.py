#!/usr/bin/env python3
"""Build the fire-season reference scenario from data/ieee118.case.

The scenario places the 118-bus system in late fire season.  A two-unit
generation pocket at buses 25/26 exports across a corridor of hillside
lines (23-25 and 26-30) into two stressed northwest load pockets, while
seasonal deratings shrink the corridor and the parallel import paths.
The studied event is a staged fire contingency: arcing faults visit the
two corridor lines repeatedly and end with both lines tripped.

Derivation from the structural conversion, in order:

* fleet      -- keep the 19 dispatchable thermal units and park four
                fast-start units as commitment candidates; every other
                machine record (small condenser-class units) is dropped.
* costs      -- merit-order energy prices on the dispatchable fleet;
                candidates price high and carry an idle (commitment) cost.
* ratings    -- seasonal deratings on the corridor and import paths.
* demand     -- seasonal stress: 1.45x in the two northwest pockets,
                1.2x everywhere else.
* dynamics   -- the pocket units are light machines (H = 2.5 s); the
                rest of the fleet carries H = 5.0 s.
* loading    -- the reference operating point pins the pocket at full
                export and settles the rest of the fleet by a plain
                security-constrained redispatch from a proportional start.

Artifacts (regenerated, never hand-edited):

    data/ieee118_fire.case           the operating case
    data/reference/contingency.json  the staged fire contingency
    data/reference/loading.json      the reference operating point
    data/reference/load_history.csv  one day of 5-minute load telemetry
    data/reference/scenario.json     file index + measured scenario facts

After writing, the script re-reads every artifact from disk and replays
the whole planning loop on them -- saturation screen, swing study,
commitment, corrective dispatch, preventive risk sweep -- asserting the
scenario's headline behavior, so a green run certifies the shipped
files end to end (takes roughly half a minute).

Run from the repository root:

    python3 scripts/build_reference_data.py
"""
from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from gridsentry import (
    ArcFault,
    ConstraintLedger,
    ConstraintRow,
    Contingency,
    GridCase,
    InjectionState,
    RiskVector,
    apply_contingency,
    build_cscopf,
    build_cscuc,
    compute_sensitivities,
    cutset_constraint,
    cycles_to_clear,
    dc_power_flow,
    find_saturated_cutsets,
    load_case,
    load_contingency,
    load_injections,
    n1_overload_rows,
    parse_case,
    reduced_sensitivities,
    run_tds,
    save_contingency,
    save_injections,
    serialize_case,
    solve_dispatch,
    stability_constraint,
    transient_correction,
)

ROOT = Path(__file__).resolve().parents[1]
BASE_CASE = ROOT / "data" / "ieee118.case"
OUT_CASE = ROOT / "data" / "ieee118_fire.case"
REF_DIR = ROOT / "data" / "reference"

# --- fleet -----------------------------------------------------------------
# Merit-order energy prices [$/MWh] for the dispatchable thermal fleet; a
# machine record absent from both tables below is dropped from the scenario.
ENERGY_PRICE = {
    "G25": 7.0, "G26": 7.2, "G10": 8.0, "G89": 8.2, "G69": 8.5, "G80": 8.8,
    "G65": 9.0, "G66": 9.2, "G100": 9.6, "G59": 10.2, "G61": 10.4,
    "G49": 10.8, "G12": 11.5, "G103": 12.0, "G111": 12.5, "G54": 13.0,
    "G46": 13.5, "G87": 14.0, "G31": 14.5,
}

# Fast-start units held offline as commitment candidates: idle (commitment)
# cost [$/h] per unit; all price energy at QUICKSTART_ENERGY_PRICE.
QUICKSTART_IDLE_COST = {"G6": 80.0, "G72": 150.0, "G90": 120.0, "G116": 110.0}
QUICKSTART_ENERGY_PRICE = 24.0

# Quadratic price terms [$/MW^2 h]: the pocket exporters bid nearly flat,
# large units (>= 300 MW) stay shallow, everything else curves up faster.
QUAD_POCKET, QUAD_LARGE, QUAD_SMALL = 0.004, 0.008, 0.012
LARGE_UNIT_MW = 300.0

# Export capability of the pocket units behind the corridor.
POCKET_CAP = {"G25": 260.0, "G26": 367.0}

# Pocket units are light fast machines; the rest of the fleet is heavy.
POCKET_INERTIA_S, FLEET_INERTIA_S = 2.5, 5.0

# --- fire-season network deratings [MW] --------------------------------------
SEASONAL_RATING = {
    "25-27": 185.0,   # corridor leg kept in service through the burn area
    "26-30": 280.0,   # corridor leg lost in the studied contingency
    "8-5": 350.0,     # import path into the northern 345/138 kV bank
    "30-17": 350.0,   # import path out of the 345 kV overlay
}

# --- seasonal demand ---------------------------------------------------------
NW_WEST = {20, 21, 22, 23, 24, 27, 28, 29, 31, 32, 113, 114, 115}
NW_NORTH = {15, 16, 17, 18, 19, 33, 34, 35}
NW_STRESS = 1.45      # the two pockets the corridor serves
SYSTEM_STRESS = 1.2   # seasonal load growth everywhere else

# --- the staged fire contingency ---------------------------------------------
CORRIDOR = ("23-25", "26-30")
ARC_SEQUENCE = (
    ArcFault("23-25", 0.10, 0.20),
    ArcFault("23-25", 0.70, 0.80),
    ArcFault("23-25", 1.30, 1.40, trips=True),
    ArcFault("26-30", 1.90, 2.00),
    ArcFault("26-30", 2.50, 2.60, trips=True),
)

# --- load-history telemetry ----------------------------------------------
HISTORY_STEP_MIN = 5          # one day of 5-minute samples (288 rows)
HISTORY_SEED = 118            # jitter stream seed
HISTORY_SIGMA = 0.05          # lognormal measurement jitter
HISTORY_PEAK_MIN = 990        # daily peak at 16:30
HISTORY_TROUGH_FRAC = 0.70    # overnight trough as a fraction of the peak

# Preventive risk sweep replayed in certification and recorded for demos.
SWEEP_LAMBDAS = (0.1, 5.0, 7.0)


def build_operating_case(base: GridCase) -> GridCase:
    """Apply the fire-season derivation to the structural conversion."""
    gens = []
    for g in base.generators:
        if g.id in ENERGY_PRICE:
            quad = QUAD_POCKET if g.id in POCKET_CAP else (
                QUAD_LARGE if g.p_max >= LARGE_UNIT_MW else QUAD_SMALL)
            g = replace(g, cost_a=0.0, cost_b=ENERGY_PRICE[g.id], cost_c=quad)
        elif g.id in QUICKSTART_IDLE_COST:
            g = replace(g, active=False, cost_a=QUICKSTART_IDLE_COST[g.id],
                        cost_b=QUICKSTART_ENERGY_PRICE, cost_c=QUAD_SMALL)
        else:
            continue
        if g.id in POCKET_CAP:
            g = replace(g, p_max=POCKET_CAP[g.id])
        g = replace(g, h_s=POCKET_INERTIA_S if g.id in POCKET_CAP else FLEET_INERTIA_S)
        gens.append(g)

    branches = tuple(
        replace(br, limit_mw=SEASONAL_RATING.get(br.id, br.limit_mw))
        for br in base.branches
    )
    loads = tuple(
        replace(l, p_mw=round(l.p_mw * (NW_STRESS if l.bus in NW_WEST | NW_NORTH
                                        else SYSTEM_STRESS), 1))
        for l in base.loads
    )
    return replace(base, name="ieee118_fire", branches=branches,
                   generators=tuple(gens), loads=loads)


def make_contingency() -> Contingency:
    return Contingency(label="fire-corridor", outages=CORRIDOR,
                       arc_faults=ARC_SEQUENCE)


def reference_loading(fire: GridCase) -> InjectionState:
    """Settle the reference operating point.

    The pocket units are pinned at full export and the rest of the fleet
    is settled by a plain (no ledger, no risk) security-constrained
    redispatch on the intact network, starting from a dispatch that
    loads every active unit in proportion to its capability.
    """
    pinned = fire
    for gid, cap in POCKET_CAP.items():
        pinned = pinned.with_generator_limits(gid, p_min=cap)
    total = sum(l.p_mw for l in pinned.loads)
    active = pinned.active_generators()
    capability = sum(g.p_max for g in active)
    start = InjectionState.nominal(
        pinned, dispatch={g.id: total * g.p_max / capability for g in active})
    sens = compute_sensitivities(pinned)
    sol = solve_dispatch(
        build_cscopf(pinned, start, ConstraintLedger(), RiskVector(), {},
                     sens, sens, hard=True),
        pinned, start)
    assert sol.status == "optimal", sol.status
    assert abs(sum(sol.dl.values())) < 1e-6, sol.dl
    # zero shed by assertion: keep loads exactly nominal, drop solver dust
    return start.shifted(sol.dp)


def write_load_history(fire: GridCase, path: Path) -> int:
    """One day of 5-minute bus-load telemetry around the reference point.

    The reference loading is the day's planning peak: the daily profile
    crests at 1.0 in the late afternoon, bottoms out overnight, and every
    sample carries lognormal measurement jitter.
    """
    rng = np.random.default_rng(HISTORY_SEED)
    rows = 24 * 60 // HISTORY_STEP_MIN
    mean = (1.0 + HISTORY_TROUGH_FRAC) / 2.0
    swing = (1.0 - HISTORY_TROUGH_FRAC) / 2.0
    lines = ["minute," + ",".join(l.id for l in fire.loads)]
    for k in range(rows):
        minute = k * HISTORY_STEP_MIN
        profile = mean - swing * math.cos(
            2.0 * math.pi * (minute - HISTORY_PEAK_MIN) / 1440.0 + math.pi)
        jitter = rng.lognormal(0.0, HISTORY_SIGMA, size=len(fire.loads))
        samples = (round(l.p_mw * profile * j, 1) for l, j in zip(fire.loads, jitter))
        lines.append(f"{minute}," + ",".join(f"{s:.1f}" for s in samples))
    path.write_text("\n".join(lines) + "\n")
    return rows


def certify(fire: GridCase, base: InjectionState, xi: Contingency) -> dict:
    """Replay the planning loop on the shipped artifacts.

    Asserts the scenario's headline behavior and returns the measured
    facts recorded in scenario.json.
    """
    sens = compute_sensitivities(fire)
    sens_red = reduced_sensitivities(fire, list(xi.outages))

    # Intact operating point: balanced, secure, pocket at full export.
    assert abs(base.total_gen_mw() - base.total_load_mw()) < 1e-6
    flow = dc_power_flow(fire, base)
    assert not flow.overloads(fire), flow.overloads(fire)
    export = base.gen_p["G25"] + base.gen_p["G26"]
    assert abs(export - sum(POCKET_CAP.values())) < 0.5, export
    print(f"  intact point: zero shed, pocket export {export:.1f} MW")

    # Saturation screen: exactly one first-stage cut across the corridor.
    cuts = find_saturated_cutsets(fire, xi, base)
    assert len(cuts) == 1, [sorted(c.branch_ids) for c in cuts]
    cut = cuts[0]
    assert sorted(cut.branch_ids) == ["25-27", "26-30"], cut.branch_ids
    assert cut.stage == 1, cut.stage
    assert abs(cut.margin_mw - 162.0) < 0.5, cut.margin_mw
    print(f"  saturation screen: cut {sorted(cut.branch_ids)}, "
          f"margin {cut.margin_mw:.1f} MW")

    # n-1 screen monitors the corridor under single-line losses.
    n1_rows = n1_overload_rows(fire, base, sens)
    monitored = {r.label.split(":", 1)[1].split("|", 1)[0] for r in n1_rows}
    assert {"25-27", "26-30"} <= monitored, monitored

    # Swing study: the staged fire pulls the pocket out of step.
    swing = run_tds(fire, base, xi)
    assert not swing.stable and swing.tsi < 0, swing.tsi
    assert set(swing.cm) == {"G25", "G26"}, swing.cm
    dp_tr, _, _ = transient_correction(fire, base, xi)
    assert 59.0 <= dp_tr <= 177.0, dp_tr
    print(f"  swing study: unstable (tsi {swing.tsi:.1f}), "
          f"stabilizing shift {dp_tr:.1f} MW")

    # Constraint ledger feeding the dispatch stages.
    rows = list(n1_rows)
    for c in cuts:
        coeff, rhs = cutset_constraint(
            c, reduced_sensitivities(fire, list(c.stage_outages)))
        rows.append(ConstraintRow(kind="cutset",
                                  label=f"cut:{'+'.join(sorted(c.branch_ids))}",
                                  rhs=rhs, bus_coeff=coeff))
    gen_coeff, gen_rhs = stability_constraint(swing.cm, dp_tr)
    rows.append(ConstraintRow(kind="stability", label=f"tr:{xi.label}",
                              rhs=gen_rhs, gen_coeff=gen_coeff))
    ledger = ConstraintLedger(rows)

    # Without the fast-start fleet the post-contingency grid sheds load.
    sol_alone = solve_dispatch(
        build_cscopf(fire, base, ledger, RiskVector(), {}, sens, sens_red,
                     hard=True),
        fire, base)
    assert sol_alone.status == "optimal", sol_alone.status
    shed_alone = -sum(sol_alone.dl.values())
    assert shed_alone > 50.0, shed_alone
    shed_by_load = {k: round(-v, 1) for k, v in sorted(sol_alone.dl.items())
                    if v < -1e-6}
    print(f"  no-commitment dispatch: sheds {shed_alone:.1f} MW")

    # Day-ahead commitment: exactly the bus-6 fast-start unit comes online.
    t0 = time.perf_counter()
    sol_uc = solve_dispatch(build_cscuc(fire, base, ledger, sens, sens_red),
                            fire, base)
    t_uc = time.perf_counter() - t0
    assert sol_uc.status == "optimal", sol_uc.status
    assert sol_uc.u == {"G6": 1, "G72": 0, "G90": 0, "G116": 0}, sol_uc.u
    assert abs(sum(sol_uc.dl.values())) < 1e-3, sol_uc.dl
    assert t_uc < 5.0, t_uc
    commitment = dict(sol_uc.u)
    print(f"  commitment: G6 online, zero shed, {t_uc:.2f} s")

    # Real-time corrective dispatch under the commitment.
    t0 = time.perf_counter()
    sol_rt = solve_dispatch(
        build_cscopf(fire, base, ledger, RiskVector(), commitment, sens,
                     sens_red, hard=True),
        fire, base)
    t_rt = time.perf_counter() - t0
    assert sol_rt.status == "optimal", sol_rt.status
    assert abs(sum(sol_rt.dl.values())) < 1e-3, sol_rt.dl
    assert sol_rt.kkt_residual <= 1e-6, sol_rt.kkt_residual
    assert t_rt < 1.0, t_rt
    corrected = base.shifted(sol_rt.dp, sol_rt.dl)

    # The corrected point rides the contingency out: no post-outage
    # overloads and a stable swing.
    fire_on = replace(fire, generators=tuple(
        replace(g, active=True) if commitment.get(g.id) else g
        for g in fire.generators))
    reduced = apply_contingency(fire_on, list(xi.outages))
    post_flow = dc_power_flow(reduced, corrected)
    assert not post_flow.overloads(fire_on), post_flow.overloads(fire_on)
    swing_fixed = run_tds(fire_on, corrected, xi)
    assert swing_fixed.stable and swing_fixed.tsi > 0, swing_fixed.tsi
    print(f"  corrected point: zero shed in {t_rt:.2f} s, rides through "
          f"(tsi {swing_fixed.tsi:.1f})")

    # Preventive risk sweep: raising the common risk weight monotonically
    # desaturates the corridor and sheds pocket output, never load.
    sweep = []
    for lam in SWEEP_LAMBDAS:
        sol = solve_dispatch(
            build_cscopf(fire, base, ledger, RiskVector.coupled(lam),
                         commitment, sens, sens_red),
            fire, base)
        assert sol.status == "optimal", (lam, sol.status)
        assert abs(sum(sol.dl.values())) < 1e-3, (lam, sol.dl)
        after = base.shifted(sol.dp, sol.dl)
        relief = export - (after.gen_p["G25"] + after.gen_p["G26"])
        sweep.append({
            "lam": lam,
            "desaturation_pct": round(relief / cut.margin_mw * 100.0, 1),
            "cm_shift_pct": round(
                -(sol.dp.get("G25", 0.0) + sol.dp.get("G26", 0.0))
                / dp_tr * 100.0, 1),
            "cycles_left": cycles_to_clear(fire, swing.cm,
                                           max(0.0, cut.margin_mw - relief)),
        })
    for a, b in zip(sweep, sweep[1:]):
        assert b["desaturation_pct"] >= a["desaturation_pct"] - 1e-9
        assert b["cm_shift_pct"] >= a["cm_shift_pct"] - 1e-9
        assert b["cycles_left"] <= a["cycles_left"]
    print("  risk sweep: " + "  ".join(
        f"lam={s['lam']}: {s['desaturation_pct']}% desat, "
        f"{s['cycles_left']} cycles left" for s in sweep))

    # Committing ahead beats paying for shed in real time.
    sol_two = solve_dispatch(
        build_cscopf(fire, base, ledger, RiskVector(), commitment, sens,
                     sens_red, hard=True),
        fire, base)
    assert sol_two.status == "optimal", sol_two.status
    assert sol_two.cost <= sol_alone.cost + 1e-6, (sol_two.cost, sol_alone.cost)
    print(f"  two-stage cost {sol_two.cost:.2f} vs standalone "
          f"{sol_alone.cost:.2f}")

    return {
        "pocket_export_mw": round(export, 1),
        "cutset": {
            "branch_ids": sorted(cut.branch_ids),
            "stage": cut.stage,
            "margin_mw": round(cut.margin_mw, 1),
        },
        "n1_monitored": sorted(monitored),
        "critical_machines": sorted(swing.cm),
        "tsi_uncorrected": round(swing.tsi, 1),
        "tsi_corrected": round(swing_fixed.tsi, 1),
        "stabilizing_shift_mw": round(dp_tr, 1),
        "commitment": commitment,
        "commitment_objective": round(sol_uc.objective, 2),
        "commitment_solve_s": round(t_uc, 2),
        "corrective_solve_s": round(t_rt, 2),
        "no_commitment_shed_mw": round(shed_alone, 1),
        "no_commitment_shed_by_load": shed_by_load,
        "standalone_cost": round(sol_alone.cost, 2),
        "two_stage_cost": round(sol_two.cost, 2),
        "risk_sweep": sweep,
    }


def main() -> None:
    base = load_case(BASE_CASE)
    fire = build_operating_case(base)
    assert len(fire.generators) == 23, len(fire.generators)
    assert len(fire.active_generators()) == 19
    text = serialize_case(fire)
    assert parse_case(text, name=fire.name) == fire, "serialize/parse drift"

    REF_DIR.mkdir(parents=True, exist_ok=True)
    header = (
        "# Fire-season operating case derived from ieee118.case:\n"
        "# 19-unit dispatchable fleet + 4 fast-start commitment candidates,\n"
        "# merit-order prices, seasonal line deratings and demand stress,\n"
        "# light pocket machines at buses 25/26 exporting over the corridor.\n"
        "# Generated by scripts/build_reference_data.py -- regenerate, do\n"
        "# not hand-edit.\n"
    )
    OUT_CASE.write_text(header + text)
    print(f"wrote {OUT_CASE}")

    xi = make_contingency()
    save_contingency(xi, REF_DIR / "contingency.json")
    print(f"wrote {REF_DIR / 'contingency.json'}")

    loading = reference_loading(fire)
    save_injections(loading, REF_DIR / "loading.json")
    print(f"wrote {REF_DIR / 'loading.json'}")

    rows = write_load_history(fire, REF_DIR / "load_history.csv")
    print(f"wrote {REF_DIR / 'load_history.csv'} ({rows} rows)")

    # Certify the artifacts exactly as shipped: re-read them from disk and
    # replay the planning loop on what a consumer will see.
    fire_disk = load_case(OUT_CASE)
    assert fire_disk == fire, "case artifact does not round-trip"
    loading_disk = load_injections(REF_DIR / "loading.json")
    xi_disk = load_contingency(REF_DIR / "contingency.json")
    print("certifying shipped artifacts ...")
    measured = certify(fire_disk, loading_disk, xi_disk)

    scenario = {
        "name": "ieee118-fire-reference",
        "title": "Fire-season reference scenario on the 118-bus system",
        "narrative": (
            "A two-unit generation pocket at buses 25/26 exports across a "
            "fire-threatened corridor (23-25, 26-30) into stressed northwest "
            "load pockets. A staged arcing sequence trips both corridor "
            "lines; committing the bus-6 fast-start unit ahead of time lets "
            "the system ride the event out with zero load shed."
        ),
        "files": {
            "case": "../ieee118_fire.case",
            "contingency": "contingency.json",
            "loading": "loading.json",
            "load_history": "load_history.csv",
        },
        "load_history": {
            "rows": rows,
            "step_minutes": HISTORY_STEP_MIN,
            "seed": HISTORY_SEED,
            "jitter_sigma": HISTORY_SIGMA,
            "peak_minute": HISTORY_PEAK_MIN,
            "trough_fraction": HISTORY_TROUGH_FRAC,
        },
        "risk_sweep_lambdas": list(SWEEP_LAMBDAS),
        "measured": measured,
    }
    with open(REF_DIR / "scenario.json", "w") as fh:
        json.dump(scenario, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {REF_DIR / 'scenario.json'}")
    print("reference scenario certified")


if __name__ == "__main__":
    main()
