#!/usr/bin/env python3
"""Build data/ieee118.case from the public IEEE 118-bus test-system tables.

Embedded below: the bus voltage levels, the 186-branch topology with
per-unit reactances on the 100 MVA system base, the 54-unit generator
fleet with capability limits, and the 99 nonzero nominal bus loads
(4242 MW total).

The public tables carry no thermal ratings and no cost curves, so the
conversion applies a documented neutral layer: a flat 500 MW planning
rating on every branch and a single flat quadratic cost curve for every
unit.  Operating studies derive their own variants from this file (see
build_reference_data.py); this file stays a faithful structural
conversion and is regenerated, never hand-edited.

Run from the repository root:

    python3 scripts/make_case118.py
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from gridsentry import (
    Branch,
    Bus,
    Generator,
    GridCase,
    InjectionState,
    Load,
    apply_contingency,
    dc_power_flow,
    parse_case,
    serialize_case,
)

OUT_PATH = Path(__file__).resolve().parents[1] / "data" / "ieee118.case"

SLACK_BUS = 69
RATING_MW = 500.0       # planning rating for the 138 kV mesh
RATING_EHV_MW = 1000.0  # planning rating when both ends sit on the 345 kV overlay
RATING_XFMR_MW = 750.0  # planning rating for the 345/138 kV transformer banks
FLAT_COST = (0.0, 10.0, 0.01)  # a [$/h], b [$/MWh], c [$/MW^2 h]

# Buses on the 345 kV overlay; all others are 138 kV.
EHV_BUSES = {8, 9, 10, 26, 30, 38, 63, 64, 65, 68, 81}

# (from_bus, to_bus, x_pu) on the 100 MVA base, in the public row order.
# Parallel circuits repeat the bus pair and are suffixed "#2" below.
BRANCH_TABLE = [
    (1, 2, 0.0999), (1, 3, 0.0424), (4, 5, 0.00798), (3, 5, 0.108),
    (5, 6, 0.054), (6, 7, 0.0208), (8, 9, 0.0305), (8, 5, 0.0267),
    (9, 10, 0.0322), (4, 11, 0.0688), (5, 11, 0.0682), (11, 12, 0.0196),
    (2, 12, 0.0616), (3, 12, 0.16), (7, 12, 0.034), (11, 13, 0.0731),
    (12, 14, 0.0707), (13, 15, 0.2444), (14, 15, 0.195), (12, 16, 0.0834),
    (15, 17, 0.0437), (16, 17, 0.1801), (17, 18, 0.0505), (18, 19, 0.0493),
    (19, 20, 0.117), (15, 19, 0.0394), (20, 21, 0.0849), (21, 22, 0.097),
    (22, 23, 0.159), (23, 24, 0.0492), (23, 25, 0.08), (26, 25, 0.0382),
    (25, 27, 0.163), (27, 28, 0.0855), (28, 29, 0.0943), (30, 17, 0.0388),
    (8, 30, 0.0504), (26, 30, 0.086), (17, 31, 0.1563), (29, 31, 0.0331),
    (23, 32, 0.1153), (31, 32, 0.0985), (27, 32, 0.0755), (15, 33, 0.1244),
    (19, 34, 0.247), (35, 36, 0.0102), (35, 37, 0.0497), (33, 37, 0.142),
    (34, 36, 0.0268), (34, 37, 0.0094), (38, 37, 0.0375), (37, 39, 0.106),
    (37, 40, 0.168), (30, 38, 0.054), (39, 40, 0.0605), (40, 41, 0.0487),
    (40, 42, 0.183), (41, 42, 0.135), (43, 44, 0.2454), (34, 43, 0.1681),
    (44, 45, 0.0901), (45, 46, 0.1356), (46, 47, 0.127), (46, 48, 0.189),
    (47, 49, 0.0625), (42, 49, 0.323), (42, 49, 0.323), (45, 49, 0.186),
    (48, 49, 0.0505), (49, 50, 0.0752), (49, 51, 0.137), (51, 52, 0.0588),
    (52, 53, 0.1635), (53, 54, 0.122), (49, 54, 0.289), (49, 54, 0.291),
    (54, 55, 0.0707), (54, 56, 0.00955), (55, 56, 0.0151), (56, 57, 0.0966),
    (50, 57, 0.134), (56, 58, 0.0966), (51, 58, 0.0719), (54, 59, 0.2293),
    (56, 59, 0.251), (56, 59, 0.239), (55, 59, 0.2158), (59, 60, 0.145),
    (59, 61, 0.15), (60, 61, 0.0135), (60, 62, 0.0561), (61, 62, 0.0376),
    (63, 59, 0.0386), (63, 64, 0.02), (64, 61, 0.0268), (38, 65, 0.0986),
    (64, 65, 0.0302), (49, 66, 0.0919), (49, 66, 0.0919), (62, 66, 0.218),
    (62, 67, 0.117), (65, 66, 0.037), (66, 67, 0.1015), (65, 68, 0.016),
    (47, 69, 0.2778), (49, 69, 0.324), (68, 69, 0.037), (69, 70, 0.127),
    (24, 70, 0.4115), (70, 71, 0.0355), (24, 72, 0.196), (71, 72, 0.18),
    (71, 73, 0.0454), (70, 74, 0.1323), (70, 75, 0.141), (69, 75, 0.122),
    (74, 75, 0.0406), (76, 77, 0.148), (69, 77, 0.101), (75, 77, 0.1999),
    (77, 78, 0.0124), (78, 79, 0.0244), (77, 80, 0.0485), (77, 80, 0.105),
    (79, 80, 0.0704), (68, 81, 0.0202), (81, 80, 0.037), (77, 82, 0.0853),
    (82, 83, 0.03665), (83, 84, 0.132), (83, 85, 0.148), (84, 85, 0.0641),
    (85, 86, 0.123), (86, 87, 0.2074), (85, 88, 0.102), (85, 89, 0.173),
    (88, 89, 0.0712), (89, 90, 0.188), (89, 90, 0.0997), (90, 91, 0.0836),
    (89, 92, 0.0505), (89, 92, 0.1581), (91, 92, 0.1272), (92, 93, 0.0848),
    (92, 94, 0.158), (93, 94, 0.0732), (94, 95, 0.0434), (80, 96, 0.182),
    (82, 96, 0.053), (94, 96, 0.0869), (80, 97, 0.0934), (80, 98, 0.108),
    (80, 99, 0.206), (92, 100, 0.295), (94, 100, 0.058), (95, 96, 0.0547),
    (96, 97, 0.0885), (98, 100, 0.179), (99, 100, 0.0813), (100, 101, 0.1262),
    (92, 102, 0.0559), (101, 102, 0.112), (100, 103, 0.0525), (100, 104, 0.204),
    (103, 104, 0.1584), (103, 105, 0.1625), (100, 106, 0.229), (104, 105, 0.0378),
    (105, 106, 0.0547), (105, 107, 0.183), (105, 108, 0.0703), (106, 107, 0.183),
    (108, 109, 0.0288), (103, 110, 0.1813), (109, 110, 0.0762), (110, 111, 0.0755),
    (110, 112, 0.064), (17, 113, 0.0301), (32, 113, 0.203), (32, 114, 0.0612),
    (27, 115, 0.0741), (114, 115, 0.0104), (68, 116, 0.00405), (12, 117, 0.14),
    (75, 118, 0.0481), (76, 118, 0.0544),
]

# bus -> capability limit (MW); every unit's floor is 0 MW.
GEN_PMAX = {
    1: 100.0, 4: 100.0, 6: 100.0, 8: 100.0, 10: 550.0, 12: 185.0,
    15: 100.0, 18: 100.0, 19: 100.0, 24: 100.0, 25: 320.0, 26: 414.0,
    27: 100.0, 31: 107.0, 32: 100.0, 34: 100.0, 36: 100.0, 40: 100.0,
    42: 100.0, 46: 119.0, 49: 304.0, 54: 148.0, 55: 100.0, 56: 100.0,
    59: 255.0, 61: 260.0, 62: 100.0, 65: 491.0, 66: 492.0, 69: 805.2,
    70: 100.0, 72: 100.0, 73: 100.0, 74: 100.0, 76: 100.0, 77: 100.0,
    80: 577.0, 85: 100.0, 87: 104.0, 89: 707.0, 90: 100.0, 91: 100.0,
    92: 100.0, 99: 100.0, 100: 352.0, 103: 140.0, 104: 100.0, 105: 100.0,
    107: 100.0, 110: 100.0, 111: 136.0, 112: 100.0, 113: 100.0, 116: 100.0,
}

# bus -> nominal demand (MW); buses absent from this table carry no load.
LOAD_PD = {
    1: 51.0, 2: 20.0, 3: 39.0, 4: 39.0, 6: 52.0, 7: 19.0, 8: 28.0,
    11: 70.0, 12: 47.0, 13: 34.0, 14: 14.0, 15: 90.0, 16: 25.0,
    17: 11.0, 18: 60.0, 19: 45.0, 20: 18.0, 21: 14.0, 22: 10.0,
    23: 7.0, 24: 13.0, 27: 71.0, 28: 17.0, 29: 24.0, 31: 43.0,
    32: 59.0, 33: 23.0, 34: 59.0, 35: 33.0, 36: 31.0, 39: 27.0,
    40: 66.0, 41: 37.0, 42: 96.0, 43: 18.0, 44: 16.0, 45: 53.0,
    46: 28.0, 47: 34.0, 48: 20.0, 49: 87.0, 50: 17.0, 51: 17.0,
    52: 18.0, 53: 23.0, 54: 113.0, 55: 63.0, 56: 84.0, 57: 12.0,
    58: 12.0, 59: 277.0, 60: 78.0, 62: 77.0, 66: 39.0, 67: 28.0,
    70: 66.0, 72: 12.0, 73: 6.0, 74: 68.0, 75: 47.0, 76: 68.0,
    77: 61.0, 78: 71.0, 79: 39.0, 80: 130.0, 82: 54.0, 83: 20.0,
    84: 11.0, 85: 24.0, 86: 21.0, 88: 48.0, 90: 163.0, 91: 10.0,
    92: 65.0, 93: 12.0, 94: 30.0, 95: 42.0, 96: 38.0, 97: 15.0,
    98: 34.0, 99: 42.0, 100: 37.0, 101: 22.0, 102: 5.0, 103: 23.0,
    104: 38.0, 105: 31.0, 106: 43.0, 107: 50.0, 108: 2.0, 109: 8.0,
    110: 39.0, 112: 68.0, 113: 6.0, 114: 8.0, 115: 22.0, 116: 184.0,
    117: 20.0, 118: 33.0,
}


def branch_id(from_bus: int, to_bus: int, ordinal: int) -> str:
    base = f"{from_bus}-{to_bus}"
    return base if ordinal == 1 else f"{base}#{ordinal}"


def build_case() -> GridCase:
    buses = [Bus(id=b, base_kv=345.0 if b in EHV_BUSES else 138.0) for b in range(1, 119)]

    seen: dict[tuple[int, int], int] = {}
    branches = []
    for f, t, x in BRANCH_TABLE:
        seen[(f, t)] = seen.get((f, t), 0) + 1
        ehv_ends = (f in EHV_BUSES) + (t in EHV_BUSES)
        rating = (RATING_MW, RATING_XFMR_MW, RATING_EHV_MW)[ehv_ends]
        branches.append(
            Branch(id=branch_id(f, t, seen[(f, t)]), from_bus=f, to_bus=t,
                   x=x, limit_mw=rating)
        )

    a, b, c = FLAT_COST
    gens = [
        Generator(id=f"G{bus}", bus=bus, p_min=0.0, p_max=pmax,
                  cost_a=a, cost_b=b, cost_c=c)
        for bus, pmax in sorted(GEN_PMAX.items())
    ]
    loads = [
        Load(id=f"L{bus}", bus=bus, p_mw=pd)
        for bus, pd in sorted(LOAD_PD.items())
    ]
    return GridCase(
        name="ieee118",
        base_mva=100.0,
        slack_bus=SLACK_BUS,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(gens),
        loads=tuple(loads),
    )


def check(case: GridCase) -> None:
    assert len(case.buses) == 118, len(case.buses)
    assert len(case.branches) == 186, len(case.branches)
    assert len(case.generators) == 54, len(case.generators)
    assert len(case.loads) == 99, len(case.loads)
    total = sum(l.p_mw for l in case.loads)
    assert abs(total - 4242.0) < 1e-9, total
    parallel = [br.id for br in case.branches if "#" in br.id]
    assert len(parallel) == 7, parallel

    nominal = InjectionState.nominal(case)
    flow = dc_power_flow(case, nominal)
    assert not flow.islanded_buses, flow.islanded_buses

    # The studied fire corridor must not split the grid when both of its
    # lines are lost: buses 25 and 26 stay tied to the mesh through 25-27.
    reduced = apply_contingency(case, ["23-25", "26-30"])
    rflow = dc_power_flow(reduced, nominal)
    assert not rflow.islanded_buses, rflow.islanded_buses

    text = serialize_case(case)
    again = parse_case(text, name=case.name)
    assert again == case, "serialize/parse is not a fixed point"


def main() -> None:
    case = build_case()
    check(case)
    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    header = (
        "# IEEE 118-bus test system, structural conversion from the public tables.\n"
        "# 118 buses / 186 branches / 54 units / 99 loads (4242 MW nominal).\n"
        "# Ratings and costs are a documented neutral layer (500 MW at 138 kV,\n"
        "# 750 MW on 345/138 kV banks, 1000 MW on the 345 kV overlay, one\n"
        "# quadratic cost curve); operating studies derive their own variants.\n"
        "# Generated by scripts/make_case118.py -- regenerate, do not hand-edit.\n"
    )
    OUT_PATH.write_text(header + serialize_case(case))
    print(f"wrote {OUT_PATH} ({len(case.branches)} branches, "
          f"{sum(l.p_mw for l in case.loads):.0f} MW load)")


if __name__ == "__main__":
    main()
