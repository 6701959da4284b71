import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridsentry.cutset import (
    FtConfig,
    find_saturated_cutsets,
    transfer_margin,
    cutset_constraint,
)
from gridsentry.grid_model import (
    Branch,
    Bus,
    Contingency,
    Generator,
    GridCase,
    InjectionState,
    Load,
)
from gridsentry.sensitivity import compute_sensitivities, dc_power_flow, reduced_sensitivities


def test_transfer_margin_arithmetic():
    assert transfer_margin([100.0, 95.0], [80.0, 90.0], 5.0) == pytest.approx(30.0)
    assert transfer_margin([50.0], [80.0]) == pytest.approx(-30.0)


def test_flows_at_limits_are_not_saturated():
    # two parallel corridors feeding the slack; flows land exactly on limits
    case = GridCase(
        name="edge",
        base_mva=100.0,
        buses=(Bus(1), Bus(2)),
        branches=(Branch("1-2", 1, 2, 0.1, 60.0), Branch("1-2#2", 1, 2, 0.1, 60.0)),
        generators=(Generator("G1", 1, 0, 500),),
        loads=(Load("L2", 2, 120.0),),
        slack_bus=2,
    )
    inj = InjectionState(gen_p={"G1": 120.0}, load_p={"L2": 120.0})
    assert find_saturated_cutsets(case, None, inj) == []


def random_flow_case(seed: int, n_max: int = 8):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    m_target = int(rng.integers(n - 1, min(n * (n - 1) // 2, 2 * n) + 1))
    g = nx.gnm_random_graph(n, m_target, seed=seed)
    while not nx.is_connected(g):
        seed += 991
        g = nx.gnm_random_graph(n, m_target, seed=seed)
    branches = tuple(
        Branch(
            f"{u + 1}-{v + 1}",
            u + 1,
            v + 1,
            float(rng.uniform(0.05, 0.3)),
            float(rng.uniform(5, 60)),
        )
        for u, v in sorted(g.edges())
    )
    p = rng.uniform(-100, 100, n)
    p[0] -= p.sum()
    case = GridCase(
        name=f"r{seed}",
        base_mva=100.0,
        buses=tuple(Bus(i + 1) for i in range(n)),
        branches=branches,
        generators=tuple(Generator(f"G{i + 1}", i + 1, 0, 1000) for i in range(n)),
        loads=tuple(Load(f"L{i + 1}", i + 1, 0.0) for i in range(n)),
        slack_bus=1,
    )
    inj = InjectionState(
        gen_p={f"G{i + 1}": float(max(p[i], 0.0)) for i in range(n)},
        load_p={f"L{i + 1}": float(max(-p[i], 0.0)) for i in range(n)},
    )
    return case, inj


def brute_force_saturated(case, inj, safety=0.0):
    """Independent oracle: enumerate every connected 2-partition directly."""
    flows = dc_power_flow(case, inj).flow_mw
    g = nx.Graph()
    g.add_nodes_from(case.bus_ids())
    for br in case.in_service_branches():
        g.add_edge(br.from_bus, br.to_bus)
    nodes = sorted(case.bus_ids())
    found = {}
    for r in range(1, len(nodes)):
        for combo in itertools.combinations(nodes[1:], r):
            side = set(combo)
            other = set(nodes) - side
            if not nx.is_connected(g.subgraph(side)):
                continue
            if not nx.is_connected(g.subgraph(other)):
                continue
            agg = 0.0
            lim = 0.0
            for br in case.in_service_branches():
                fa, ta = br.from_bus in side, br.to_bus in side
                if fa != ta:
                    agg += (1.0 if fa else -1.0) * flows[br.id]
                    lim += br.rating
            agg = abs(agg)
            if agg - lim > 1e-9:
                export = frozenset(side) if agg >= 0 else frozenset(other)
                key = frozenset(side)
                # normalize on the exporting side for comparison
                found[key] = (agg, lim, agg - lim + safety)
    return found


@pytest.mark.parametrize("seed", range(12))
def test_finder_matches_bruteforce_enumeration(seed):
    case, inj = random_flow_case(seed)
    oracle = brute_force_saturated(case, inj)
    mine = find_saturated_cutsets(case, None, inj, FtConfig(exact_below_buses=12))
    got = {}
    for cut in mine:
        # compare on the partition regardless of which side exported
        key = cut.side_a if 1 not in cut.side_a else cut.side_b
        got[frozenset(key)] = (cut.aggregate_flow_mw, cut.aggregate_limit_mw, cut.margin_mw)
    assert set(got) == set(oracle)
    for key, (agg, lim, margin) in oracle.items():
        assert got[key][0] == pytest.approx(agg, abs=1e-9)
        assert got[key][1] == pytest.approx(lim, abs=1e-9)
        assert got[key][2] == pytest.approx(margin, abs=1e-9)


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_aggregate_flow_equals_partition_imbalance(seed):
    # redirection invariance: the net cut flow is exactly the net injection
    # of the exporting side, however the network routes it
    case, inj = random_flow_case(seed)
    flows = dc_power_flow(case, inj).flow_mw
    by_bus = inj.bus_injection_mw(case)
    rng = np.random.default_rng(seed)
    nodes = sorted(case.bus_ids())
    side = set(
        rng.choice(nodes, size=rng.integers(1, len(nodes)), replace=False).tolist()
    )
    agg = 0.0
    for br in case.in_service_branches():
        fa, ta = br.from_bus in side, br.to_bus in side
        if fa != ta:
            agg += (1.0 if fa else -1.0) * flows[br.id]
    assert agg == pytest.approx(sum(by_bus[b] for b in side), abs=1e-7)


def corridor_case():
    """Two-generator pocket exporting over three lines; mirrors the
    fire-corridor geometry: pocket buses 1 (gen A) and 2 (gen B), boundary
    lines a: 1-3 (first trip), b: 1-4, c: 2-5, meshed remainder 3-4-5-6."""
    branches = (
        Branch("1-3", 1, 3, 0.10, 200.0),
        Branch("1-4", 1, 4, 0.12, 120.0),
        Branch("2-5", 2, 5, 0.08, 90.0),
        Branch("1-2", 1, 2, 0.05, 500.0),
        Branch("3-4", 3, 4, 0.10, 400.0),
        Branch("4-5", 4, 5, 0.10, 400.0),
        Branch("5-6", 5, 6, 0.10, 400.0),
        Branch("3-6", 3, 6, 0.10, 400.0),
    )
    case = GridCase(
        name="corridor",
        base_mva=100.0,
        buses=tuple(Bus(i) for i in range(1, 7)),
        branches=branches,
        generators=(Generator("GA", 1, 0, 300), Generator("GB", 2, 0, 300)),
        loads=(Load("L6", 6, 300.0),),
        slack_bus=6,
    )
    inj = InjectionState(gen_p={"GA": 160.0, "GB": 140.0}, load_p={"L6": 300.0})
    return case, inj


def test_staged_outages_report_earliest_saturated_stage():
    case, inj = corridor_case()
    # pre-outage: boundary {1-3,1-4,2-5} capacity 410 >= 300 export, clean.
    assert find_saturated_cutsets(case, None, inj) == []
    # after 1-3 trips the remaining pair carries all 300 MW against 210.
    cont = Contingency(label="fire", outages=("1-3", "2-5"))
    cuts = find_saturated_cutsets(case, cont, inj)
    pocket = [c for c in cuts if c.side_a == frozenset({1, 2})]
    assert len(pocket) == 1  # one report per partition, no nested duplicates
    cut = pocket[0]
    assert cut.stage == 1
    assert set(cut.branch_ids) == {"1-4", "2-5"}
    assert cut.aggregate_flow_mw == pytest.approx(300.0, abs=1e-9)
    assert cut.margin_mw == pytest.approx(300.0 - 210.0, abs=1e-9)
    # the stage-2 cut {1-4} of the same pocket is a subset and is not
    # reported alongside
    assert not any(set(c.branch_ids) == {"1-4"} and c.side_a == cut.side_a for c in cuts)


def test_safety_margin_added_to_reported_margin():
    case, inj = corridor_case()
    cont = Contingency(label="fire", outages=("1-3",))
    cuts = find_saturated_cutsets(case, cont, inj, FtConfig(safety_margin_mw=25.0))
    cut = [c for c in cuts if c.side_a == frozenset({1, 2})][0]
    assert cut.margin_mw == pytest.approx(90.0 + 25.0)


def test_cutset_constraint_is_partition_indicator():
    case, inj = corridor_case()
    cont = Contingency(label="fire", outages=("1-3",))
    cut = find_saturated_cutsets(case, cont, inj)[0]
    sens = reduced_sensitivities(case, ["1-3"])
    coeff, rhs = cutset_constraint(cut, sens)
    assert rhs == pytest.approx(-cut.margin_mw)
    for bus in case.bus_ids():
        if bus == case.slack_bus:
            continue
        want = 1.0 if bus in cut.side_a else 0.0
        assert coeff[bus] == pytest.approx(want, abs=1e-9)


def test_cutset_constraint_rejects_wrong_topology():
    case, inj = corridor_case()
    cont = Contingency(label="fire", outages=("1-3",))
    cut = find_saturated_cutsets(case, cont, inj)[0]
    with pytest.raises(ValueError, match="stage topology"):
        cutset_constraint(cut, compute_sensitivities(case))


def test_members_ordered_most_loaded_first():
    from gridsentry.grid_model import apply_contingency

    case, inj = corridor_case()
    cont = Contingency(label="fire", outages=("1-3",))
    cut = find_saturated_cutsets(case, cont, inj)[0]
    flows = dc_power_flow(apply_contingency(case, ["1-3"]), inj).flow_mw
    loads = [abs(flows[b]) for b in cut.branch_ids]
    assert loads == sorted(loads, reverse=True)


def test_unlimited_members_never_saturate():
    case, inj = corridor_case()
    branches = tuple(
        Branch(b.id, b.from_bus, b.to_bus, b.x, 0.0) for b in case.branches
    )
    from dataclasses import replace

    unlimited = replace(case, branches=branches)
    cont = Contingency(label="fire", outages=("1-3", "2-5"))
    assert find_saturated_cutsets(unlimited, cont, inj) == []
