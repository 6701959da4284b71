"""Cut-set saturation screening.

A cut-set is the set of in-service branches crossing a 2-partition of the
network. Its aggregate flow equals the net injection imbalance across the
partition, so no redispatch *routing* can relieve it; only shifting power
across the partition can. A cut is saturated when the aggregate flow exceeds
the aggregate thermal capacity of its members; the transfer margin is the
amount that must stop crossing (plus a safety buffer).

Outage sequences are analyzed cumulatively: stage 0 is the pre-outage
network, stage k the network with the first k scheduled trips applied. One
cut-set is reported per saturated partition, at the earliest stage where it
saturates (later stages of the same partition shed members, never gain them).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx

from .grid_model import Contingency, GridCase, InjectionState, apply_contingency
from .sensitivity import SensitivitySet, dc_power_flow

__all__ = [
    "FtConfig",
    "SaturatedCutset",
    "transfer_margin",
    "find_saturated_cutsets",
    "cutset_constraint",
]


@dataclass(frozen=True)
class FtConfig:
    safety_margin_mw: float = 0.0
    exact_below_buses: int = 12     # exhaustive partition enumeration under this size
    max_cut_size: int = 6           # member cap for the heuristic search
    seed_load_fraction: float = 0.9 # branches above this loading seed the search
    max_seeds: int = 12
    beam_width: int = 8
    grow_steps: int = 10
    tol_mw: float = 1e-9


@dataclass(frozen=True)
class SaturatedCutset:
    branch_ids: tuple[str, ...]          # members, most-loaded first
    orientations: tuple[float, ...]      # +1 when from_bus is on the exporting side
    side_a: frozenset[int]               # exporting side of the partition
    side_b: frozenset[int]
    aggregate_flow_mw: float             # net transfer A -> B (positive)
    aggregate_limit_mw: float
    margin_mw: float                     # flow - limit + safety
    stage: int                           # outage prefix length when detected
    stage_outages: tuple[str, ...]       # branches already out at that stage
    topology_key: str                    # sensitivity set this cut belongs to

    @property
    def utilization(self) -> float:
        return self.aggregate_flow_mw / self.aggregate_limit_mw


def transfer_margin(flows_mw, limits_mw, safety_margin_mw: float = 0.0) -> float:
    """Aggregate flow minus aggregate capacity plus safety buffer (MW)."""
    return float(sum(flows_mw) - sum(limits_mw) + safety_margin_mw)


def _cut_members(case_branches, side_a):
    """In-service branches crossing side_a, with +1 orientation A->B."""
    members = []
    for br in case_branches:
        fa, ta = br.from_bus in side_a, br.to_bus in side_a
        if fa != ta:
            members.append((br, 1.0 if fa else -1.0))
    return members


def _evaluate_partition(case, flows, side_a, island, safety):
    """(agg_flow, agg_limit, margin, members, orientations, exporting side).

    Aggregate flow is the net transfer out of the exporting side; member
    order is most-loaded first.
    """
    members = _cut_members(case.in_service_branches(), side_a)
    members = [(br, d) for br, d in members if br.id in flows]
    if not members:
        return None
    agg = sum(d * flows[br.id] for br, d in members)
    if agg >= 0:
        export_side = frozenset(side_a)
    else:
        export_side = frozenset(island) - frozenset(side_a)
        members = [(br, -d) for br, d in members]
        agg = -agg
    lim = sum(br.rating for br, _ in members)
    margin = transfer_margin([agg], [lim], safety)
    ordered = sorted(members, key=lambda t: (-abs(flows[t[0].id]), t[0].id))
    return (
        agg,
        lim,
        margin,
        tuple(br.id for br, _ in ordered),
        tuple(d for _, d in ordered),
        export_side,
    )


def _connected(graph: nx.Graph, nodes) -> bool:
    sub = graph.subgraph(nodes)
    return len(nodes) > 0 and nx.is_connected(sub)


def _exact_partitions(graph: nx.Graph, island: list[int]):
    """All 2-partitions of the island with both sides connected."""
    rest = island[1:]
    anchor = island[0]
    for r in range(0, len(rest)):
        for combo in itertools.combinations(rest, r):
            side_b = set(combo) | {anchor}
            side_a = set(island) - side_b
            if not side_a:
                continue
            if _connected(graph, side_a) and _connected(graph, side_b):
                yield frozenset(side_a)


def _heuristic_partitions(case, graph, island, flows, cfg: FtConfig):
    """Grow exporting regions from heavily loaded branches (beam search)."""
    loaded = []
    for br in case.in_service_branches():
        if br.id not in flows:
            continue
        rating = br.rating
        if rating == float("inf"):
            continue
        frac = abs(flows[br.id]) / rating
        if frac >= cfg.seed_load_fraction:
            loaded.append((frac, br))
    loaded.sort(key=lambda t: (-t[0], t[1].id))
    island_set = set(island)
    seen: set[frozenset] = set()
    out: list[frozenset] = []
    seeds = []
    for _, br in loaded[: cfg.max_seeds]:
        seeds.extend([br.from_bus, br.to_bus])
    slack = case.slack_bus
    branches = case.in_service_branches()

    def boundary_margin(side_a: frozenset) -> tuple[float, int]:
        members = _cut_members(branches, side_a)
        agg = abs(sum(d * flows[br.id] for br, d in members))
        lim = sum(br.rating for br, _ in members)
        return agg - lim, len(members)

    def consider(side: frozenset) -> tuple[float, int]:
        m, sz = boundary_margin(side)
        if side not in seen and m > cfg.tol_mw and sz <= cfg.max_cut_size:
            out.append(side)
        seen.add(side)
        return m, sz

    for seed in seeds:
        if seed == slack or seed not in island_set:
            continue
        start = frozenset([seed])
        consider(start)
        beam = [start]
        for _ in range(cfg.grow_steps):
            candidates = []
            for side in beam:
                neighbors = set()
                for b in side:
                    neighbors.update(graph.neighbors(b))
                neighbors -= side
                neighbors.discard(slack)
                for v in sorted(neighbors):
                    grown = side | {v}
                    if grown in seen or len(grown) >= len(island_set) - 1:
                        continue
                    gm, _ = consider(grown)
                    candidates.append((gm, sorted(grown), grown))
            if not candidates:
                break
            candidates.sort(key=lambda t: (-t[0], t[1]))
            beam = [c[2] for c in candidates[: cfg.beam_width]]
    return out


def _stage_cutsets(case, inj, stage, stage_outages, cfg: FtConfig):
    """Saturated cut-sets of one topology."""
    flow = dc_power_flow(case, inj)
    flows = flow.flow_mw
    graph = nx.Graph()
    island = [b for b in case.bus_ids() if b not in flow.islanded_buses]
    graph.add_nodes_from(island)
    for br in case.in_service_branches():
        if br.id in flows:
            graph.add_edge(br.from_bus, br.to_bus)
    if len(island) < 2:
        return []
    if len(island) < cfg.exact_below_buses:
        sides = list(_exact_partitions(graph, sorted(island)))
    else:
        sides = _heuristic_partitions(case, graph, island, flows, cfg)
    found = {}
    for side_a in sides:
        ev = _evaluate_partition(case, flows, side_a, island, cfg.safety_margin_mw)
        if ev is None:
            continue
        agg, lim, margin, members, dirs, export_side = ev
        if agg - lim <= cfg.tol_mw:      # saturation test is on raw flow vs capacity
            continue
        key = export_side
        cut = SaturatedCutset(
            branch_ids=members,
            orientations=dirs,
            side_a=export_side,
            side_b=frozenset(island) - export_side,
            aggregate_flow_mw=agg,
            aggregate_limit_mw=lim,
            margin_mw=margin,
            stage=stage,
            stage_outages=tuple(stage_outages),
            topology_key=case.topology_key(),
        )
        prev = found.get(key)
        if prev is None or cut.margin_mw > prev.margin_mw:
            found[key] = cut
    return list(found.values())


def find_saturated_cutsets(
    case: GridCase,
    contingency: Contingency | None,
    inj: InjectionState,
    config: FtConfig | None = None,
) -> list[SaturatedCutset]:
    """Screen the contingency's cumulative outage stages for saturated cuts.

    Returns one cut per saturated partition (earliest stage), ordered by
    descending margin, then members.
    """
    cfg = config or FtConfig()
    if contingency is None:
        contingency = Contingency(label="base", outages=())
    schedule = [b for _, b in contingency.trip_schedule()]
    by_partition: dict[frozenset, SaturatedCutset] = {}
    for k in range(0, len(schedule) + 1):
        staged = apply_contingency(case, schedule[:k]) if k else case
        for cut in _stage_cutsets(staged, inj, k, schedule[:k], cfg):
            key = frozenset(cut.side_a)
            if key not in by_partition:      # earliest stage wins
                by_partition[key] = cut
    cuts = sorted(
        by_partition.values(), key=lambda c: (-c.margin_mw, c.branch_ids)
    )
    return cuts


def cutset_constraint(cut: SaturatedCutset, sens: SensitivitySet) -> tuple[dict[int, float], float]:
    """Linear desaturation row, as (per-bus coefficient, rhs).

    Coefficients are oriented member-PTDF sums; generators at a bus enter the
    dispatch row with +coeff, loads with -coeff. RHS is the negated margin, so
    the row reads "net injection shift across the cut <= -margin". ``sens``
    must describe the stage topology the cut was found on. By flow
    superposition the coefficients on the two sides differ by 1 (exporting
    side higher), with the slack bus's side pinned at 0 — so the row is
    1/0 when the slack imports and 0/-1 when the slack exports; either form
    enforces the same transfer cut once paired with the power balance.
    """
    if sens.topology_key != cut.topology_key:
        raise ValueError("sensitivities do not match the cut's stage topology")
    coeff = {}
    for bid, direction in zip(cut.branch_ids, cut.orientations):
        row = sens.ptdf_row(bid)
        for j, bus in enumerate(sens.bus_ids):
            coeff[bus] = coeff.get(bus, 0.0) + direction * float(row[j])
    return coeff, -cut.margin_mw
