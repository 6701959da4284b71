"""DC power flow and linear sensitivities (PTDF, LODF) with a topology cache.

Sign convention: branch flow is positive from ``from_bus`` to ``to_bus``.
PTDF columns are injection-at-bus, withdrawal-at-slack. Branches whose outage
islands the network (bridges) carry no valid LODF column; those columns are
NaN and the ids are listed in ``bridges``.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .grid_model import Contingency, GridCase, InjectionState, apply_contingency

__all__ = [
    "DcFlowResult",
    "SensitivitySet",
    "dc_power_flow",
    "compute_sensitivities",
    "reduced_sensitivities",
    "clear_cache",
]


@dataclass(frozen=True)
class DcFlowResult:
    theta_rad: dict[int, float]          # bus angle, slack at 0; islanded buses absent
    flow_mw: dict[str, float]            # per in-service branch on the slack island
    slack_mw: float                      # net injection the slack picked up
    islanded_buses: frozenset[int]       # buses outside the slack island

    def overloads(
        self, case: GridCase, frac: float = 1.0, tol_mw: float = 1e-6
    ) -> list[tuple[str, float, float]]:
        """Branches with |flow| > frac*rating + tol_mw: (id, flow, rating).

        ``tol_mw`` keeps flows a dispatch deliberately holds at the rating
        from being flagged over solver round-off.
        """
        out = []
        for br in case.in_service_branches():
            f = self.flow_mw.get(br.id)
            if f is not None and abs(f) > frac * br.rating + tol_mw:
                out.append((br.id, f, br.rating))
        return out


@dataclass(frozen=True)
class SensitivitySet:
    """PTDF/LODF of one topology (the slack island of a case)."""

    topology_key: str
    bus_ids: tuple[int, ...]             # column order
    branch_ids: tuple[str, ...]          # row order, in-service on the island
    ptdf: np.ndarray                     # (m, n)
    lodf: np.ndarray                     # (m, m); NaN columns for bridges
    bridges: frozenset[str]
    islanded_buses: frozenset[int]

    def bus_index(self, bus: int) -> int:
        return self._bus_pos[bus]

    def branch_index(self, branch_id: str) -> int:
        return self._br_pos[branch_id]

    def __post_init__(self):
        object.__setattr__(self, "_bus_pos", {b: i for i, b in enumerate(self.bus_ids)})
        object.__setattr__(self, "_br_pos", {b: i for i, b in enumerate(self.branch_ids)})

    def ptdf_row(self, branch_id: str) -> np.ndarray:
        return self.ptdf[self.branch_index(branch_id)]

    def flows_from_injections(self, case: GridCase, inj: InjectionState) -> dict[str, float]:
        """Superposition: flows = PTDF @ injections (slack absorbs imbalance)."""
        p = np.zeros(len(self.bus_ids))
        for bus, mw in inj.bus_injection_mw(case).items():
            if bus in self._bus_pos:
                p[self._bus_pos[bus]] = mw
        f = self.ptdf @ p
        return {bid: float(f[i]) for i, bid in enumerate(self.branch_ids)}


def _island_subcase(case: GridCase):
    """Buses/branches on the slack island, in case order."""
    islands = case.islands()
    keep = islands[0]
    buses = [b.id for b in case.buses if b.id in keep]
    branches = [
        br
        for br in case.in_service_branches()
        if br.from_bus in keep and br.to_bus in keep
    ]
    dead = frozenset(b.id for b in case.buses) - frozenset(buses)
    return buses, branches, dead


def dc_power_flow(case: GridCase, inj: InjectionState) -> DcFlowResult:
    """Lossless DC flow on the slack island. B theta = P, slack angle 0."""
    buses, branches, dead = _island_subcase(case)
    n = len(buses)
    pos = {b: i for i, b in enumerate(buses)}
    b_mat = np.zeros((n, n))
    for br in branches:
        i, j = pos[br.from_bus], pos[br.to_bus]
        y = 1.0 / br.x
        b_mat[i, i] += y
        b_mat[j, j] += y
        b_mat[i, j] -= y
        b_mat[j, i] -= y
    inj_mw = inj.bus_injection_mw(case)
    p = np.array([inj_mw[b] for b in buses]) / case.base_mva
    s = pos[case.slack_bus]
    keep_idx = [i for i in range(n) if i != s]
    theta = np.zeros(n)
    if keep_idx:
        theta[keep_idx] = np.linalg.solve(
            b_mat[np.ix_(keep_idx, keep_idx)], p[keep_idx]
        )
    flows = {}
    for br in branches:
        flows[br.id] = (
            (theta[pos[br.from_bus]] - theta[pos[br.to_bus]]) / br.x * case.base_mva
        )
    # the slack's scheduled injection is overridden by whatever balances the island
    slack_mw = -float(sum(inj_mw[b] for b in buses if b != case.slack_bus))
    return DcFlowResult(
        theta_rad={b: float(theta[pos[b]]) for b in buses},
        flow_mw=flows,
        slack_mw=slack_mw,
        islanded_buses=dead,
    )


_CACHE: dict[str, SensitivitySet] = {}


def clear_cache() -> None:
    _CACHE.clear()


def compute_sensitivities(case: GridCase) -> SensitivitySet:
    """PTDF/LODF for the case's in-service topology (cached by content)."""
    key = case.topology_key()
    hit = _CACHE.get(key)
    if hit is not None:
        return hit

    buses, branches, dead = _island_subcase(case)
    n, m = len(buses), len(branches)
    pos = {b: i for i, b in enumerate(buses)}
    s = pos[case.slack_bus]

    # incidence (m x n) and diagonal susceptance
    a = np.zeros((m, n))
    bd = np.zeros(m)
    for k, br in enumerate(branches):
        a[k, pos[br.from_bus]] = 1.0
        a[k, pos[br.to_bus]] = -1.0
        bd[k] = 1.0 / br.x
    lap = a.T @ np.diag(bd) @ a
    keep = [i for i in range(n) if i != s]
    ptdf = np.zeros((m, n))
    if keep:
        rhs = np.zeros((len(keep), len(keep)))
        np.fill_diagonal(rhs, 1.0)
        theta_red = np.linalg.solve(lap[np.ix_(keep, keep)], rhs)
        ptdf[:, keep] = (bd[:, None] * a[:, keep]) @ theta_red

    # LODF from branch-to-branch transfer factors
    h = ptdf @ a.T                      # (m, m): flow change on e per unit shift on k
    denom = 1.0 - np.diag(h)
    bridges = _bridge_ids(buses, branches)
    lodf = np.full((m, m), np.nan)
    ok = np.array([br.id not in bridges for br in branches], dtype=bool)
    safe = np.where(ok & (np.abs(denom) > 1e-9), denom, np.nan)
    lodf[:, :] = h / safe[None, :]
    np.fill_diagonal(lodf, -1.0)
    lodf[:, ~ok] = np.nan

    sens = SensitivitySet(
        topology_key=key,
        bus_ids=tuple(buses),
        branch_ids=tuple(br.id for br in branches),
        ptdf=ptdf,
        lodf=lodf,
        bridges=frozenset(bridges),
        islanded_buses=dead,
    )
    _CACHE[key] = sens
    return sens


def _bridge_ids(buses, branches) -> set[str]:
    """Branches whose loss disconnects the island. Parallel circuits are
    never bridges, so check multiplicity before the simple-graph test."""
    simple = nx.Graph()
    simple.add_nodes_from(buses)
    mult: dict[tuple[int, int], list[str]] = {}
    for br in branches:
        e = (min(br.from_bus, br.to_bus), max(br.from_bus, br.to_bus))
        mult.setdefault(e, []).append(br.id)
        simple.add_edge(*e)
    bridge_edges = set()
    for u, v in nx.bridges(simple):
        bridge_edges.add((min(u, v), max(u, v)))
    out = set()
    for e, ids in mult.items():
        if len(ids) == 1 and e in bridge_edges:
            out.add(ids[0])
    return out


def reduced_sensitivities(case: GridCase, contingency: Contingency | list[str]) -> SensitivitySet:
    """Sensitivities of the post-outage topology (outages switched out)."""
    return compute_sensitivities(apply_contingency(case, contingency))
