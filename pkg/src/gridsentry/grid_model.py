"""Grid case model: tabular case files, injections, contingencies.

The case format is a plain-text subset of the common public tabular layout
(bus/branch/gen/gencost/load sections) so public test systems drop in with a
thin converter. Everything is per-unit on ``base_mva`` except where a field
name says MW.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import networkx as nx

__all__ = [
    "Bus",
    "Branch",
    "Generator",
    "Load",
    "GridCase",
    "InjectionState",
    "ArcFault",
    "Contingency",
    "CaseError",
    "parse_case",
    "load_case",
    "serialize_case",
    "apply_contingency",
    "load_contingency",
    "load_injections",
    "save_injections",
]


class CaseError(ValueError):
    """Raised on malformed or semantically invalid case input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Bus:
    id: int
    base_kv: float = 138.0


@dataclass(frozen=True)
class Branch:
    id: str            # "from-to", "#n" suffix for parallel circuits
    from_bus: int
    to_bus: int
    x: float           # series reactance, pu on system base
    limit_mw: float    # thermal limit; <= 0 means unlimited
    in_service: bool = True

    @property
    def rating(self) -> float:
        return self.limit_mw if self.limit_mw > 0 else math.inf


@dataclass(frozen=True)
class Generator:
    id: str            # "G<bus>", "#n" suffix when a bus hosts several
    bus: int
    p_min: float       # MW
    p_max: float       # MW
    cost_a: float = 0.0    # $/h commitment (startup-equivalent) cost
    cost_b: float = 0.0    # $/MWh
    cost_c: float = 0.0    # $/MW^2 h
    h_s: float = 3.0       # inertia constant, s on machine base (p_max)
    xd_t: float = 0.30     # transient reactance, pu on machine base
    active: bool = True    # committed; inactive units are commitment candidates


@dataclass(frozen=True)
class Load:
    id: str            # "L<bus>"
    bus: int
    p_mw: float        # nominal demand
    l_min: float = 0.0
    l_max: float = -1.0    # < 0 means "nominal" (no upward flexibility)
    shed_cost: float = 1000.0  # $/MWh-equivalent weight on curtailment

    @property
    def upper(self) -> float:
        return self.p_mw if self.l_max < 0 else self.l_max


@dataclass(frozen=True)
class GridCase:
    """Immutable network description. Mutations return new cases."""

    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    slack_bus: int

    def __post_init__(self):
        _validate(self)

    # convenience lookups (rebuilt on demand; the case is frozen)
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def branch(self, branch_id: str) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(branch_id)

    def generator(self, gen_id: str) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(gen_id)

    def load(self, load_id: str) -> Load:
        for l in self.loads:
            if l.id == load_id:
                return l
        raise KeyError(load_id)

    def in_service_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.in_service]

    def active_generators(self) -> list[Generator]:
        return [g for g in self.generators if g.active]

    def inactive_generators(self) -> list[Generator]:
        return [g for g in self.generators if not g.active]

    def graph(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(self.bus_ids())
        for br in self.in_service_branches():
            g.add_edge(br.from_bus, br.to_bus, key=br.id)
        return g

    def islands(self) -> list[set[int]]:
        """Connected components, the slack's island first."""
        comps = [set(c) for c in nx.connected_components(self.graph())]
        comps.sort(key=lambda c: (self.slack_bus not in c, min(c)))
        return comps

    def topology_key(self) -> str:
        """Content hash of the in-service topology (cache key)."""
        import hashlib

        text = f"{self.base_mva};{self.slack_bus};" + ";".join(
            f"{b.id},{b.from_bus},{b.to_bus},{b.x!r}" for b in self.in_service_branches()
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_branch_limit(self, branch_id: str, limit_mw: float) -> "GridCase":
        self.branch(branch_id)  # raise on unknown id
        return replace(
            self,
            branches=tuple(
                replace(b, limit_mw=float(limit_mw)) if b.id == branch_id else b
                for b in self.branches
            ),
        )

    def with_generator_cost(
        self,
        gen_id: str,
        *,
        cost_a: float | None = None,
        cost_b: float | None = None,
        cost_c: float | None = None,
    ) -> "GridCase":
        g = self.generator(gen_id)
        updated = replace(
            g,
            cost_a=g.cost_a if cost_a is None else float(cost_a),
            cost_b=g.cost_b if cost_b is None else float(cost_b),
            cost_c=g.cost_c if cost_c is None else float(cost_c),
        )
        return replace(
            self,
            generators=tuple(updated if x.id == gen_id else x for x in self.generators),
        )

    def with_generator_limits(
        self,
        gen_id: str,
        *,
        p_min: float | None = None,
        p_max: float | None = None,
    ) -> "GridCase":
        g = self.generator(gen_id)
        updated = replace(
            g,
            p_min=g.p_min if p_min is None else float(p_min),
            p_max=g.p_max if p_max is None else float(p_max),
        )
        return replace(
            self,
            generators=tuple(updated if x.id == gen_id else x for x in self.generators),
        )

    def with_added_generator(
        self,
        gen_id: str,
        bus: int,
        p_min: float,
        p_max: float,
        *,
        cost_a: float = 0.0,
        cost_b: float = 0.0,
        cost_c: float = 0.0,
        h_s: float = 3.0,
        xd_t: float = 0.30,
        active: bool = True,
    ) -> "GridCase":
        g = Generator(
            id=gen_id,
            bus=bus,
            p_min=float(p_min),
            p_max=float(p_max),
            cost_a=float(cost_a),
            cost_b=float(cost_b),
            cost_c=float(cost_c),
            h_s=h_s,
            xd_t=xd_t,
            active=active,
        )
        return replace(self, generators=self.generators + (g,))


def _validate(case: GridCase) -> None:
    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive")
    bus_set = set()
    for b in case.buses:
        if b.id in bus_set:
            raise CaseError(f"duplicate bus id {b.id}")
        bus_set.add(b.id)
    if case.slack_bus not in bus_set:
        raise CaseError(f"slack bus {case.slack_bus} not in bus table")
    seen: set[str] = set()
    for br in case.branches:
        if br.id in seen:
            raise CaseError(f"duplicate branch id {br.id}")
        seen.add(br.id)
        if br.from_bus not in bus_set or br.to_bus not in bus_set:
            raise CaseError(f"branch {br.id} references unknown bus")
        if br.from_bus == br.to_bus:
            raise CaseError(f"branch {br.id} is a self-loop")
        if br.x <= 0:
            raise CaseError(f"branch {br.id} reactance must be positive")
    seen = set()
    for g in case.generators:
        if g.id in seen:
            raise CaseError(f"duplicate generator id {g.id}")
        seen.add(g.id)
        if g.bus not in bus_set:
            raise CaseError(f"generator {g.id} references unknown bus {g.bus}")
        if g.p_min > g.p_max:
            raise CaseError(f"generator {g.id} has p_min > p_max")
        if g.h_s <= 0 or g.xd_t <= 0:
            raise CaseError(f"generator {g.id} needs positive H and x'd")
    seen = set()
    for l in case.loads:
        if l.id in seen:
            raise CaseError(f"duplicate load id {l.id}")
        seen.add(l.id)
        if l.bus not in bus_set:
            raise CaseError(f"load {l.id} references unknown bus {l.bus}")
        if l.p_mw < 0:
            raise CaseError(f"load {l.id} has negative demand")
        if l.l_min > l.upper:
            raise CaseError(f"load {l.id} has l_min above its upper bound")


# ---------------------------------------------------------------------------
# injections

@dataclass(frozen=True)
class InjectionState:
    """Operating point: MW per generator id and per load id."""

    gen_p: Mapping[str, float]
    load_p: Mapping[str, float]

    @classmethod
    def nominal(cls, case: GridCase, dispatch: Mapping[str, float] | None = None) -> "InjectionState":
        """Nominal loads; dispatch given explicitly or zero."""
        gen = {g.id: 0.0 for g in case.generators}
        if dispatch:
            for k, v in dispatch.items():
                gen[k] = float(v)
        return cls(gen_p=dict(gen), load_p={l.id: l.p_mw for l in case.loads})

    def bus_injection_mw(self, case: GridCase) -> dict[int, float]:
        inj = {b.id: 0.0 for b in case.buses}
        for g in case.generators:
            inj[g.bus] += self.gen_p.get(g.id, 0.0)
        for l in case.loads:
            inj[l.bus] -= self.load_p.get(l.id, 0.0)
        return inj

    def total_gen_mw(self) -> float:
        return float(sum(self.gen_p.values()))

    def total_load_mw(self) -> float:
        return float(sum(self.load_p.values()))

    def shifted(self, dp: Mapping[str, float] | None = None, dl: Mapping[str, float] | None = None) -> "InjectionState":
        gen = dict(self.gen_p)
        load = dict(self.load_p)
        for k, v in (dp or {}).items():
            gen[k] = gen.get(k, 0.0) + v
        for k, v in (dl or {}).items():
            load[k] = load.get(k, 0.0) + v
        return InjectionState(gen_p=gen, load_p=load)


# ---------------------------------------------------------------------------
# contingencies

@dataclass(frozen=True)
class ArcFault:
    """One temporary mid-line fault; optionally ends in a permanent trip."""

    branch_id: str
    t_apply: float
    t_clear: float
    trips: bool = False

    def __post_init__(self):
        if self.t_clear <= self.t_apply:
            raise CaseError(f"fault on {self.branch_id}: clear time must follow apply time")


@dataclass(frozen=True)
class Contingency:
    """A set of vulnerable branches and the fault timeline hitting them."""

    label: str
    outages: tuple[str, ...]
    arc_faults: tuple[ArcFault, ...] = ()

    def trip_schedule(self, t_default: float = 0.1) -> list[tuple[float, str]]:
        """(time, branch) permanent-trip events, sorted. Branches of
        ``outages`` without a tripping fault trip at ``t_default``."""
        times: dict[str, float] = {}
        for f in self.arc_faults:
            if f.trips:
                times[f.branch_id] = f.t_clear
        for b in self.outages:
            times.setdefault(b, t_default)
        return sorted(((t, b) for b, t in times.items()))


def load_contingency(path_or_dict) -> Contingency:
    """Read a contingency JSON file: {label, outages, arc_fault_sequence}."""
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            doc = json.load(fh)
    try:
        faults = tuple(
            ArcFault(
                branch_id=str(f["branch"]),
                t_apply=float(f["apply_s"]),
                t_clear=float(f["clear_s"]),
                trips=bool(f.get("trips", False)),
            )
            for f in doc.get("arc_fault_sequence", [])
        )
        return Contingency(
            label=str(doc["label"]),
            outages=tuple(str(b) for b in doc["outages"]),
            arc_faults=faults,
        )
    except KeyError as e:
        raise CaseError(f"contingency file missing key {e}") from e


def save_contingency(c: Contingency, path) -> None:
    """Write the contingency JSON read back by :func:`load_contingency`."""
    doc = {
        "label": c.label,
        "outages": list(c.outages),
        "arc_fault_sequence": [
            {"branch": f.branch_id, "apply_s": f.t_apply, "clear_s": f.t_clear, "trips": f.trips}
            for f in c.arc_faults
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def apply_contingency(case: GridCase, contingency: Contingency | Iterable[str]) -> GridCase:
    """Copy of ``case`` with the outaged branches switched out.

    Islanding is allowed; downstream analyses report it rather than reject.
    Unknown branch ids raise.
    """
    out = set(contingency.outages if isinstance(contingency, Contingency) else contingency)
    known = {b.id for b in case.branches}
    missing = out - known
    if missing:
        raise CaseError(f"contingency references unknown branches {sorted(missing)}")
    branches = tuple(
        replace(b, in_service=False) if b.id in out else b for b in case.branches
    )
    return replace(case, branches=branches)


# ---------------------------------------------------------------------------
# case file parsing

_SECTIONS = ("BUS", "BRANCH", "GEN", "GENCOST", "LOAD")
_COMMENT_RE = re.compile(r"(?:^|\s)#")


def parse_case(text: str, name: str = "case") -> GridCase:
    """Parse the tabular case format. Errors carry the offending line number.

    Layout::

        NAME ieee118
        BASE_MVA 100.0
        SLACK 69
        BUS            # id base_kv
        1 138
        END
        BRANCH         # id from to x_pu limit_mw in_service
        1-2 1 2 0.0999 175 1
        END
        GEN            # id bus pmin pmax h_s xdt_pu active
        G1 1 0 100 3.0 0.30 1
        END
        GENCOST        # gen_id a b c
        G1 0 40 0.01
        END
        LOAD           # id bus p_mw l_min l_max shed_cost   (l_max -1 = nominal)
        L1 1 51 0 -1 1000
        END
    """
    base_mva = 100.0
    slack: int | None = None
    buses: list[Bus] = []
    branches: list[Branch] = []
    gens: list[Generator] = []
    costs: dict[str, tuple[float, float, float]] = {}
    loads: list[Load] = []
    section = None

    def fail(msg: str, ln: int):
        raise CaseError(msg, line=ln)

    for ln, raw in enumerate(text.splitlines(), start=1):
        # A comment starts at a "#" that opens the line or follows
        # whitespace; a "#" inside a token (parallel-circuit ids like
        # "42-49#2") is data.
        line = _COMMENT_RE.split(raw, maxsplit=1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].upper()
        if section is None:
            if key == "NAME" and len(tok) >= 2:
                name = tok[1]
            elif key == "BASE_MVA":
                base_mva = _num(tok, 1, ln, "BASE_MVA")
            elif key == "SLACK":
                slack = int(_num(tok, 1, ln, "SLACK"))
            elif key in _SECTIONS:
                section = key
            else:
                fail(f"unexpected token {tok[0]!r} outside any section", ln)
            continue
        if key == "END":
            section = None
            continue
        try:
            if section == "BUS":
                buses.append(Bus(id=int(tok[0]), base_kv=float(tok[1]) if len(tok) > 1 else 138.0))
            elif section == "BRANCH":
                if len(tok) < 5:
                    fail("BRANCH row needs: id from to x_pu limit_mw [in_service]", ln)
                branches.append(
                    Branch(
                        id=tok[0],
                        from_bus=int(tok[1]),
                        to_bus=int(tok[2]),
                        x=float(tok[3]),
                        limit_mw=float(tok[4]),
                        in_service=_flag(tok[5]) if len(tok) > 5 else True,
                    )
                )
            elif section == "GEN":
                if len(tok) < 4:
                    fail("GEN row needs: id bus pmin pmax [h_s xdt active]", ln)
                gens.append(
                    Generator(
                        id=tok[0],
                        bus=int(tok[1]),
                        p_min=float(tok[2]),
                        p_max=float(tok[3]),
                        h_s=float(tok[4]) if len(tok) > 4 else 3.0,
                        xd_t=float(tok[5]) if len(tok) > 5 else 0.30,
                        active=_flag(tok[6]) if len(tok) > 6 else True,
                    )
                )
            elif section == "GENCOST":
                if len(tok) < 4:
                    fail("GENCOST row needs: gen_id a b c", ln)
                costs[tok[0]] = (float(tok[1]), float(tok[2]), float(tok[3]))
            elif section == "LOAD":
                if len(tok) < 3:
                    fail("LOAD row needs: id bus p_mw [l_min l_max shed_cost]", ln)
                loads.append(
                    Load(
                        id=tok[0],
                        bus=int(tok[1]),
                        p_mw=float(tok[2]),
                        l_min=float(tok[3]) if len(tok) > 3 else 0.0,
                        l_max=float(tok[4]) if len(tok) > 4 else -1.0,
                        shed_cost=float(tok[5]) if len(tok) > 5 else 1000.0,
                    )
                )
        except CaseError:
            raise
        except ValueError as e:
            fail(f"bad {section} row: {e}", ln)

    if section is not None:
        raise CaseError(f"section {section} not closed with END")
    if not buses:
        raise CaseError("case has no buses")
    if slack is None:
        slack = buses[0].id
    unknown_cost = set(costs) - {g.id for g in gens}
    if unknown_cost:
        raise CaseError(f"GENCOST references unknown generators {sorted(unknown_cost)}")
    gens = [
        replace(g, cost_a=costs[g.id][0], cost_b=costs[g.id][1], cost_c=costs[g.id][2])
        if g.id in costs
        else g
        for g in gens
    ]
    return GridCase(
        name=name,
        base_mva=base_mva,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(gens),
        loads=tuple(loads),
        slack_bus=slack,
    )


def _num(tok: list[str], i: int, ln: int, what: str) -> float:
    try:
        return float(tok[i])
    except (IndexError, ValueError):
        raise CaseError(f"{what} needs a numeric value", line=ln)


def _flag(s: str) -> bool:
    return s.strip() not in ("0", "false", "False")


def load_case(path) -> GridCase:
    with open(path) as fh:
        text = fh.read()
    import os

    return parse_case(text, name=os.path.splitext(os.path.basename(str(path)))[0])


def serialize_case(case: GridCase) -> str:
    """Emit the tabular format; parse(serialize(c)) == c."""
    out = [f"NAME {case.name}", f"BASE_MVA {case.base_mva!r}", f"SLACK {case.slack_bus}"]
    out.append("BUS  # id base_kv")
    for b in case.buses:
        out.append(f"{b.id} {b.base_kv!r}")
    out.append("END")
    out.append("BRANCH  # id from to x_pu limit_mw in_service")
    for br in case.branches:
        out.append(
            f"{br.id} {br.from_bus} {br.to_bus} {br.x!r} {br.limit_mw!r} {int(br.in_service)}"
        )
    out.append("END")
    out.append("GEN  # id bus pmin pmax h_s xdt active")
    for g in case.generators:
        out.append(
            f"{g.id} {g.bus} {g.p_min!r} {g.p_max!r} {g.h_s!r} {g.xd_t!r} {int(g.active)}"
        )
    out.append("END")
    out.append("GENCOST  # gen_id a b c")
    for g in case.generators:
        out.append(f"{g.id} {g.cost_a!r} {g.cost_b!r} {g.cost_c!r}")
    out.append("END")
    out.append("LOAD  # id bus p_mw l_min l_max shed_cost")
    for l in case.loads:
        out.append(f"{l.id} {l.bus} {l.p_mw!r} {l.l_min!r} {l.l_max!r} {l.shed_cost!r}")
    out.append("END")
    return "\n".join(out) + "\n"


def load_injections(path_or_dict) -> InjectionState:
    """Injection JSON: {"gen_p": {id: MW}, "load_p": {id: MW}}."""
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            doc = json.load(fh)
    if "gen_p" not in doc or "load_p" not in doc:
        raise CaseError("injection file needs gen_p and load_p maps")
    return InjectionState(
        gen_p={str(k): float(v) for k, v in doc["gen_p"].items()},
        load_p={str(k): float(v) for k, v in doc["load_p"].items()},
    )


def save_injections(inj: InjectionState, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"gen_p": dict(sorted(inj.gen_p.items())), "load_p": dict(sorted(inj.load_p.items()))},
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
