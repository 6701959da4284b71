"""Security-constrained dispatch: preventive commitment and corrective
redispatch built as quadratic programs over linear network sensitivities.

Both problems price generation changes with the quadratic cost-of-change form
(the change in a unit's production cost when its output moves off the
operating point), curtailment at each load's shed cost, and — for the
commitment problem — the fixed cost of switching on idle units, decided by
binary variables.  Network security enters as linear rows: operating-topology
flow boxes, screened post-outage overload estimates, and whatever corridor
desaturation or critical-machine reduction requirements have accumulated in
the deduplicating constraint ledger.  The corrective problem can relax the
desaturation and machine rows into priced penalties, scale the overload rows
by a branch-risk weight, and additionally price the squared per-unit loading
of the lines the anticipated outage would remove.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .grid_model import GridCase, InjectionState
from .qp import QuadraticProgram, solve_miqp, solve_qp
from .sensitivity import SensitivitySet

__all__ = [
    "ConstraintRow",
    "ConstraintLedger",
    "RiskVector",
    "DispatchSolution",
    "n1_overload_rows",
    "build_cscuc",
    "build_cscopf",
    "solve_dispatch",
    "cycles_to_clear",
]

ROW_KINDS = ("cutset", "stability", "branch-n1")

_LEDGER_SCHEMA = "constraint-ledger/v1"

# coefficients smaller than this are treated as structural zeros everywhere
# (row expansion, deduplication, serialization round-trip stability)
_COEFF_EPS = 1e-12


# ---------------------------------------------------------------------------
# constraint rows and the ledger
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintRow:
    """One accumulated security requirement, normalized to "expr <= rhs".

    The expression is linear in the dispatch variables: a generator picks up
    ``gen_coeff[id] + bus_coeff[bus]``, a load picks up ``-bus_coeff[bus]``
    (shedding at a bus raises its net injection).  ``bus_coeff`` carries
    network-derived terms (injection-shift rows), ``gen_coeff`` carries
    machine-identity terms (aggregate reduction rows); either may be empty.
    """

    kind: str
    label: str
    rhs: float
    bus_coeff: Mapping[int, float] = field(default_factory=dict)
    gen_coeff: Mapping[str, float] = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        if self.kind not in ROW_KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}; expected one of {ROW_KINDS}")
        if not math.isfinite(self.rhs):
            raise ValueError(f"row {self.label!r} has non-finite rhs")
        bus = {int(k): float(v) for k, v in self.bus_coeff.items()}
        gen = {str(k): float(v) for k, v in self.gen_coeff.items()}
        for coeffs in (bus, gen):
            for k, v in coeffs.items():
                if not math.isfinite(v):
                    raise ValueError(f"row {self.label!r} has non-finite coefficient at {k!r}")
        object.__setattr__(self, "bus_coeff", bus)
        object.__setattr__(self, "gen_coeff", gen)
        object.__setattr__(self, "rhs", float(self.rhs))

    def key(self) -> tuple:
        """Coefficient identity used for deduplication (label excluded)."""
        bus = tuple(
            sorted((k, round(v, 9)) for k, v in self.bus_coeff.items() if abs(v) > _COEFF_EPS)
        )
        gen = tuple(
            sorted((k, round(v, 9)) for k, v in self.gen_coeff.items() if abs(v) > _COEFF_EPS)
        )
        return (self.kind, round(self.rhs, 9), bus, gen)


class ConstraintLedger:
    """Insertion-ordered collection of rows with coefficient-level dedup."""

    def __init__(self, rows: Iterable[ConstraintRow] = ()):
        self._rows: list[ConstraintRow] = []
        self._keys: set[tuple] = set()
        for r in rows:
            self.add(r)

    def add(self, row: ConstraintRow) -> bool:
        """Append the row; returns False when an equivalent row is present."""
        k = row.key()
        if k in self._keys:
            return False
        self._keys.add(k)
        self._rows.append(row)
        return True

    def extend(self, rows: Iterable[ConstraintRow]) -> int:
        return sum(1 for r in rows if self.add(r))

    @property
    def rows(self) -> tuple[ConstraintRow, ...]:
        return tuple(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[ConstraintRow]:
        return iter(self._rows)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": _LEDGER_SCHEMA,
                "rows": [
                    {
                        "kind": r.kind,
                        "label": r.label,
                        "rhs": r.rhs,
                        "bus_coeff": {str(k): v for k, v in sorted(r.bus_coeff.items())},
                        "gen_coeff": {k: v for k, v in sorted(r.gen_coeff.items())},
                        "provenance": r.provenance,
                    }
                    for r in self._rows
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ConstraintLedger":
        data = json.loads(text)
        if data.get("schema") != _LEDGER_SCHEMA:
            raise ValueError(f"unsupported ledger schema {data.get('schema')!r}")
        out = cls()
        for r in data["rows"]:
            out.add(
                ConstraintRow(
                    kind=r["kind"],
                    label=r["label"],
                    bus_coeff={int(k): float(v) for k, v in r["bus_coeff"].items()},
                    gen_coeff={str(k): float(v) for k, v in r["gen_coeff"].items()},
                    rhs=float(r["rhs"]),
                    provenance=r.get("provenance", ""),
                )
            )
        return out


# ---------------------------------------------------------------------------
# risk weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskVector:
    """Nonnegative weights steering the corrective problem.

    ``lambda_b`` scales post-outage overload row right-hand sides (headroom
    scales literally; deficits scale by min(weight, 1) so no weight demands
    over-correction), ``lambda_c``/``lambda_t`` price violations of corridor
    and machine-reduction rows, and ``lambda_n`` prices the squared per-unit
    loading of the lines the anticipated outage would remove.
    """

    lambda_b: float = 1.0
    lambda_c: float = 1.0
    lambda_t: float = 1.0
    lambda_n: float = 100.0

    def __post_init__(self):
        for name in ("lambda_b", "lambda_c", "lambda_t", "lambda_n"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def coupled(cls, lam: float) -> "RiskVector":
        """Single-knob mode: equal row weights, flow-square weight 100x."""
        return cls(lambda_b=lam, lambda_c=lam, lambda_t=lam, lambda_n=100.0 * lam)


# ---------------------------------------------------------------------------
# screened post-outage overload rows
# ---------------------------------------------------------------------------

def n1_overload_rows(
    case: GridCase,
    inj: InjectionState,
    sens: SensitivitySet,
    *,
    threshold: float = 1.0,
    provenance: str = "",
) -> list[ConstraintRow]:
    """Overload rows for single-branch outages on the given topology.

    For every non-bridge outage candidate k and every rated branch e, the
    post-outage flow is estimated by superposition; a row is emitted when its
    magnitude exceeds ``threshold`` times the rating.  Row coefficients map a
    bus injection change to the change of that estimate, so the requirement
    reads "estimated post-outage flow within rating".
    """
    flows = sens.flows_from_injections(case, inj)
    rows: list[ConstraintRow] = []
    for k in sens.branch_ids:
        if k in sens.bridges:
            continue
        ki = sens.branch_index(k)
        fk = flows[k]
        for e in sens.branch_ids:
            if e == k:
                continue
            rating = case.branch(e).rating
            if not math.isfinite(rating):
                continue
            ei = sens.branch_index(e)
            lodf = float(sens.lodf[ei, ki])
            est = flows[e] + lodf * fk
            if abs(est) <= threshold * rating:
                continue
            vec = sens.ptdf[ei] + lodf * sens.ptdf[ki]
            sign = 1.0 if est > 0 else -1.0
            bus_coeff = {
                int(b): float(sign * v)
                for b, v in zip(sens.bus_ids, vec)
                if abs(v) > _COEFF_EPS
            }
            rows.append(
                ConstraintRow(
                    kind="branch-n1",
                    label=f"n1:{e}|{k}",
                    bus_coeff=bus_coeff,
                    gen_coeff={},
                    rhs=float(rating - sign * est),
                    provenance=provenance or f"overload screen on topology {sens.topology_key}",
                )
            )
    return rows


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------

@dataclass
class _Assembly:
    """Mutable accumulators materialized into a QuadraticProgram at the end."""

    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    lin: dict[str, float] = field(default_factory=dict)     # linear cost by name
    qdiag: dict[str, float] = field(default_factory=dict)   # diagonal quadratic cost
    dense: list[tuple[float, float, dict[str, float]]] = field(default_factory=list)
    ineq: list[tuple[str, dict[str, float], float]] = field(default_factory=list)
    eq: list[tuple[str, dict[str, float], float]] = field(default_factory=list)
    integer: set[str] = field(default_factory=set)
    const: float = 0.0

    def var(self, name: str, lo: float, hi: float, *, cost: float = 0.0, binary: bool = False):
        self.names.append(name)
        self.lb.append(lo)
        self.ub.append(hi)
        if cost:
            self.lin[name] = self.lin.get(name, 0.0) + cost
        if binary:
            self.integer.add(name)

    def build(self) -> QuadraticProgram:
        n = len(self.names)
        index = {name: i for i, name in enumerate(self.names)}
        q = np.zeros((n, n))
        c = np.zeros(n)
        const = self.const
        for name, v in self.qdiag.items():
            q[index[name], index[name]] += 2.0 * v
        for name, v in self.lin.items():
            c[index[name]] += v
        for scale, f0, coeffs in self.dense:
            vec = np.zeros(n)
            for name, v in coeffs.items():
                vec[index[name]] = v
            q += 2.0 * scale * np.outer(vec, vec)
            c += 2.0 * scale * f0 * vec
            const += scale * f0 * f0
        a_ub = np.zeros((len(self.ineq), n))
        b_ub = np.zeros(len(self.ineq))
        ub_names = []
        for r, (label, coeffs, rhs) in enumerate(self.ineq):
            for name, v in coeffs.items():
                a_ub[r, index[name]] = v
            b_ub[r] = rhs
            ub_names.append(label)
        a_eq = np.zeros((len(self.eq), n))
        b_eq = np.zeros(len(self.eq))
        eq_names = []
        for r, (label, coeffs, rhs) in enumerate(self.eq):
            for name, v in coeffs.items():
                a_eq[r, index[name]] = v
            b_eq[r] = rhs
            eq_names.append(label)
        mask = np.array([name in self.integer for name in self.names], dtype=bool)
        return QuadraticProgram(
            q=q,
            c=c,
            a_eq=a_eq,
            b_eq=b_eq,
            a_ub=a_ub,
            b_ub=b_ub,
            lb=np.array(self.lb),
            ub=np.array(self.ub),
            names=list(self.names),
            eq_names=eq_names,
            ub_names=ub_names,
            integer=mask,
            const=const,
        )


def _expand_row(row: ConstraintRow, case: GridCase) -> dict[str, float]:
    """Row coefficients over the named dispatch variables."""
    out: dict[str, float] = {}
    for g in case.generators:
        v = row.gen_coeff.get(g.id, 0.0) + row.bus_coeff.get(g.bus, 0.0)
        if abs(v) > _COEFF_EPS:
            out[f"dp:{g.id}"] = v
    for ld in case.loads:
        v = row.bus_coeff.get(ld.bus, 0.0)
        if abs(v) > _COEFF_EPS:
            out[f"dl:{ld.id}"] = -v
    return out


def _check_costs(case: GridCase):
    for g in case.generators:
        if g.cost_c < 0.0:
            raise ValueError(
                f"generator {g.id} has negative quadratic cost {g.cost_c}; "
                "the dispatch objective must stay convex"
            )


def _check_islanding(case: GridCase, inj: InjectionState, sens_reduced: SensitivitySet) -> set[int]:
    """Buses outside the reduced topology; nonzero injections there are fatal."""
    live = set(sens_reduced.bus_ids)
    dead = {b.id for b in case.buses} - live
    for g in case.generators:
        if g.bus in dead and abs(inj.gen_p.get(g.id, 0.0)) > 1e-9:
            raise ValueError(
                f"generator {g.id} at bus {g.bus} is islanded by the outage but "
                f"carries {inj.gen_p.get(g.id)} MW; linear factors cannot price it"
            )
    for ld in case.loads:
        if ld.bus in dead and abs(inj.load_p.get(ld.id, ld.p_mw)) > 1e-9:
            raise ValueError(
                f"load {ld.id} at bus {ld.bus} is islanded by the outage but "
                f"still draws power; linear factors cannot price it"
            )
    return dead


def _add_dispatch_vars(
    asm: _Assembly,
    case: GridCase,
    inj: InjectionState,
    dead: set[int],
    *,
    candidates: tuple[str, ...] = (),
    committed: Mapping[str, int] | None = None,
):
    """Generator/load variables with their boxes, costs, and the balance row.

    ``candidates`` switches the named idle units into binaries with coupling
    rows; ``committed`` pins idle units to a prior on/off decision instead.
    Exactly one of the two mechanisms is used per problem.
    """
    candidate_set = set(candidates)
    for g in case.generators:
        p0 = float(inj.gen_p.get(g.id, 0.0))
        d_lin = g.cost_b + 2.0 * g.cost_c * p0
        if g.bus in dead:
            asm.var(f"dp:{g.id}", 0.0, 0.0)
            continue
        if g.active:
            asm.var(f"dp:{g.id}", g.p_min - p0, g.p_max - p0, cost=d_lin)
        elif g.id in candidate_set:
            if abs(p0) > 1e-9:
                raise ValueError(f"idle generator {g.id} has nonzero base output {p0}")
            asm.var(f"dp:{g.id}", min(0.0, g.p_min), max(0.0, g.p_max), cost=d_lin)
            asm.var(f"u:{g.id}", 0.0, 1.0, cost=g.cost_a, binary=True)
            asm.ineq.append(
                (f"commit+:{g.id}", {f"dp:{g.id}": 1.0, f"u:{g.id}": -g.p_max}, 0.0)
            )
            asm.ineq.append(
                (f"commit-:{g.id}", {f"dp:{g.id}": -1.0, f"u:{g.id}": g.p_min}, 0.0)
            )
        else:
            on = int((committed or {}).get(g.id, 0))
            if on not in (0, 1):
                raise ValueError(f"commitment for {g.id} must be 0 or 1, got {on!r}")
            if on:
                if abs(p0) > 1e-9:
                    raise ValueError(f"idle generator {g.id} has nonzero base output {p0}")
                asm.var(f"dp:{g.id}", g.p_min, g.p_max, cost=d_lin)
            else:
                asm.var(f"dp:{g.id}", 0.0, 0.0)
        if g.cost_c:
            asm.qdiag[f"dp:{g.id}"] = g.cost_c
    for ld in case.loads:
        l0 = float(inj.load_p.get(ld.id, ld.p_mw))
        if ld.bus in dead:
            asm.var(f"dl:{ld.id}", 0.0, 0.0)
            continue
        # curtailment is priced as a hinge: a slack variable carries shed_cost
        # on the reduction side only, so a load running below its declared
        # upper bound can be restored without the objective paying for it
        asm.var(f"dl:{ld.id}", ld.l_min - l0, ld.upper - l0)
        asm.var(f"s:shed:{ld.id}", 0.0, max(0.0, l0 - ld.l_min), cost=ld.shed_cost)
        asm.ineq.append(
            (f"shed:{ld.id}", {f"dl:{ld.id}": -1.0, f"s:shed:{ld.id}": -1.0}, 0.0)
        )
    balance = {f"dp:{g.id}": 1.0 for g in case.generators}
    balance.update({f"dl:{ld.id}": -1.0 for ld in case.loads})
    asm.eq.append(("balance", balance, 0.0))


def _add_flow_rows(asm: _Assembly, case: GridCase, inj: InjectionState, sens: SensitivitySet):
    """Rating box per rated branch of the given topology."""
    flows = sens.flows_from_injections(case, inj)
    for bid in sens.branch_ids:
        rating = case.branch(bid).rating
        if not math.isfinite(rating):
            continue
        row = sens.ptdf_row(bid)
        bus_coeff = {
            int(b): float(v) for b, v in zip(sens.bus_ids, row) if abs(v) > _COEFF_EPS
        }
        coeffs = _expand_row(
            ConstraintRow(kind="branch-n1", label=bid, bus_coeff=bus_coeff, gen_coeff={}, rhs=0.0),
            case,
        )
        f0 = flows[bid]
        asm.ineq.append((f"flow+:{bid}", coeffs, rating - f0))
        asm.ineq.append((f"flow-:{bid}", {k: -v for k, v in coeffs.items()}, rating + f0))


def _scaled_rhs(rhs: float, lam_b: float) -> float:
    """Headroom scales literally; deficits never scale past the exact need."""
    return rhs * (lam_b if rhs > 0.0 else min(lam_b, 1.0))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_cscuc(
    case: GridCase,
    inj: InjectionState,
    ledger: ConstraintLedger,
    sens: SensitivitySet,
    sens_reduced: SensitivitySet,
) -> QuadraticProgram:
    """Preventive commitment problem on the post-outage operating topology.

    Idle units become binary candidates whose boxes collapse to zero when
    left off; every ledger row is enforced as a hard constraint.  ``sens``
    describes the intact topology (kept for interface symmetry with the
    corrective builder), ``sens_reduced`` the topology with the anticipated
    outage applied — flow boxes are built on the latter, because that is the
    state the commitment must keep operable.
    """
    del sens  # the preventive problem is built entirely on the reduced topology
    _check_costs(case)
    dead = _check_islanding(case, inj, sens_reduced)
    asm = _Assembly()
    candidates = tuple(
        g.id for g in case.inactive_generators() if g.bus not in dead
    )
    _add_dispatch_vars(asm, case, inj, dead, candidates=candidates)
    _add_flow_rows(asm, case, inj, sens_reduced)
    for row in ledger:
        asm.ineq.append((row.label, _expand_row(row, case), row.rhs))
    return asm.build()


def build_cscopf(
    case: GridCase,
    inj: InjectionState,
    ledger: ConstraintLedger,
    risk: RiskVector,
    u: Mapping[str, int] | None,
    sens: SensitivitySet,
    sens_reduced: SensitivitySet,
    *,
    hard: bool = False,
    penalty_form: str = "hinge",
) -> QuadraticProgram:
    """Corrective redispatch with risk-weighted security requirements.

    Commitments decided upstream arrive in ``u`` (idle units absent from the
    map stay pinned at zero).  Corridor and machine-reduction rows become
    priced penalties — hinge slacks by default, or the literal linear
    surcharge with ``penalty_form="affine"`` — unless ``hard`` forces them
    back to constraints.  N-1 overload rows are enforced with their
    right-hand sides scaled by the branch-risk weight.  The lines present in
    ``sens`` but missing from ``sens_reduced`` are the ones the anticipated
    outage removes; their current squared per-unit loading is priced by the
    flow-risk weight.

    Flow limits bind on the network the problem operates: the post-outage
    topology when ``hard`` (the outage is present), the intact one otherwise
    (the outage is only anticipated, and its security enters through the
    priced risk terms).
    """
    if penalty_form not in ("hinge", "affine"):
        raise ValueError(f"penalty_form must be 'hinge' or 'affine', got {penalty_form!r}")
    _check_costs(case)
    dead = _check_islanding(case, inj, sens_reduced)
    u = dict(u or {})
    for gid, on in u.items():
        try:
            g = case.generator(gid)
        except KeyError:
            raise ValueError(f"unknown generator {gid!r} in commitment map") from None
        if g.active and int(on) != 1:
            raise ValueError(f"generator {gid} is active; its commitment cannot be {on!r}")
    asm = _Assembly()
    _add_dispatch_vars(asm, case, inj, dead, committed=u)
    _add_flow_rows(asm, case, inj, sens_reduced if hard else sens)

    weights = {"cutset": risk.lambda_c, "stability": risk.lambda_t}
    for row in ledger:
        coeffs = _expand_row(row, case)
        if row.kind == "branch-n1":
            asm.ineq.append((row.label, coeffs, _scaled_rhs(row.rhs, risk.lambda_b)))
            continue
        if hard:
            asm.ineq.append((row.label, coeffs, row.rhs))
            continue
        weight = weights[row.kind]
        if weight <= 0.0:
            continue
        if penalty_form == "affine":
            for name, v in coeffs.items():
                asm.lin[name] = asm.lin.get(name, 0.0) + weight * v
            asm.const += -weight * row.rhs
        else:
            slack = f"s:{row.label}"
            asm.var(slack, 0.0, math.inf, cost=weight)
            relaxed = dict(coeffs)
            relaxed[slack] = -1.0
            asm.ineq.append((row.label, relaxed, row.rhs))

    if risk.lambda_n > 0.0:
        outaged = [b for b in sens.branch_ids if b not in set(sens_reduced.branch_ids)]
        if outaged:
            flows = sens.flows_from_injections(case, inj)
            scale = risk.lambda_n / (case.base_mva**2)
            for bid in outaged:
                ptdf = sens.ptdf_row(bid)
                bus_coeff = {
                    int(b): float(v)
                    for b, v in zip(sens.bus_ids, ptdf)
                    if abs(v) > _COEFF_EPS
                }
                coeffs = _expand_row(
                    ConstraintRow(
                        kind="branch-n1", label=bid, bus_coeff=bus_coeff, gen_coeff={}, rhs=0.0
                    ),
                    case,
                )
                asm.dense.append((scale, flows[bid], coeffs))
    return asm.build()


# ---------------------------------------------------------------------------
# solving and reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchSolution:
    """Named dispatch change with the objective split into cost and penalty.

    ``cost`` is recomputed from the returned dispatch with the quadratic
    cost-of-change formula (plus curtailment and commitment charges), so it is
    a pure currency figure; ``penalty`` is whatever the risk terms added on
    top (slack prices, linear surcharges, squared-loading terms).
    """

    status: str
    dp: dict[str, float]
    dl: dict[str, float]
    u: dict[str, int]
    slack: dict[str, float]
    objective: float | None
    cost: float | None
    penalty: float | None
    load_shed_mw: float
    kkt_residual: float | None
    iterations: int
    solve_time_s: float
    nodes: int = 0


def solve_dispatch(qp: QuadraticProgram, case: GridCase, inj: InjectionState) -> DispatchSolution:
    """Solve a built dispatch problem and map the result back to the grid."""
    res = solve_miqp(qp) if qp.integer.any() else solve_qp(qp)
    if not res.ok:
        return DispatchSolution(
            status=res.status,
            dp={},
            dl={},
            u={},
            slack={},
            objective=None,
            cost=None,
            penalty=None,
            load_shed_mw=0.0,
            kkt_residual=res.kkt_residual,
            iterations=res.iterations,
            solve_time_s=res.solve_time_s,
            nodes=res.nodes,
        )
    dp: dict[str, float] = {}
    dl: dict[str, float] = {}
    u: dict[str, int] = {}
    slack: dict[str, float] = {}
    for name, val in zip(qp.names, res.x):
        kind, _, ident = name.partition(":")
        if kind == "dp":
            dp[ident] = float(val)
        elif kind == "dl":
            dl[ident] = float(val)
        elif kind == "u":
            u[ident] = int(round(val))
        elif kind == "s":
            slack[ident] = float(val)
    cost = 0.0
    for g in case.generators:
        d = dp.get(g.id, 0.0)
        p0 = float(inj.gen_p.get(g.id, 0.0))
        cost += g.cost_c * d * d + (g.cost_b + 2.0 * g.cost_c * p0) * d
    for ld in case.loads:
        cost += ld.shed_cost * max(0.0, -dl.get(ld.id, 0.0))
    for gid, on in u.items():
        cost += case.generator(gid).cost_a * on
    shed = sum(max(0.0, -v) for v in dl.values())
    return DispatchSolution(
        status=res.status,
        dp=dp,
        dl=dl,
        u=u,
        slack=slack,
        objective=float(res.objective),
        cost=float(cost),
        penalty=float(res.objective - cost),
        load_shed_mw=float(shed),
        kkt_residual=res.kkt_residual,
        iterations=res.iterations,
        solve_time_s=res.solve_time_s,
        nodes=res.nodes,
    )


def cycles_to_clear(
    case: GridCase,
    cm: Iterable[str],
    required_mw: float,
    *,
    frac_per_cycle: float = 0.10,
) -> int:
    """Dispatch cycles needed to walk the named machines down by the
    requirement, moving each at most ``frac_per_cycle`` of its capability per
    cycle.  A post-hoc reporting metric, not a constraint.
    """
    if required_mw <= 0.0:
        return 0
    cap = sum(frac_per_cycle * max(0.0, case.generator(g).p_max) for g in cm)
    if cap <= 0.0:
        raise ValueError("named machines have no downward-ramp capability")
    return math.ceil(required_mw / cap - 1e-12)
