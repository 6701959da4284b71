"""Dispatch problem builders and solution mapping.

Oracle strategy: every optimum asserted here is derived independently of the
builder code.  Redispatch splits come from equal-marginal-cost Lagrangian hand
solutions, commitment decisions from exhaustive enumeration over the binary
assignments, and post-outage overload rows from brute-force re-simulation
(apply the second outage, rerun the DC power flow, compare).  Objective
decompositions are recomputed from the returned dispatch with the quadratic
cost-of-change formula written out locally.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from gridsentry.dispatch import (
    ConstraintLedger,
    ConstraintRow,
    RiskVector,
    build_cscopf,
    build_cscuc,
    cycles_to_clear,
    n1_overload_rows,
    solve_dispatch,
)
from gridsentry.grid_model import InjectionState, apply_contingency, parse_case
from gridsentry.qp import QuadraticProgram, solve_qp
from gridsentry.sensitivity import (
    compute_sensitivities,
    dc_power_flow,
    reduced_sensitivities,
)

# ---------------------------------------------------------------------------
# fixtures: small hand-checkable networks
# ---------------------------------------------------------------------------

# Two equal-cost-curvature machines at bus 1 share a mandated reduction; the
# pinned unit G0 covers the bus-2 load so the base case is balanced with zero
# base output on G1/G2 (all linear cost terms vanish).
ED2_CASE = """
NAME ed2
BASE_MVA 100.0
SLACK 1
BUS
1 138
2 138
END
BRANCH
L12 1 2 0.1 1000 1
END
GEN
G1 1 -100.0 100.0 4.0 0.3 1
G2 1 -100.0 100.0 4.0 0.3 1
G0 2 10.0 10.0 4.0 0.3 1
END
GENCOST
G1 0.0 0.0 1.0
G2 0.0 0.0 2.0
G0 0.0 0.0 0.0
END
LOAD
D2 2 10.0 0 -1 1000.0
END
"""

# Losing line LA strands 40 MW behind the 60 MW rating of LB; the idle unit
# G3 at the load bus is the only alternative to shedding.
UC3_CASE = """
NAME uc3
BASE_MVA 100.0
SLACK 1
BUS
1 138
2 138
END
BRANCH
LA 1 2 0.1 60 1
LB 1 2 0.1 60 1
END
GEN
G1 1 0.0 200.0 4.0 0.3 1
G3 2 0.0 80.0 4.0 0.3 0
END
GENCOST
G1 0.0 10.0 0.01
G3 50.0 20.0 0.01
END
LOAD
D2 2 100.0 0 -1 1000.0
END
"""

# Corridor with headroom on both lines; desaturation rows are injected by the
# tests.  G1 sits at the exporting bus, G2 is the (slightly dearer) local
# alternative at the load bus, so the base point is the economic corner.
CORR2_CASE = """
NAME corr2
BASE_MVA 100.0
SLACK 1
BUS
1 138
2 138
END
BRANCH
LA 1 2 0.1 80 1
LB 1 2 0.1 80 1
END
GEN
G1 1 0.0 200.0 4.0 0.3 1
G2 2 0.0 100.0 4.0 0.3 1
END
GENCOST
G1 0.0 10.0 0.01
G2 0.0 13.0 0.01
END
LOAD
D2 2 100.0 0 -1 1000.0
END
"""

# Three identical parallel circuits; after one scheduled outage the loss of a
# second circuit doubles the survivor's flow, tripping the overload screen.
PAR3_CASE = """
NAME par3
BASE_MVA 100.0
SLACK 1
BUS
1 138
2 138
END
BRANCH
LA 1 2 0.1 70 1
LB 1 2 0.1 70 1
LC 1 2 0.1 70 1
END
GEN
G1 1 0.0 200.0 4.0 0.3 1
END
GENCOST
G1 0.0 10.0 0.01
END
LOAD
D2 2 100.0 0 -1 1000.0
END
"""


def ed2():
    case = parse_case(ED2_CASE)
    inj = InjectionState(gen_p={"G1": 0.0, "G2": 0.0, "G0": 10.0}, load_p={"D2": 10.0})
    sens = compute_sensitivities(case)
    return case, inj, sens


def uc3():
    case = parse_case(UC3_CASE)
    inj = InjectionState(gen_p={"G1": 100.0, "G3": 0.0}, load_p={"D2": 100.0})
    sens = compute_sensitivities(case)
    sens_r = reduced_sensitivities(case, ["LA"])
    return case, inj, sens, sens_r


def corr2():
    case = parse_case(CORR2_CASE)
    inj = InjectionState(gen_p={"G1": 100.0, "G2": 0.0}, load_p={"D2": 100.0})
    sens = compute_sensitivities(case)
    return case, inj, sens


def corridor_row(rhs: float = -20.0) -> ConstraintRow:
    """Reduce bus-1 export by at least ``-rhs`` MW (bus-2 terms are zero)."""
    return ConstraintRow(
        kind="cutset",
        label="cut:corridor",
        bus_coeff={1: 1.0},
        gen_coeff={},
        rhs=rhs,
        provenance="test fixture",
    )


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def quadratic_cost_oracle(case, inj, dp, dl, u=None) -> float:
    """Cost of the dispatch change, written out from first principles.

    Generator term: F(p0+dp) - F(p0) = c*dp^2 + (b + 2*c*p0)*dp.
    Curtailment term: shed_cost per MW of load reduction.
    Commitment term: the fixed cost of every unit switched on.
    """
    total = 0.0
    for g in case.generators:
        d = dp.get(g.id, 0.0)
        p0 = inj.gen_p.get(g.id, 0.0)
        total += g.cost_c * d * d + (g.cost_b + 2.0 * g.cost_c * p0) * d
    for ld in case.loads:
        total += ld.shed_cost * max(0.0, -dl.get(ld.id, 0.0))
    for gid, on in (u or {}).items():
        total += case.generator(gid).cost_a * on
    return total


def assert_dispatch_invariants(sol, qp: QuadraticProgram):
    """Balance, bounds, and hard inequality rows hold at the solution."""
    x = np.array([sol_value(sol, name) for name in qp.names])
    if qp.a_eq.shape[0]:
        assert np.max(np.abs(qp.a_eq @ x - qp.b_eq)) <= 1e-6
    assert np.all(x >= qp.lb - 1e-6)
    assert np.all(x <= qp.ub + 1e-6)
    if qp.a_ub.shape[0]:
        assert np.max(qp.a_ub @ x - qp.b_ub) <= 1e-6


def sol_value(sol, name: str) -> float:
    kind, _, ident = name.partition(":")
    if kind == "dp":
        return sol.dp[ident]
    if kind == "dl":
        return sol.dl[ident]
    if kind == "u":
        return float(sol.u[ident])
    if kind == "s":
        return sol.slack[ident]
    raise AssertionError(f"unexpected variable {name!r}")


def enumerate_commitments(qp: QuadraticProgram):
    """Exhaustive oracle: best objective over all binary assignments."""
    ints = [i for i, flag in enumerate(qp.integer) if flag]
    best = math.inf
    best_assign = None
    for bits in range(2 ** len(ints)):
        lb = qp.lb.copy()
        ub = qp.ub.copy()
        for j, i in enumerate(ints):
            val = float((bits >> j) & 1)
            lb[i] = ub[i] = val
        fixed = QuadraticProgram(
            q=qp.q.copy(),
            c=qp.c.copy(),
            a_eq=qp.a_eq.copy(),
            b_eq=qp.b_eq.copy(),
            a_ub=qp.a_ub.copy(),
            b_ub=qp.b_ub.copy(),
            lb=lb,
            ub=ub,
            names=list(qp.names),
            const=qp.const,
        )
        res = solve_qp(fixed)
        if res.ok and res.objective < best:
            best = res.objective
            best_assign = {qp.names[i]: int(round(res.x[i])) for i in ints}
    return best, best_assign


# ---------------------------------------------------------------------------
# preventive commitment problem
# ---------------------------------------------------------------------------

def test_stability_row_splits_reduction_by_marginal_cost():
    """min dp1^2 + 2 dp2^2 s.t. dp1 + dp2 = -10 gives (-20/3, -10/3).

    Equal marginal cost: 2*c1*dp1 = 2*c2*dp2 with c = (1, 2); curtailment is
    priced far above either machine, so the mandated reduction binds exactly.
    """
    case, inj, sens = ed2()
    ledger = ConstraintLedger()
    ledger.add(
        ConstraintRow(
            kind="stability",
            label="tr:machines",
            bus_coeff={},
            gen_coeff={"G1": 1.0, "G2": 1.0},
            rhs=-10.0,
            provenance="test fixture",
        )
    )
    qp = build_cscuc(case, inj, ledger, sens, sens)
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert sol.dp["G1"] == pytest.approx(-20.0 / 3.0, abs=1e-6)
    assert sol.dp["G2"] == pytest.approx(-10.0 / 3.0, abs=1e-6)
    assert sol.dp["G0"] == 0.0
    assert sol.dl["D2"] == pytest.approx(-10.0, abs=1e-6)
    assert sol.load_shed_mw == pytest.approx(10.0, abs=1e-6)
    assert_dispatch_invariants(sol, qp)


def test_objective_decomposes_into_recomputed_cost():
    case, inj, sens = ed2()
    ledger = ConstraintLedger()
    ledger.add(
        ConstraintRow(
            kind="stability",
            label="tr:machines",
            bus_coeff={},
            gen_coeff={"G1": 1.0, "G2": 1.0},
            rhs=-10.0,
        )
    )
    qp = build_cscuc(case, inj, ledger, sens, sens)
    sol = solve_dispatch(qp, case, inj)
    hand = quadratic_cost_oracle(case, inj, sol.dp, sol.dl, sol.u)
    assert hand == pytest.approx(600.0 / 9.0 + 10000.0, abs=1e-5)
    assert sol.cost == pytest.approx(hand, abs=1e-6)
    assert sol.penalty == pytest.approx(0.0, abs=1e-6)
    assert sol.objective == pytest.approx(sol.cost + sol.penalty, abs=1e-6)


def test_no_violations_means_no_change():
    case, inj, sens = ed2()
    qp = build_cscuc(case, inj, ConstraintLedger(), sens, sens)
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in sol.dp.values())
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in sol.dl.values())
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_commitment_serves_stranded_load():
    """Post-outage the surviving line carries 100 > 60 MW, so either 40 MW is
    shed (40000 in curtailment) or the idle unit at the load bus is switched
    on.  Hand optimum: u=1, dp = (-40, +40), objective

        0.01*40^2 - 12*40 + 0.01*40^2 + 20*40 + 50 = 402
    with d_G1 = 10 + 2*0.01*100 = 12.
    """
    case, inj, sens, sens_r = uc3()
    qp = build_cscuc(case, inj, ConstraintLedger(), sens, sens_r)
    assert qp.integer.any()
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert sol.u == {"G3": 1}
    assert sol.dp["G1"] == pytest.approx(-40.0, abs=1e-6)
    assert sol.dp["G3"] == pytest.approx(40.0, abs=1e-6)
    assert sol.load_shed_mw == pytest.approx(0.0, abs=1e-6)
    assert sol.objective == pytest.approx(402.0, abs=1e-5)
    assert sol.cost == pytest.approx(
        quadratic_cost_oracle(case, inj, sol.dp, sol.dl, sol.u), abs=1e-6
    )
    assert_dispatch_invariants(sol, qp)


def test_branch_and_bound_matches_exhaustive_enumeration():
    case, inj, sens, sens_r = uc3()
    qp = build_cscuc(case, inj, ConstraintLedger(), sens, sens_r)
    sol = solve_dispatch(qp, case, inj)
    best, assign = enumerate_commitments(qp)
    assert sol.objective == pytest.approx(best, abs=1e-6)
    assert {f"u:{k}": v for k, v in sol.u.items()} == assign


def test_prohibitive_commitment_cost_forces_shedding():
    case, inj, sens, sens_r = uc3()
    dear = case.with_generator_cost("G3", cost_a=1.0e6)
    qp = build_cscuc(dear, inj, ConstraintLedger(), sens, sens_r)
    sol = solve_dispatch(qp, dear, inj)
    assert sol.status == "optimal"
    assert sol.u == {"G3": 0}
    assert sol.dp["G3"] == pytest.approx(0.0, abs=1e-9)
    assert sol.load_shed_mw == pytest.approx(40.0, abs=1e-6)
    assert sol.objective == pytest.approx(
        0.01 * 1600.0 - 12.0 * 40.0 + 1000.0 * 40.0, abs=1e-5
    )


def test_randomized_commitment_instances_match_enumeration():
    """Two candidate units, randomized ratings and costs, eight draws."""
    rng = np.random.default_rng(7)
    base = parse_case(UC3_CASE)
    extra = base.with_added_generator(
        gen_id="G4", bus=2, p_min=0.0, p_max=60.0, active=False
    )
    inj = InjectionState(
        gen_p={"G1": 100.0, "G3": 0.0, "G4": 0.0}, load_p={"D2": 100.0}
    )
    for _ in range(8):
        limit = float(rng.uniform(40.0, 80.0))
        case = extra.with_branch_limit("LA", limit).with_branch_limit("LB", limit)
        case = case.with_generator_cost(
            "G3",
            cost_a=float(rng.uniform(0.0, 200.0)),
            cost_b=float(rng.uniform(5.0, 40.0)),
            cost_c=float(rng.uniform(0.0, 0.05)),
        ).with_generator_cost(
            "G4",
            cost_a=float(rng.uniform(0.0, 200.0)),
            cost_b=float(rng.uniform(5.0, 40.0)),
            cost_c=float(rng.uniform(0.0, 0.05)),
        )
        sens = compute_sensitivities(case)
        sens_r = reduced_sensitivities(case, ["LA"])
        qp = build_cscuc(case, inj, ConstraintLedger(), sens, sens_r)
        sol = solve_dispatch(qp, case, inj)
        best, _ = enumerate_commitments(qp)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best, abs=1e-5)


# ---------------------------------------------------------------------------
# corrective redispatch problem
# ---------------------------------------------------------------------------

def test_uncommitted_unit_stays_pinned_in_redispatch():
    # The outage is present (hard mode), so the problem operates the
    # post-outage network: the surviving line carries 60 of the 100 MW and
    # the rest must come from the local unit -- or be shed when it is off.
    case, inj, sens, sens_r = uc3()
    qp0 = build_cscopf(
        case, inj, ConstraintLedger(), RiskVector(), {"G3": 0}, sens, sens_r, hard=True
    )
    i = qp0.names.index("dp:G3")
    assert qp0.lb[i] == 0.0 and qp0.ub[i] == 0.0
    sol0 = solve_dispatch(qp0, case, inj)
    assert sol0.dp["G3"] == 0.0
    assert sol0.load_shed_mw == pytest.approx(40.0, abs=1e-6)

    qp1 = build_cscopf(
        case, inj, ConstraintLedger(), RiskVector(), {"G3": 1}, sens, sens_r, hard=True
    )
    i = qp1.names.index("dp:G3")
    assert (qp1.lb[i], qp1.ub[i]) == (0.0, 80.0)
    sol1 = solve_dispatch(qp1, case, inj)
    assert sol1.dp["G3"] == pytest.approx(40.0, abs=1e-6)
    assert sol1.load_shed_mw == pytest.approx(0.0, abs=1e-6)


def test_soft_mode_operates_the_intact_network():
    # While the outage is only anticipated, its security enters through the
    # priced risk terms alone: with every weight at zero (and the N-1 family
    # at its base limits) a point that is feasible on the intact network
    # needs no move at all, even though the anticipated outage would strand
    # 40 MW.
    case, inj, sens, sens_r = uc3()
    qp = build_cscopf(
        case,
        inj,
        ConstraintLedger(),
        RiskVector(lambda_b=1.0, lambda_c=0.0, lambda_t=0.0, lambda_n=0.0),
        {"G3": 0},
        sens,
        sens_r,
    )
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in sol.dp.values())
    assert sol.load_shed_mw == pytest.approx(0.0, abs=1e-9)
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_flow_square_weight_desaturates_the_vulnerable_line():
    # Same anticipated outage, nonzero flow-square weight: the priced term
    # sees the 50 MW riding the doomed line and pulls generation toward the
    # load bus once the unit there is committed.
    case, inj, sens, sens_r = uc3()
    qp = build_cscopf(
        case,
        inj,
        ConstraintLedger(),
        RiskVector(lambda_b=1.0, lambda_c=0.0, lambda_t=0.0, lambda_n=10000.0),
        {"G3": 1},
        sens,
        sens_r,
    )
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert sol.dp["G3"] > 20.0
    assert sol.load_shed_mw == pytest.approx(0.0, abs=1e-9)


def test_hard_mode_desaturates_corridor_exactly():
    """Moving t MW off the corridor costs 0.02 t^2 + t, so the mandated 20 MW
    binds: dp = (-20, +20), cost 28.  The post-solution flows re-simulated
    with the DC power flow confirm the export really dropped by 20.
    """
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    qp = build_cscopf(
        case, inj, ledger, RiskVector(), {}, sens, sens, hard=True
    )
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert sol.dp["G1"] == pytest.approx(-20.0, abs=1e-6)
    assert sol.dp["G2"] == pytest.approx(20.0, abs=1e-6)
    assert sol.cost == pytest.approx(28.0, abs=1e-5)
    assert sol.penalty == pytest.approx(0.0, abs=1e-6)
    before = dc_power_flow(case, inj)
    after = dc_power_flow(case, inj.shifted(dp=sol.dp, dl=sol.dl))
    export_before = before.flow_mw["LA"] + before.flow_mw["LB"]
    export_after = after.flow_mw["LA"] + after.flow_mw["LB"]
    assert export_before - export_after == pytest.approx(20.0, abs=1e-6)
    assert_dispatch_invariants(sol, qp)


def test_heavy_penalty_agrees_with_hard_mode():
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    hard = solve_dispatch(
        build_cscopf(case, inj, ledger, RiskVector(), {}, sens, sens, hard=True),
        case,
        inj,
    )
    soft = solve_dispatch(
        build_cscopf(
            case, inj, ledger, RiskVector(lambda_c=1.0e6), {}, sens, sens
        ),
        case,
        inj,
    )
    for gid in ("G1", "G2"):
        assert abs(hard.dp[gid] - soft.dp[gid]) <= 0.1


def test_hinge_penalty_buys_partial_compliance():
    """At weight 1.5 the marginal redispatch cost 0.04 t + 1 meets the penalty
    at t = 12.5, leaving 7.5 MW of priced violation.
    """
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    qp = build_cscopf(
        case, inj, ledger, RiskVector(lambda_c=1.5), {}, sens, sens
    )
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert sol.dp["G1"] == pytest.approx(-12.5, abs=1e-6)
    assert sol.slack["cut:corridor"] == pytest.approx(7.5, abs=1e-6)
    assert sol.cost == pytest.approx(15.625, abs=1e-6)
    assert sol.penalty == pytest.approx(1.5 * 7.5, abs=1e-6)
    assert sol.objective == pytest.approx(26.875, abs=1e-6)


def test_penalty_weight_sweep_is_monotone():
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    desat = []
    for lam in (0.5, 1.5, 5.0):
        sol = solve_dispatch(
            build_cscopf(
                case, inj, ledger, RiskVector(lambda_c=lam), {}, sens, sens
            ),
            case,
            inj,
        )
        desat.append(-sol.dp["G1"])
    assert desat[0] == pytest.approx(0.0, abs=1e-6)
    assert desat[1] == pytest.approx(12.5, abs=1e-6)
    assert desat[2] == pytest.approx(20.0, abs=1e-6)
    assert desat[0] < desat[1] < desat[2]


def test_zero_weights_leave_soft_rows_inert():
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    qp = build_cscopf(
        case,
        inj,
        ledger,
        RiskVector(lambda_b=1.0, lambda_c=0.0, lambda_t=0.0, lambda_n=0.0),
        {},
        sens,
        sens,
    )
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in sol.dp.values())
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_affine_penalty_is_exact_linear_surcharge():
    """With the affine form the objective differs from the penalty-free build
    by exactly weight * (row expression - rhs), checked at random points.
    """
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    plain = build_cscopf(
        case,
        inj,
        ledger,
        RiskVector(lambda_c=0.0),
        {},
        sens,
        sens,
    )
    affine = build_cscopf(
        case,
        inj,
        ledger,
        RiskVector(lambda_c=1.5),
        {},
        sens,
        sens,
        penalty_form="affine",
    )
    assert affine.names == plain.names  # no slack variable in either build
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-50.0, 50.0, size=len(plain.names))
        expr = x[plain.names.index("dp:G1")]
        want = 1.5 * (expr - (-20.0))
        got = affine.objective(x) - plain.objective(x)
        assert got == pytest.approx(want, abs=1e-9)


def test_affine_penalty_rewards_over_desaturation_up_to_bounds():
    """Weight 5 exceeds the marginal cost everywhere (0.04 t + 1 at t = 100 is
    5), so the affine surcharge drags the export reduction to the box edge.
    """
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    sol = solve_dispatch(
        build_cscopf(
            case,
            inj,
            ledger,
            RiskVector(lambda_c=5.0),
            {},
            sens,
            sens,
            penalty_form="affine",
        ),
        case,
        inj,
    )
    assert sol.status == "optimal"
    assert sol.dp["G1"] == pytest.approx(-100.0, abs=1e-6)
    assert sol.dp["G2"] == pytest.approx(100.0, abs=1e-6)


def test_infeasible_hard_requirement_is_reported():
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row(rhs=-1000.0))
    sol = solve_dispatch(
        build_cscopf(case, inj, ledger, RiskVector(), {}, sens, sens, hard=True),
        case,
        inj,
    )
    assert sol.status == "infeasible"
    assert sol.dp == {} and sol.dl == {} and sol.objective is None


def test_solver_beats_random_feasible_points():
    case, inj, sens = corr2()
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    qp = build_cscopf(case, inj, ledger, RiskVector(), {}, sens, sens, hard=True)
    sol = solve_dispatch(qp, case, inj)
    assert sol.status == "optimal"
    rng = np.random.default_rng(11)
    i1, i2 = qp.names.index("dp:G1"), qp.names.index("dp:G2")
    checked = 0
    for _ in range(100):
        x = np.zeros(len(qp.names))
        x[i1] = rng.uniform(-100.0, -20.0)
        x[i2] = -x[i1]
        feasible = (
            np.all(x >= qp.lb - 1e-12)
            and np.all(x <= qp.ub + 1e-12)
            and np.max(np.abs(qp.a_eq @ x - qp.b_eq)) <= 1e-12
            and np.max(qp.a_ub @ x - qp.b_ub) <= 1e-12
        )
        assert feasible
        checked += 1
        assert qp.objective(x) >= sol.objective - 1e-9
    assert checked == 100


# ---------------------------------------------------------------------------
# vulnerable-line flow term
# ---------------------------------------------------------------------------

def test_vulnerable_flow_term_is_squared_per_unit_loading():
    """The quadratic surcharge equals weight * (flow / base_mva)^2 for the
    line that the outage list names, with flow reconstructed by superposition
    from the intact-topology factors.
    """
    case, inj, sens = corr2()
    sens_r = reduced_sensitivities(case, ["LB"])
    bare = build_cscopf(
        case,
        inj,
        ConstraintLedger(),
        RiskVector(lambda_n=0.0),
        {},
        sens,
        sens_r,
    )
    priced = build_cscopf(
        case,
        inj,
        ConstraintLedger(),
        RiskVector(lambda_n=40.0),
        {},
        sens,
        sens_r,
    )
    f0 = sens.flows_from_injections(case, inj)["LB"]
    assert f0 == pytest.approx(50.0, abs=1e-9)
    row = sens.ptdf_row("LB")
    coeff = {
        "dp:G1": row[sens.bus_index(1)],
        "dp:G2": row[sens.bus_index(2)],
        "dl:D2": -row[sens.bus_index(2)],
    }
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(-40.0, 40.0, size=len(bare.names))
        flow = f0 + sum(
            c * x[bare.names.index(name)] for name, c in coeff.items()
        )
        want = 40.0 * (flow / case.base_mva) ** 2
        got = priced.objective(x) - bare.objective(x)
        assert got == pytest.approx(want, abs=1e-9)


def test_vulnerable_flow_term_drives_loading_down():
    case, inj, sens = corr2()
    sens_r = reduced_sensitivities(case, ["LB"])
    sol = solve_dispatch(
        build_cscopf(
            case,
            inj,
            ConstraintLedger(),
            RiskVector(lambda_n=1.0e5),
            {},
            sens,
            sens_r,
        ),
        case,
        inj,
    )
    assert sol.status == "optimal"
    after = sens.flows_from_injections(case, inj.shifted(dp=sol.dp, dl=sol.dl))
    assert abs(after["LB"]) < 5.0
    assert sol.penalty > 0.0


# ---------------------------------------------------------------------------
# post-outage overload rows
# ---------------------------------------------------------------------------

def test_overload_rows_match_brute_force_resimulation():
    """Each emitted (line, outage) pair must agree with actually removing the
    outage branch and rerunning the DC power flow, both on membership and on
    the estimated flow behind the right-hand side.
    """
    case = parse_case(PAR3_CASE)
    inj = InjectionState(gen_p={"G1": 100.0}, load_p={"D2": 100.0})
    reduced = apply_contingency(case, ["LA"])
    sens_r = reduced_sensitivities(case, ["LA"])
    rows = n1_overload_rows(case, inj, sens_r)

    expected = {}
    for k in ("LB", "LC"):
        sub = apply_contingency(reduced, [k])
        flows = dc_power_flow(sub, inj).flow_mw
        for e, f in flows.items():
            if abs(f) > case.branch(e).rating:
                expected[(e, k)] = f
    assert {(r.label.split(":")[1].split("|")[0], r.label.split("|")[1]) for r in rows} == set(
        expected
    )
    assert set(expected) == {("LC", "LB"), ("LB", "LC")}
    for f in expected.values():
        assert f == pytest.approx(100.0, abs=1e-9)

    for r in rows:
        e, k = r.label.split(":")[1].split("|")
        assert r.kind == "branch-n1"
        assert r.rhs == pytest.approx(case.branch(e).rating - expected[(e, k)], abs=1e-9)
        fe = sens_r.ptdf_row(e)
        fk = sens_r.ptdf_row(k)
        lodf = sens_r.lodf[sens_r.branch_index(e), sens_r.branch_index(k)]
        assert lodf == pytest.approx(1.0, abs=1e-9)
        for j, bus in enumerate(sens_r.bus_ids):
            assert r.bus_coeff.get(bus, 0.0) == pytest.approx(
                fe[j] + lodf * fk[j], abs=1e-9
            )


def test_overload_rows_skip_bridge_outages():
    case, inj, sens, sens_r = uc3()
    assert n1_overload_rows(case, inj, sens_r) == []


def test_overload_screen_threshold_emits_margin_rows():
    case = parse_case(PAR3_CASE)
    wide = case.with_branch_limit("LA", 120.0).with_branch_limit(
        "LB", 120.0
    ).with_branch_limit("LC", 120.0)
    inj = InjectionState(gen_p={"G1": 100.0}, load_p={"D2": 100.0})
    sens_r = reduced_sensitivities(wide, ["LA"])
    assert n1_overload_rows(wide, inj, sens_r) == []
    rows = n1_overload_rows(wide, inj, sens_r, threshold=0.6)
    assert {r.label for r in rows} == {"n1:LC|LB", "n1:LB|LC"}
    for r in rows:
        assert r.rhs == pytest.approx(20.0, abs=1e-9)


def test_overload_rhs_scaling_relaxes_by_risk_weight():
    """Deficits (negative right-hand side) scale by min(weight, 1): low risk
    weight tolerates part of the overload, weight above one never demands
    over-correction.  Headroom (positive right-hand side) scales literally,
    so weight below one is conservative and above one is permissive.
    """
    case = parse_case(PAR3_CASE)
    inj = InjectionState(gen_p={"G1": 100.0}, load_p={"D2": 100.0})
    sens = compute_sensitivities(case)
    sens_r = reduced_sensitivities(case, ["LA"])
    ledger = ConstraintLedger()
    for r in n1_overload_rows(case, inj, sens_r):
        ledger.add(r)
    ledger.add(
        ConstraintRow(
            kind="branch-n1",
            label="n1:margin",
            bus_coeff={2: -1.0},
            gen_coeff={},
            rhs=20.0,
        )
    )
    ledger.add(corridor_row(rhs=-20.0))

    def rhs_of(qp, label):
        return qp.b_ub[qp.ub_names.index(label)]

    for lam_b, neg_want, pos_want in ((0.5, -15.0, 10.0), (2.0, -30.0, 40.0), (1.0, -30.0, 20.0)):
        qp = build_cscopf(
            case,
            inj,
            ledger,
            RiskVector(lambda_b=lam_b),
            {},
            sens,
            sens_r,
            hard=True,
        )
        assert rhs_of(qp, "n1:LC|LB") == pytest.approx(neg_want, abs=1e-9)
        assert rhs_of(qp, "n1:margin") == pytest.approx(pos_want, abs=1e-9)
        # desaturation and stability requirements are never blunted by the
        # branch-risk weight
        assert rhs_of(qp, "cut:corridor") == pytest.approx(-20.0, abs=1e-9)


# ---------------------------------------------------------------------------
# ledger
# ---------------------------------------------------------------------------

def test_ledger_deduplicates_on_coefficients():
    ledger = ConstraintLedger()
    assert ledger.add(corridor_row()) is True
    relabeled = ConstraintRow(
        kind="cutset",
        label="cut:other-name",
        bus_coeff={1: 1.0 + 1e-12},
        gen_coeff={},
        rhs=-20.0,
        provenance="second sighting",
    )
    assert ledger.add(relabeled) is False
    assert len(ledger) == 1
    assert ledger.add(corridor_row(rhs=-25.0)) is True
    assert len(ledger) == 2


def test_ledger_round_trips_through_json():
    ledger = ConstraintLedger()
    ledger.add(corridor_row())
    ledger.add(
        ConstraintRow(
            kind="stability",
            label="tr:cm",
            bus_coeff={},
            gen_coeff={"G1": 1.0, "G2": 1.0},
            rhs=-59.0,
            provenance="margin sweep",
        )
    )
    ledger.add(
        ConstraintRow(
            kind="branch-n1",
            label="n1:LC|LB",
            bus_coeff={1: 0.25, 2: -1.0},
            gen_coeff={},
            rhs=-30.0,
        )
    )
    blob = ledger.to_json()
    json.loads(blob)  # well-formed
    back = ConstraintLedger.from_json(blob)
    assert len(back) == len(ledger)
    for a, b in zip(ledger, back):
        assert (a.kind, a.label, a.rhs, a.provenance) == (b.kind, b.label, b.rhs, b.provenance)
        assert dict(a.bus_coeff) == dict(b.bus_coeff)
        assert dict(a.gen_coeff) == dict(b.gen_coeff)
    again = ConstraintLedger.from_json(back.to_json())
    assert again.to_json() == back.to_json()


def test_ledger_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ConstraintRow(kind="mystery", label="x", bus_coeff={}, gen_coeff={}, rhs=0.0)


# ---------------------------------------------------------------------------
# structure and reporting
# ---------------------------------------------------------------------------

def test_problem_structure_uses_named_variables_and_rows():
    case, inj, sens, sens_r = uc3()
    qp = build_cscuc(case, inj, ConstraintLedger(), sens, sens_r)
    assert "dp:G1" in qp.names and "dl:D2" in qp.names and "u:G3" in qp.names
    assert "balance" in qp.eq_names
    assert "flow+:LB" in qp.ub_names and "flow-:LB" in qp.ub_names
    assert "commit+:G3" in qp.ub_names and "commit-:G3" in qp.ub_names
    bal = qp.a_eq[qp.eq_names.index("balance")]
    for name, want in (("dp:G1", 1.0), ("dp:G3", 1.0), ("dl:D2", -1.0)):
        assert bal[qp.names.index(name)] == want
    assert qp.integer[qp.names.index("u:G3")]


def test_solution_values_are_plain_python_numbers():
    case, inj, sens, sens_r = uc3()
    sol = solve_dispatch(
        build_cscuc(case, inj, ConstraintLedger(), sens, sens_r), case, inj
    )
    blob = json.dumps({"dp": sol.dp, "dl": sol.dl, "u": sol.u, "obj": sol.objective})
    assert json.loads(blob)["u"] == {"G3": 1}
    assert all(type(v) is float for v in sol.dp.values())
    assert all(type(v) is int for v in sol.u.values())
    assert sol.kkt_residual is not None and sol.kkt_residual <= 1e-6


def test_negative_quadratic_cost_is_rejected():
    case, inj, sens, sens_r = uc3()
    bad = case.with_generator_cost("G1", cost_c=-0.5)
    with pytest.raises(ValueError):
        build_cscuc(bad, inj, ConstraintLedger(), sens, sens_r)


def test_islanded_injection_is_rejected():
    """A contingency that cuts off a bus still carrying load cannot be priced
    with linear factors; the builder must refuse rather than silently drop
    the stranded demand.
    """
    case, inj, sens, _ = uc3()
    sens_r = reduced_sensitivities(case, ["LA", "LB"])
    with pytest.raises(ValueError):
        build_cscuc(case, inj, ConstraintLedger(), sens, sens_r)


def test_cycles_to_clear_arithmetic():
    case, _, _, _ = uc3()
    big = case.with_generator_cost  # noqa: F841  (documented helper presence)
    assert cycles_to_clear(case, ["G1"], 0.0) == 0
    assert cycles_to_clear(case, ["G1"], -5.0) == 0
    # 10% of G1's 200 MW per cycle = 20 MW; 118 MW needs 6 cycles
    assert cycles_to_clear(case, ["G1"], 118.0) == 6
    assert cycles_to_clear(case, ["G1"], 20.0) == 1
    assert cycles_to_clear(case, ["G1"], 118.0, frac_per_cycle=0.5) == 2
    with pytest.raises(ValueError):
        cycles_to_clear(case, [], 10.0)


def test_risk_vector_coupling_and_validation():
    lam = RiskVector.coupled(0.1)
    assert (lam.lambda_b, lam.lambda_c, lam.lambda_t) == (0.1, 0.1, 0.1)
    assert lam.lambda_n == pytest.approx(10.0)
    with pytest.raises(ValueError):
        RiskVector(lambda_b=-0.1)
