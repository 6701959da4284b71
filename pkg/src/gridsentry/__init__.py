"""Preventive-corrective dispatch toolkit for grids under wildfire risk."""

from .grid_model import (
    ArcFault,
    Branch,
    Bus,
    CaseError,
    Contingency,
    Generator,
    GridCase,
    InjectionState,
    Load,
    apply_contingency,
    load_case,
    load_contingency,
    load_injections,
    parse_case,
    save_contingency,
    save_injections,
    serialize_case,
)
from .sensitivity import (
    DcFlowResult,
    SensitivitySet,
    compute_sensitivities,
    dc_power_flow,
    reduced_sensitivities,
)
from .cutset import (
    FtConfig,
    SaturatedCutset,
    cutset_constraint,
    find_saturated_cutsets,
    transfer_margin,
)
from .qp import QuadraticProgram, QpSolution, solve_miqp, solve_qp, write_lp
from .dispatch import (
    ConstraintLedger,
    ConstraintRow,
    DispatchSolution,
    RiskVector,
    build_cscopf,
    build_cscuc,
    cycles_to_clear,
    n1_overload_rows,
    solve_dispatch,
)
from .transient import (
    OmibDecomposition,
    SimParams,
    SwingResult,
    compute_tscf,
    compute_tsi,
    run_tds,
    shift_dispatch,
    shift_room,
    stability_constraint,
    transient_correction,
)
from .tscp import (
    LoadKde,
    ScenarioSet,
    TscpMetrics,
    TscpModel,
    evaluate,
    fit_kde,
    fit_tscp,
    label_scenarios,
    predict_tscf,
    sample_scenarios,
)
from .orchestrator import (
    DayAheadConfig,
    DayAheadResult,
    RealTimeConfig,
    RealTimeResult,
    RunLog,
    RunRecord,
    SweepResult,
    load_history_csv,
    run_day_ahead,
    run_real_time,
    sensitivity_sweep,
    with_commitment,
)

__version__ = "0.1.0"
