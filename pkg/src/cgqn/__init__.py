"""Check when quasi-Newton search directions stay parallel to conjugate gradient
directions on strictly convex quadratics with exact line search."""

from .cg import IterationState, Trace, cg_direction, cg_run, exact_step
from .equivalence import (
    AForm,
    build_A,
    check_corollary_U,
    check_theorem_iff,
    degenerate_values,
    extract_W,
    invert_A,
    measure_delta,
    pd_analysis,
    predict_delta_broyden,
    predict_delta_rank_one,
    principal_angle,
    w_closed_forms,
)
from .errors import (
    BreakdownError,
    CgqnError,
    CurvatureBreakdown,
    DegenerateDelta,
    DegeneratePhi,
    InvalidScheme,
    ProblemError,
    SchemeBreakdown,
    SingularMatrix,
    Sr1Degenerate,
)
from .problem import QuadraticProblem, SpectrumSpec, load_problem, qpa, random_spd_problem, save_problem
from .qn import (
    BroydenFamily,
    GeneralRankOne,
    QnTrace,
    RankOneForDelta,
    Sr1Secant,
    Unchanged,
    UpdateContext,
    UpdateScheme,
    WBased,
    qn_run,
)
from .report import ParallelismReport, ReportRow, build_report

__version__ = "0.1.0"
