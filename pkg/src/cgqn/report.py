"""Per-iteration parallelism report built after the fact from stored traces."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .equivalence import (
    FLOOR,
    PARALLEL_RTOL,
    AForm,
    build_A,
    check_corollary_U,
    extract_W,
    measure_delta,
    principal_angle,
)
from .errors import CgqnError

ANGLE_TOL = 1e-8
DELTA_RTOL = 1e-8


@dataclass(frozen=True)
class ReportRow:
    k: int
    delta_measured: float
    delta_predicted: Optional[float]
    angle_residual: float
    w_residual: float
    u_residual: float
    assumption_residual: float
    grad_norm: float

    @property
    def delta_error(self):
        if self.delta_predicted is None:
            return None
        return abs(self.delta_measured - self.delta_predicted) / max(abs(self.delta_predicted), FLOOR)


@dataclass(frozen=True)
class ParallelismReport:
    rows: tuple
    r_cg: int
    r_qn: int
    truncated: bool
    scheme: str
    failure: Optional[str] = None

    def max_of(self, field):
        values = [getattr(row, field) for row in self.rows]
        values = [v for v in values if v is not None]
        return max(values) if values else 0.0

    def max_delta_error(self):
        errs = [row.delta_error for row in self.rows if row.delta_error is not None]
        return max(errs) if errs else 0.0

    @property
    def parallel(self):
        return (
            self.failure is None
            and self.max_of("angle_residual") <= ANGLE_TOL
            and self.max_of("w_residual") <= PARALLEL_RTOL
            and self.max_of("u_residual") <= PARALLEL_RTOL
            and self.max_delta_error() <= DELTA_RTOL
        )

    @property
    def verdict(self):
        if self.failure is not None:
            return "BREAKDOWN"
        return "PARALLEL" if self.parallel else "NOT_PARALLEL"

    def summary(self):
        return {
            "scheme": self.scheme,
            "r_cg": self.r_cg,
            "r_qn": self.r_qn,
            "iterations_compared": len(self.rows),
            "truncated": self.truncated,
            "max_angle_residual": self.max_of("angle_residual"),
            "max_w_residual": self.max_of("w_residual"),
            "max_u_residual": self.max_of("u_residual"),
            "max_assumption_residual": self.max_of("assumption_residual"),
            "max_delta_relative_error": self.max_delta_error(),
            "failure": self.failure,
            "verdict": self.verdict,
        }

    def as_dicts(self):
        return [asdict(row) for row in self.rows]


def build_report(cg_trace, qn_trace, scheme, H):
    """Compare QN directions with CG directions and evaluate every parallelism check.

    ``H`` is the problem Hessian, needed to rebuild the update contexts.
    Rows cover the iterations where both runs produced a direction.
    """
    cg_dirs = cg_trace.directions
    qn_dirs = qn_trace.directions
    m = min(len(cg_dirs), len(qn_dirs))
    rows = []
    for k in range(m):
        state = qn_trace.states[k]
        g = state.g
        B = qn_trace.B[k]
        gnorm = float(np.linalg.norm(g))
        delta = measure_delta(state.p, B, g)
        angle = principal_angle(state.p, cg_dirs[k])
        if k == 0:
            predicted = 1.0
            A = np.eye(g.shape[0])
            u_res = 0.0
            assumption = 0.0
        else:
            ctx = qn_trace.context(k, H)
            try:
                predicted = scheme.predicted_delta(ctx)
            except CgqnError:
                predicted = None
            A = build_A(ctx.p_prev, g, ctx.g_prev, AForm.P)
            u_res = check_corollary_U(B - ctx.B_prev, A, ctx.B_prev, ctx.p_prev, g, ctx.g_prev, delta)
            assumption = float(np.linalg.norm(ctx.B_prev @ g - g) / max(gnorm, FLOOR))
        W = extract_W(B, A)
        w_res = float(np.linalg.norm(W @ g - g / delta) / max(gnorm, FLOOR))
        rows.append(ReportRow(k, delta, predicted, angle, w_res, u_res, assumption, gnorm))
    failure = None
    if qn_trace.failure is not None:
        failure = f"{type(qn_trace.failure).__name__}: {qn_trace.failure}"
    truncated = len(cg_dirs) != len(qn_dirs)
    return ParallelismReport(tuple(rows), cg_trace.r, qn_trace.r, truncated, scheme.name, failure)
