"""Checks and predictions for CG/QN search-direction parallelism.

Every B_k can be written as A_k^T W_k A_k with the rank-one modified
identity A_k below. p_k is parallel to the CG direction, p_k = delta * p_k^CG,
exactly when W_k g_k = g_k / delta. The functions here build A_k, extract
W_k, test that condition and its update-matrix form, and evaluate the
closed-form predictions for delta, the degenerate values and the positive
definiteness threshold of the Broyden family.
"""

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateDelta, DegeneratePhi, InvalidScheme
from .linalg import is_positive_definite, solve_linear

PARALLEL_RTOL = 1e-8
DEGENERATE_RTOL = 1e-10
ORTHOGONALITY_LIMIT = 1e-6
FLOOR = 1e-300


class AForm(enum.Enum):
    """Which expression builds A_k.

    CG uses the previous CG direction and g_{k-1}^T g_{k-1}; P uses the
    previous (possibly rescaled) search direction and p_{k-1}^T g_{k-1}.
    The two coincide whenever p_{k-1} is parallel to p_{k-1}^CG.
    """

    CG = "cg"
    P = "p"


def _rank_one_scale(p_prev, g, g_prev, form):
    if form is AForm.CG:
        denom = float(g_prev @ g_prev)
        if denom <= FLOOR:
            raise ValueError("g_{k-1} vanishes; A_k undefined")
        return 1.0 / denom
    denom = float(p_prev @ g_prev)
    if denom == 0.0:
        raise ValueError("p_{k-1}^T g_{k-1} = 0; A_k undefined")
    return -1.0 / denom


def build_A(p_prev, g, g_prev, form=AForm.P):
    """A_k = I + s p_{k-1} g_k^T; the identity when there is no previous step."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if p_prev is None:
        return np.eye(n)
    s = _rank_one_scale(p_prev, g, g_prev, form)
    return np.eye(n) + s * np.outer(p_prev, g)


def invert_A(p_prev, g, g_prev, form=AForm.P):
    """Closed-form inverse I - s p_{k-1} g_k^T, valid when g_k^T p_{k-1} = 0."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if p_prev is None:
        return np.eye(n)
    scale = np.linalg.norm(g) * np.linalg.norm(p_prev)
    if scale > 0 and abs(float(g @ p_prev)) > ORTHOGONALITY_LIMIT * scale:
        raise ValueError(
            f"g_k is not orthogonal to p_(k-1) (relative {abs(g @ p_prev) / scale:.2e}); "
            "iterates do not come from an exact line search"
        )
    s = _rank_one_scale(p_prev, g, g_prev, form)
    return np.eye(n) - s * np.outer(p_prev, g)


def extract_W(B, A):
    """W = A^{-T} B A^{-1}, computed with two solves against A^T."""
    Y = solve_linear(A.T, B)
    return solve_linear(A.T, Y.T).T


class TheoremCheck(NamedTuple):
    holds: bool
    delta: Optional[float]
    residual: float


def check_theorem_iff(B, A, g, rtol=PARALLEL_RTOL):
    """Test B A^{-1} g = g / delta (and W g = g / delta) for the best delta.

    delta is taken from the quotient g^T g / g^T (B A^{-1} g). ``holds`` is
    decided on the B-form residual; the reported residual is the larger of
    the B-form and W-form residuals, since W needs two extra solves with A
    and can lose accuracy when A is ill-conditioned.
    """
    g = np.asarray(g, dtype=np.float64)
    gg = float(g @ g)
    if gg <= 0.0:
        raise ValueError("g must be nonzero")
    v = B @ solve_linear(A, g)
    gv = float(g @ v)
    if gv == 0.0:
        return TheoremCheck(False, None, float("inf"))
    delta = gg / gv
    res_b = np.linalg.norm(v - g / delta) / max(np.linalg.norm(v), FLOOR)
    Wg = extract_W(B, A) @ g
    res_w = np.linalg.norm(Wg - g / delta) / max(np.linalg.norm(Wg), FLOOR)
    return TheoremCheck(bool(res_b <= rtol), delta, float(max(res_b, res_w)))


def check_corollary_U(U, A, B_prev, p_prev, g, g_prev, delta):
    """Relative residual of U A^{-1} g = (1/delta - 1) g - (g^T g / curvature) g_{k-1}.

    Normalised by ||g / delta||, the size of the right-hand side of the
    equivalent condition on B.
    """
    curvature = float(p_prev @ (B_prev @ p_prev))
    if curvature == 0.0:
        raise ValueError("p_{k-1}^T B_{k-1} p_{k-1} = 0")
    gg = float(g @ g)
    lhs = U @ solve_linear(A, g)
    rhs = (1.0 / delta - 1.0) * g - (gg / curvature) * g_prev
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(g) / abs(delta), FLOOR))


@dataclass(frozen=True)
class DegenerateValues:
    """Excluded scaling delta_hat and degenerate Broyden parameter phi_hat."""

    delta_hat: float
    phi_hat: float
    curvature: float
    gnorm2: float


def degenerate_values(gnorm2, curvature):
    if curvature == 0.0:
        raise ValueError("curvature must be nonzero")
    if gnorm2 <= 0.0:
        raise ValueError("gnorm2 must be positive")
    ratio = gnorm2 / curvature
    delta_hat = float("inf") if 1.0 + ratio == 0.0 else 1.0 / (1.0 + ratio)
    return DegenerateValues(delta_hat, -curvature / gnorm2, curvature, gnorm2)


def is_excluded_delta(delta, gnorm2, curvature, rtol=DEGENERATE_RTOL):
    """True when ``delta`` is within relative ``rtol`` of delta_hat."""
    delta_hat = degenerate_values(gnorm2, curvature).delta_hat
    return abs(delta - delta_hat) <= rtol * abs(delta_hat)


def predict_delta_broyden(phi, gnorm2, curvature, rtol=DEGENERATE_RTOL):
    """delta(phi) = 1 / (1 + phi g^T g / p^T B p)."""
    phi_hat = -curvature / gnorm2
    if abs(phi - phi_hat) <= rtol * abs(phi_hat):
        raise DegeneratePhi(f"phi = {phi!r} is the degenerate value {phi_hat!r}", phi, phi_hat)
    return 1.0 / (1.0 + phi * gnorm2 / curvature)


def predict_delta_rank_one(alpha_prev, alpha, gnorm2, curvature, rtol=DEGENERATE_RTOL):
    """delta = 1 / (1 + (alpha / alpha_prev) g^T g / p^T B p)."""
    if alpha_prev == 0.0:
        raise InvalidScheme("alpha_{k-1} must be nonzero")
    ratio = gnorm2 / curvature
    denom = 1.0 + (alpha / alpha_prev) * ratio
    dv = degenerate_values(gnorm2, curvature)
    if abs(alpha - alpha_prev) <= rtol * abs(alpha_prev):
        raise DegenerateDelta("alpha_k = alpha_{k-1} gives the excluded value delta_hat", dv.delta_hat, dv.delta_hat)
    if abs(denom) <= rtol * (1.0 + abs(alpha / alpha_prev * ratio)):
        raise DegenerateDelta("delta diverges for these alphas", float("inf"), dv.delta_hat)
    return 1.0 / denom


def measure_delta(p, B, g):
    """(p^T B p) / (g^T g)."""
    gg = float(g @ g)
    if gg <= 0.0:
        raise ValueError("g must be nonzero")
    return float(p @ (B @ p)) / gg


class PdCheck(NamedTuple):
    threshold: float
    satisfied: bool
    pd_observed: bool

    @property
    def agrees(self):
        return self.satisfied == self.pd_observed


def pd_analysis(B_prev, phi, gnorm2, curvature, B_new):
    """Compare the Broyden threshold phi > -curvature/gnorm2 with a Cholesky test of B_new."""
    if not is_positive_definite(B_prev):
        raise ValueError("B_{k-1} must be positive definite")
    threshold = -curvature / gnorm2
    return PdCheck(threshold, bool(phi > threshold), is_positive_definite(B_new))


def span_projector(*vectors):
    """Orthogonal projector onto the span of the given vectors."""
    V = np.column_stack(vectors)
    Q, R = np.linalg.qr(V)
    keep = np.abs(np.diag(R)) > 1e-14 * max(np.max(np.abs(R)), FLOOR)
    Q = Q[:, keep]
    return Q @ Q.T


def secant_and_span_residuals(U, p_prev, H, B_prev, g, g_prev):
    """Residuals of the secant condition and of range(U) in span{g_{k-1}, g_k}."""
    target = H @ p_prev - B_prev @ p_prev
    secant = np.linalg.norm(U @ p_prev - target) / max(1.0, np.linalg.norm(target))
    P = span_projector(g_prev, g)
    outside = U - P @ U
    span = np.linalg.norm(outside, "fro") / max(FLOOR, np.linalg.norm(U, "fro"))
    return float(secant), float(span)


def w_closed_forms(B_prev, p_prev, theta_prev, g, g_prev, phi):
    """Closed forms of W for the BFGS matrix and for a general Broyden member.

    W0 = B_{k-1} + (1/theta - 1) g_{k-1} g_{k-1}^T / curvature
    Wphi = W0 + phi g_k g_k^T / curvature
    """
    if theta_prev == 0.0:
        raise ValueError("theta_{k-1} must be nonzero")
    curvature = float(p_prev @ (B_prev @ p_prev))
    if curvature == 0.0:
        raise ValueError("curvature must be nonzero")
    W0 = B_prev + (1.0 / theta_prev - 1.0) / curvature * np.outer(g_prev, g_prev)
    Wphi = W0 + phi / curvature * np.outer(g, g)
    return W0, Wphi


def principal_angle(a, b):
    """Angle between the lines spanned by ``a`` and ``b``, in [0, pi/2].

    Uses 2 atan2(|a^ - b^|, |a^ + b^|) after aligning signs, which stays
    accurate for nearly parallel vectors where arccos does not.
    """
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0 if na == nb else float(np.pi / 2)
    ua, ub = a / na, b / nb
    if ua @ ub < 0:
        ub = -ub
    return float(2.0 * np.arctan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub)))
