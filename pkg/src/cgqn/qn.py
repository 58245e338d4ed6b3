"""Quasi-Newton iteration B_k p_k = -g_k with exact line search and pluggable updates.

B_0 = I. At the start of iteration k >= 1 the scheme forms B_k from the
iteration k-1 quantities; the direction is then a dense solve.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cg import IterationState, default_max_iter, default_tol, exact_step
from .equivalence import (
    DEGENERATE_RTOL,
    PARALLEL_RTOL,
    AForm,
    build_A,
    degenerate_values,
    is_excluded_delta,
    predict_delta_broyden,
    predict_delta_rank_one,
)
from .errors import (
    DegenerateDelta,
    DegeneratePhi,
    InvalidScheme,
    SchemeBreakdown,
    SingularMatrix,
    Sr1Degenerate,
)
from .linalg import solve_linear

log = logging.getLogger(__name__)


def qn_direction(B, g, k=None):
    try:
        return solve_linear(B, -g)
    except SingularMatrix as exc:
        raise SchemeBreakdown(f"B_{k} is singular: {exc}", k) from exc


def _curvature(B_prev, p_prev):
    return float(p_prev @ (B_prev @ p_prev))


# -- update formulas ---------------------------------------------------------


def broyden_w(B_prev, p_prev, H):
    Hp = H @ p_prev
    Bp = B_prev @ p_prev
    return Hp / float(p_prev @ Hp) - Bp / float(p_prev @ Bp)


def broyden_update(B_prev, p_prev, H, phi):
    """One-parameter Broyden family; phi = 0 is BFGS, phi = 1 is DFP."""
    Hp = H @ p_prev
    Bp = B_prev @ p_prev
    pHp = float(p_prev @ Hp)
    pBp = float(p_prev @ Bp)
    scale = float(p_prev @ p_prev)
    if pHp <= 1e-14 * scale * np.linalg.norm(H, "fro"):
        raise SchemeBreakdown(f"p^T H p = {pHp:.3e} is not positive")
    if abs(pBp) <= 1e-300:
        raise SchemeBreakdown("p^T B p vanishes")
    w = Hp / pHp - Bp / pBp
    return B_prev + np.outer(Hp, Hp) / pHp - np.outer(Bp, Bp) / pBp + phi * pBp * np.outer(w, w)


def general_rank_one_update(B_prev, p_prev, g, g_prev, alpha_prev, alpha):
    """B + beta u u^T with u = alpha g - alpha_prev g_prev, beta = 1/(alpha_prev (alpha - alpha_prev) p^T B p)."""
    _check_alphas(alpha_prev, alpha)
    curvature = _curvature(B_prev, p_prev)
    if curvature == 0.0:
        raise SchemeBreakdown("p^T B p vanishes")
    u = alpha * g - alpha_prev * g_prev
    beta = 1.0 / (alpha_prev * (alpha - alpha_prev) * curvature)
    return B_prev + beta * np.outer(u, u)


def sr1_secant_update(B_prev, p_prev, H, theta_prev=None):
    """Symmetric rank-one update fixed by the secant condition B_k p = H p."""
    u = H @ p_prev - B_prev @ p_prev
    denom = float(p_prev @ u)
    threshold = 1e-12 * float(p_prev @ p_prev) * np.linalg.norm(H - B_prev, "fro")
    if not abs(denom) > threshold:
        raise Sr1Degenerate(
            f"SR1 denominator p^T (H - B) p = {denom:.3e} (theta_prev = {theta_prev})", theta_prev
        )
    return B_prev + np.outer(u, u) / denom


def rank_one_for_delta(B_prev, p_prev, g, g_prev, delta, rtol=DEGENERATE_RTOL):
    """Symmetric rank-one update whose next direction is delta * p^CG."""
    if delta == 0.0:
        raise InvalidScheme("delta must be nonzero")
    curvature = _curvature(B_prev, p_prev)
    if curvature == 0.0:
        raise SchemeBreakdown("p^T B p vanishes")
    gg = float(g @ g)
    if gg == 0.0:
        raise SchemeBreakdown("g_k vanishes")
    dv = degenerate_values(gg, curvature)
    if is_excluded_delta(delta, gg, curvature, rtol):
        raise DegenerateDelta(f"delta = {delta!r} equals delta_hat = {dv.delta_hat!r}", delta, dv.delta_hat)
    u = (1.0 / delta - 1.0) * g - (gg / curvature) * g_prev
    denom = (1.0 / delta - 1.0) * gg - gg * gg / curvature
    return B_prev + np.outer(u, u) / denom


def b_identity_closed_form(p_prev, g, g_prev):
    """Expanded A^T A for A = I - p g^T / (p^T g_prev)."""
    gp = float(g_prev @ p_prev)
    n = g.shape[0]
    return (
        np.eye(n)
        - np.outer(g, p_prev) / gp
        - np.outer(p_prev, g) / gp
        + float(p_prev @ p_prev) / gp**2 * np.outer(g, g)
    )


def b_previous_closed_form(B_prev, p_prev, g, g_prev):
    """Expanded A^T B_prev A, using B_prev p_prev = -g_prev and B_prev g = g."""
    gp = float(g_prev @ p_prev)
    return B_prev + (np.outer(g, g_prev) + np.outer(g_prev, g) - np.outer(g, g)) / gp


def w_eigen_residual(W, g):
    """||W g - (g^T W g / g^T g) g||, zero iff g is an eigenvector of W."""
    Wg = W @ g
    return float(np.linalg.norm(Wg - (float(g @ Wg) / float(g @ g)) * g))


def w_based_matrix(strategy, B_prev, p_prev, g, g_prev, k=None):
    """B_k = A_k^T W_k A_k with A_k built from the previous search direction."""
    if float(g_prev @ p_prev) == 0.0:
        raise SchemeBreakdown("g_{k-1}^T p_{k-1} = 0", k)
    if strategy == "identity":
        W = np.eye(g.shape[0])
    elif strategy == "previous":
        W = B_prev
    elif callable(strategy):
        W = np.asarray(strategy(k, B_prev, p_prev, g, g_prev), dtype=np.float64)
        res = w_eigen_residual(W, g)
        gWg = float(g @ (W @ g))
        if gWg == 0.0 or res > PARALLEL_RTOL * np.linalg.norm(W @ g):
            raise InvalidScheme(f"custom W_{k} does not have g_k as an eigenvector (residual {res:.3e})")
    else:
        raise InvalidScheme(f"unknown W strategy {strategy!r}")
    A = build_A(p_prev, g, g_prev, AForm.P)
    B = A.T @ W @ A
    return 0.5 * (B + B.T)


# -- schemes -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UpdateContext:
    """What an update scheme sees when forming B_k."""

    k: int
    B_prev: np.ndarray
    p_prev: np.ndarray
    theta_prev: float
    g: np.ndarray
    g_prev: np.ndarray
    H: np.ndarray

    @property
    def curvature(self):
        return _curvature(self.B_prev, self.p_prev)

    @property
    def gnorm2(self):
        return float(self.g @ self.g)


def _schedule(values, name):
    if np.isscalar(values):
        values = (values,)
    values = tuple(values)
    if not values:
        raise InvalidScheme(f"{name} schedule is empty")
    return values


def _at(schedule, k):
    """Value for iteration k >= 1; the last entry repeats."""
    return schedule[min(k - 1, len(schedule) - 1)]


def _check_alphas(alpha_prev, alpha):
    if alpha_prev == 0.0:
        raise InvalidScheme("alpha_{k-1} must be nonzero")
    if alpha == alpha_prev:
        raise InvalidScheme("alpha_k must differ from alpha_{k-1}")


class UpdateScheme:
    """Base class: ``update`` forms B_k, ``predicted_delta`` is the scaling it should produce."""

    name = "scheme"

    def update(self, ctx):
        raise NotImplementedError

    def predicted_delta(self, ctx):
        return None


class BroydenFamily(UpdateScheme):
    name = "broyden"

    def __init__(self, phi: Union[float, Sequence[float]] = 0.0, degenerate_rtol=DEGENERATE_RTOL):
        self.phi = tuple(float(v) for v in _schedule(phi, "phi"))
        if not all(np.isfinite(self.phi)):
            raise InvalidScheme("phi values must be finite")
        self.degenerate_rtol = degenerate_rtol

    def phi_at(self, k):
        return _at(self.phi, k)

    def update(self, ctx):
        phi = self.phi_at(ctx.k)
        phi_hat = -ctx.curvature / ctx.gnorm2 if ctx.gnorm2 > 0 else float("-inf")
        if abs(phi - phi_hat) <= self.degenerate_rtol * abs(phi_hat):
            raise DegeneratePhi(f"phi_{ctx.k} = {phi!r} is the degenerate value {phi_hat!r}", phi, phi_hat, ctx.k)
        return broyden_update(ctx.B_prev, ctx.p_prev, ctx.H, phi)

    def predicted_delta(self, ctx):
        return predict_delta_broyden(self.phi_at(ctx.k), ctx.gnorm2, ctx.curvature, rtol=0.0)


class Sr1Secant(UpdateScheme):
    name = "sr1"

    def update(self, ctx):
        return sr1_secant_update(ctx.B_prev, ctx.p_prev, ctx.H, ctx.theta_prev)

    @staticmethod
    def alphas(theta_prev):
        """(alpha_{k-1}, alpha_k) reproducing the SR1 vector u = H p - B p."""
        return 1.0 / theta_prev - 1.0, 1.0 / theta_prev

    def predicted_delta(self, ctx):
        a_prev, a = self.alphas(ctx.theta_prev)
        if a_prev == 0.0:
            return None
        return predict_delta_rank_one(a_prev, a, ctx.gnorm2, ctx.curvature, rtol=0.0)


class GeneralRankOne(UpdateScheme):
    name = "rank1"

    def __init__(self, alphas):
        pairs = list(alphas)
        if pairs and np.isscalar(pairs[0]):
            pairs = [tuple(pairs)]
        if not pairs:
            raise InvalidScheme("alpha schedule is empty")
        checked = []
        for pair in pairs:
            a_prev, a = (float(v) for v in pair)
            _check_alphas(a_prev, a)
            checked.append((a_prev, a))
        self.alphas = tuple(checked)

    def alphas_at(self, k):
        return _at(self.alphas, k)

    def update(self, ctx):
        a_prev, a = self.alphas_at(ctx.k)
        return general_rank_one_update(ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, a_prev, a)

    def predicted_delta(self, ctx):
        a_prev, a = self.alphas_at(ctx.k)
        return predict_delta_rank_one(a_prev, a, ctx.gnorm2, ctx.curvature, rtol=0.0)


class RankOneForDelta(UpdateScheme):
    name = "delta1"

    def __init__(self, delta: Union[float, Sequence[float]] = 1.0, degenerate_rtol=DEGENERATE_RTOL):
        self.delta = tuple(float(v) for v in _schedule(delta, "delta"))
        if any(d == 0.0 or not np.isfinite(d) for d in self.delta):
            raise InvalidScheme("delta targets must be finite and nonzero")
        self.degenerate_rtol = degenerate_rtol

    def delta_at(self, k):
        return _at(self.delta, k)

    def update(self, ctx):
        try:
            return rank_one_for_delta(
                ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, self.delta_at(ctx.k), self.degenerate_rtol
            )
        except SchemeBreakdown as exc:
            exc.k = ctx.k
            raise

    def predicted_delta(self, ctx):
        return self.delta_at(ctx.k)


class WBased(UpdateScheme):
    """B_k = A_k^T W_k A_k with W_k = I, W_k = B_{k-1}, or a user callable.

    A callable receives ``(k, B_prev, p_prev, g, g_prev)`` and must be pure;
    it is re-evaluated when reports are built.
    """

    def __init__(self, strategy: Union[str, Callable] = "identity"):
        if not (strategy in ("identity", "previous") or callable(strategy)):
            raise InvalidScheme(f"unknown W strategy {strategy!r}")
        self.strategy = strategy

    @property
    def name(self):
        return {"identity": "w-identity", "previous": "w-prev"}.get(self.strategy, "w-custom")

    def update(self, ctx):
        return w_based_matrix(self.strategy, ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, ctx.k)

    def predicted_delta(self, ctx):
        if self.strategy == "identity":
            return 1.0
        if self.strategy == "previous":
            W = ctx.B_prev
        else:
            W = np.asarray(self.strategy(ctx.k, ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev), dtype=np.float64)
        return ctx.gnorm2 / float(ctx.g @ (W @ ctx.g))


class Unchanged(UpdateScheme):
    """B_k = B_{k-1} = I: steepest descent, the non-parallel baseline."""

    name = "none"

    def update(self, ctx):
        return ctx.B_prev


# -- driver ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QnTrace:
    """QN iterates plus every B_k.

    ``B[k]`` is the matrix used at iteration k. When the scheme could also be
    applied at termination, ``B[r]`` is present too. ``failure`` holds the
    breakdown that aborted the run, if any.
    """

    states: tuple
    r: int
    converged: bool
    B: tuple
    failure: Optional[SchemeBreakdown] = None

    @property
    def directions(self):
        return [s.p for s in self.states if s.p is not None]

    @property
    def x_final(self):
        return self.states[-1].x

    @property
    def terminal_B(self):
        return self.B[self.r] if len(self.B) > self.r else None

    def context(self, k, H):
        prev = self.states[k - 1]
        return UpdateContext(k, self.B[k - 1], prev.p, prev.theta, self.states[k].g, prev.g, H)


def qn_run(qp, scheme, tol=None, max_iter=None):
    H = qp.H
    n = qp.n
    x = qp.x0.copy()
    g = H @ x + qp.c
    if tol is None:
        tol = default_tol(g)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = default_max_iter(n)

    states, Bs = [], []
    B = np.eye(n)
    k = 0
    prev = None
    while True:
        if k > 0:
            ctx = UpdateContext(k, B, prev.p, prev.theta, g, prev.g, H)
            done = np.linalg.norm(g) <= tol or k >= max_iter
            try:
                B = scheme.update(ctx)
            except SchemeBreakdown as exc:
                if exc.k is None:
                    exc.k = k
                if done:
                    # the update at termination is informational only
                    states.append(IterationState(k, x, g))
                    return QnTrace(tuple(states), k, np.linalg.norm(g) <= tol, tuple(Bs))
                log.info("scheme %s broke down at k=%d: %s", scheme.name, k, exc)
                states.append(IterationState(k, x, g))
                return QnTrace(tuple(states), k, False, tuple(Bs), exc)
            Bs.append(B)
            if done:
                states.append(IterationState(k, x, g))
                return QnTrace(tuple(states), k, np.linalg.norm(g) <= tol, tuple(Bs))
        else:
            Bs.append(B)
            if np.linalg.norm(g) <= tol:
                states.append(IterationState(k, x, g))
                return QnTrace(tuple(states), k, True, tuple(Bs))
        try:
            p = qn_direction(B, g, k)
        except SchemeBreakdown as exc:
            states.append(IterationState(k, x, g))
            return QnTrace(tuple(states), k, False, tuple(Bs), exc)
        theta = exact_step(p, g, H)
        log.debug("k=%d |g|=%.3e theta=%.6g", k, np.linalg.norm(g), theta)
        prev = IterationState(k, x, g, p, theta)
        states.append(prev)
        x = x + theta * p
        g = g + theta * (H @ p)
        k += 1
