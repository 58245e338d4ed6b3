"""Hestenes-Stiefel conjugate gradients with exact line search."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BreakdownError, CurvatureBreakdown

TERMINATION_SLACK = 5


@dataclass(frozen=True, eq=False)
class IterationState:
    """Quantities at iteration ``k``; ``p`` and ``theta`` are None at termination."""

    k: int
    x: np.ndarray
    g: np.ndarray
    p: Optional[np.ndarray] = None
    theta: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Trace:
    states: tuple
    r: int
    converged: bool

    @property
    def directions(self):
        return [s.p for s in self.states if s.p is not None]

    @property
    def x_final(self):
        return self.states[-1].x


def default_tol(g0):
    return 1e-10 * max(1.0, float(np.linalg.norm(g0)))


def default_max_iter(n):
    return n + TERMINATION_SLACK


def exact_step(p, g, H):
    """theta = -(p^T g) / (p^T H p), the minimizer of the quadratic along ``p``."""
    pHp = float(p @ (H @ p))
    if pHp <= 1e-14 * float(p @ p) * np.linalg.norm(H, "fro"):
        raise CurvatureBreakdown(f"p^T H p = {pHp:.3e} is not safely positive")
    return -float(p @ g) / pHp


def cg_direction(g, g_prev=None, p_prev=None):
    """-g + (g^T g / g_prev^T g_prev) p_prev, or -g at the first iteration."""
    if g_prev is None or p_prev is None:
        return -g
    gg_prev = float(g_prev @ g_prev)
    if gg_prev <= 1e-300:
        raise BreakdownError("previous gradient has vanishing norm")
    return -g + (float(g @ g) / gg_prev) * p_prev


def cg_run(qp, tol=None, max_iter=None):
    """Run CG from ``qp.x0`` until ||g||_2 <= tol, recording every iterate."""
    H = qp.H
    x = qp.x0.copy()
    g = H @ x + qp.c
    if tol is None:
        tol = default_tol(g)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = default_max_iter(qp.n)

    states = []
    g_prev = p_prev = None
    k = 0
    while True:
        if np.linalg.norm(g) <= tol:
            states.append(IterationState(k, x, g))
            return Trace(tuple(states), k, True)
        if k >= max_iter:
            states.append(IterationState(k, x, g))
            return Trace(tuple(states), k, False)
        p = cg_direction(g, g_prev, p_prev)
        theta = exact_step(p, g, H)
        states.append(IterationState(k, x, g, p, theta))
        x = x + theta * p
        g_prev, p_prev = g, p
        g = g + theta * (H @ p)
        k += 1
