"""Strictly convex quadratic programs: min 1/2 x^T H x + c^T x."""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ProblemError
from .linalg import as_matrix, as_vector, asymmetry, is_positive_definite, random_orthogonal, solve_linear

MAX_CONDITION = 1e6


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """Quadratic objective with SPD Hessian ``H``, linear term ``c`` and start ``x0``.

    Validation runs at construction, so any instance in hand satisfies
    ``H = H^T > 0`` and ``c != 0``.
    """

    H: np.ndarray
    c: np.ndarray
    x0: np.ndarray = None
    n: int = field(init=False)

    def __post_init__(self):
        try:
            H = as_matrix(self.H, name="H")
            n = H.shape[0]
            c = as_vector(self.c, n, name="c")
            x0 = np.zeros(n) if self.x0 is None else as_vector(self.x0, n, name="x0")
        except ValueError as exc:
            raise ProblemError(str(exc)) from exc
        if asymmetry(H) > 1e-12:
            raise ProblemError("H must be symmetric")
        if not is_positive_definite(H):
            raise ProblemError("H must be positive definite")
        if not np.any(c != 0.0):
            raise ProblemError("c must be nonzero")
        for arr in (H, c, x0):
            arr.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "n", n)

    def minimizer(self):
        return solve_linear(self.H, -self.c)


def objective_at(qp, x):
    x = as_vector(x, qp.n, name="x")
    return float(0.5 * x @ (qp.H @ x) + qp.c @ x)


def gradient_at(qp, x):
    x = as_vector(x, qp.n, name="x")
    return qp.H @ x + qp.c


def qpa():
    """The 2x2 desk instance H = diag(2, 4), c = (-2, -4), minimizer (1, 1)."""
    return QuadraticProblem(np.diag([2.0, 4.0]), np.array([-2.0, -4.0]), np.zeros(2))


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalues (ascending, positive) and seed for a generated Hessian."""

    eigenvalues: tuple
    seed: int = 0

    def __post_init__(self):
        eigs = tuple(float(e) for e in self.eigenvalues)
        if not eigs:
            raise ProblemError("need at least one eigenvalue")
        if any(not np.isfinite(e) or e <= 0.0 for e in eigs):
            raise ProblemError("eigenvalues must be positive and finite")
        if list(eigs) != sorted(eigs):
            raise ProblemError("eigenvalues must be sorted ascending")
        if eigs[-1] / eigs[0] > MAX_CONDITION * (1 + 1e-12):
            raise ProblemError(f"condition number {eigs[-1] / eigs[0]:.3g} exceeds cap {MAX_CONDITION:g}")
        object.__setattr__(self, "eigenvalues", eigs)

    @property
    def n(self):
        return len(self.eigenvalues)

    @property
    def condition(self):
        return self.eigenvalues[-1] / self.eigenvalues[0]

    @classmethod
    def log_spaced(cls, n, cond, seed=0):
        """Spectrum from 1 to ``cond`` with log-uniform spacing."""
        if n == 1:
            return cls((1.0,), seed)
        return cls(tuple(np.logspace(0.0, np.log10(cond), n)), seed)


def random_spd_problem(spec, x0=None):
    """H = Q diag(eigs) Q^T with a seeded orthogonal Q; Gaussian c; x0 = 0 by default."""
    n = spec.n
    Q = random_orthogonal(n, spec.seed)
    H = (Q * np.asarray(spec.eigenvalues)) @ Q.T
    H = 0.5 * (H + H.T)
    rng = np.random.default_rng([spec.seed, 1])
    c = rng.standard_normal(n)
    while np.linalg.norm(c) < 1e-8:
        c = rng.standard_normal(n)
    return QuadraticProblem(H, c, x0)


def problem_to_dict(qp):
    return {"n": qp.n, "H": qp.H.tolist(), "c": qp.c.tolist(), "x0": qp.x0.tolist()}


def problem_from_dict(data):
    try:
        n = int(data["n"])
        H = np.array(data["H"], dtype=np.float64)
        c = np.array(data["c"], dtype=np.float64)
        x0 = np.array(data.get("x0", [0.0] * n), dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemError(f"malformed problem data: {exc}") from exc
    if H.shape != (n, n) or c.shape != (n,) or x0.shape != (n,):
        raise ProblemError(f"dimensions disagree with n={n}: H {H.shape}, c {c.shape}, x0 {x0.shape}")
    return QuadraticProblem(H, c, x0)


def atomic_write_text(path, text):
    """Write via a temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_problem(qp, path):
    # json emits repr() floats, which round-trip exactly
    atomic_write_text(path, json.dumps(problem_to_dict(qp), indent=1) + "\n")


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ProblemError(f"{path}: expected a JSON object")
    return problem_from_dict(data)
