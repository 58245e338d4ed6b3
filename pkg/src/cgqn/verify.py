"""Randomized property batteries behind ``cgqn verify``.

Each battery takes ``(rng_for, trials, n)`` where ``rng_for(trial)`` returns a
generator seeded from (seed, battery, trial), so results do not depend on
the order in which trials run.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .cg import cg_run, cg_direction
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
    secant_and_span_residuals,
    w_closed_forms,
)
from .errors import CgqnError, DegenerateDelta, DegeneratePhi, Sr1Degenerate
from .linalg import is_positive_definite, random_orthogonal, solve_linear
from .problem import QuadraticProblem, SpectrumSpec, gradient_at, objective_at, qpa, random_spd_problem
from .qn import (
    BroydenFamily,
    GeneralRankOne,
    RankOneForDelta,
    Sr1Secant,
    WBased,
    broyden_update,
    general_rank_one_update,
    qn_run,
    rank_one_for_delta,
    sr1_secant_update,
)

log = logging.getLogger(__name__)

TOL = 1e-8
EPS = float(np.finfo(float).eps)
ROUNDING_SAFETY = 1e4
STEP_RATIO_FLOOR = 1e-3
AMBIGUOUS_BAND = 1e2
BROYDEN_PHIS = (0.0, 0.5, -0.5, 1.0, 5.0)


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    failures: int = 0
    skipped: int = 0
    max_residual: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.failures == 0 and self.trials > self.skipped

    def record(self, ok, residual=0.0, note=None):
        self.trials += 1
        if residual is not None and np.isfinite(residual):
            self.max_residual = max(self.max_residual, float(residual))
        if not ok:
            self.failures += 1
            if note and len(self.notes) < 5:
                self.notes.append(note)

    def skip(self, note=None):
        self.trials += 1
        self.skipped += 1

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def rounding_budget(qp, g0_norm, gk_norm, B=None):
    """Allowance for rounding in relative orthogonality and direction angles at iterate k.

    Both degrade roughly like eps * kappa * (||g_0|| / ||g_k||)**2 with kappa
    the larger of cond(H) and cond(B_k); the safety factor sits about two orders
    of magnitude above the worst ratio observed for CG and Broyden runs on the
    verify instance family, leaving room for random rank-one parameters.
    """
    if gk_norm <= 0.0:
        return np.inf
    kappa = float(np.linalg.cond(qp.H))
    if B is not None:
        kappa = max(kappa, float(np.linalg.cond(B)))
    return TOL + ROUNDING_SAFETY * EPS * kappa * (g0_norm / gk_norm) ** 2


def angle_excess(qp, q_trace, cg_trace):
    """Largest CG/QN principal angle divided by its rounding budget; <= 1 passes."""
    g0 = np.linalg.norm(cg_trace.states[0].g)
    worst = 0.0
    for k, (a, b) in enumerate(zip(q_trace.directions, cg_trace.directions)):
        budget = rounding_budget(qp, g0, np.linalg.norm(cg_trace.states[k].g), q_trace.B[k])
        worst = max(worst, principal_angle(a, b) / budget)
    return worst


def well_scaled_step(ctx):
    """True when ||g_k|| >= STEP_RATIO_FLOOR * ||g_{k-1}||.

    Past that ratio gnorm2/curvature drops below ~1e-6 and the rank-one
    closed forms cancel catastrophically, so formula agreement is not tested.
    """
    return np.sqrt(ctx.gnorm2) >= STEP_RATIO_FLOOR * np.linalg.norm(ctx.g_prev)


def random_instance(rng, n=None, max_cond=1e2):
    """SPD problem with log-uniform eigenvalues in [1, cond], cond <= max_cond."""
    if n is None:
        n = int(rng.integers(3, 9))
    if n == 1:
        eigs = (1.0,)
    else:
        cond = 10.0 ** rng.uniform(0.5, np.log10(max_cond))
        inner = 10.0 ** rng.uniform(0.0, np.log10(cond), n - 2)
        eigs = tuple(np.sort(np.concatenate([[1.0, cond], inner])))
    return random_spd_problem(SpectrumSpec(eigs, int(rng.integers(2**62))))


def run_tol(qp):
    return TOL * float(np.linalg.norm(qp.H @ qp.x0 + qp.c))


def random_alphas(rng):
    a_prev = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
    a = a_prev + rng.choice([-1.0, 1.0]) * rng.uniform(0.25, 2.0)
    return float(a_prev), float(a)


def _bfgs_contexts(qp):
    """(trace, [UpdateContext for k = 1..r-1]) along a BFGS run."""
    tr = qn_run(qp, BroydenFamily(0.0), tol=run_tol(qp))
    ctxs = [tr.context(k, qp.H) for k in range(1, len(tr.directions))]
    return tr, ctxs


# -- batteries ---------------------------------------------------------------


def battery_qpa_fixture(rng_for, trials, n):
    res = PropertyResult("qpa-fixture")
    qp = qpa()
    tr = cg_run(qp)
    s = tr.states
    err = max(abs(s[0].theta - 5 / 18), abs(s[1].theta - 0.45), float(np.max(np.abs(s[2].x - 1.0))))
    res.record(tr.r == 2 and err <= 1e-12, err, "CG on QP-A")
    q = qn_run(qp, GeneralRankOne([(1.0, 2.0)]))
    d = measure_delta(q.states[1].p, q.B[1], q.states[1].g)
    res.record(abs(d - 81 / 89) <= 1e-10, abs(d - 81 / 89), "rank-one (1,2) delta")
    dv = degenerate_values(80 / 81, 20.0)
    e = max(abs(dv.delta_hat - 81 / 85), abs(dv.phi_hat + 20.25))
    res.record(e <= 1e-12, e, "degenerate values")
    q = qn_run(qp, BroydenFamily(0.0))
    d = measure_delta(q.states[1].p, q.B[1], q.states[1].g)
    res.record(abs(d - 1.0) <= 1e-10, abs(d - 1.0), "BFGS delta")
    return res


def cg_local_ratio(qp, trace):
    """Worst consecutive-pair orthogonality or conjugacy residual over its rounding budget.

    Pairs (k-1, k) are checked for k < min(r, n). Global orthogonality to
    early iterates decays geometrically once Ritz values converge, so
    only neighbouring pairs carry a rounding-level guarantee. Iterates at or
    past the n-th, including the noise-level terminal gradient, are excluded.
    """
    states = trace.states[: min(trace.r, qp.n)]
    g0 = np.linalg.norm(states[0].g)
    worst = 0.0
    for a, b in zip(states, states[1:]):
        gb = np.linalg.norm(b.g)
        orth = abs(b.g @ a.g) / (gb * np.linalg.norm(a.g))
        orth = max(orth, abs(b.g @ a.p) / (gb * np.linalg.norm(a.p)))
        hn = np.sqrt((a.p @ qp.H @ a.p) * (b.p @ qp.H @ b.p))
        orth = max(orth, abs(b.p @ qp.H @ a.p) / hn)
        worst = max(worst, orth / rounding_budget(qp, g0, gb))
    return worst


def battery_cg_orthogonality(rng_for, trials, n):
    """Local orthogonality, conjugacy, descent and termination of CG."""
    res = PropertyResult("cg-orthogonality")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        tr = cg_run(qp, tol=run_tol(qp), max_iter=qp.n + 5)
        worst = cg_local_ratio(qp, tr)
        q = [objective_at(qp, st.x) for st in tr.states]
        descent = all(q[k + 1] < q[k] + 1e-12 for k in range(len(q) - 1))
        ok = tr.converged and tr.r <= qp.n + 5 and worst <= 1.0 and descent
        res.record(ok, worst, f"trial {t}: r={tr.r} n={qp.n} budget ratio={worst:.2e}")
    return res


def battery_broyden_equivalence(rng_for, trials, n):
    res = PropertyResult("broyden-equivalence")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        phi = float(rng.choice(BROYDEN_PHIS))
        tol = run_tol(qp)
        cg = cg_run(qp, tol=tol)
        q = qn_run(qp, BroydenFamily(phi, degenerate_rtol=1e-6), tol=tol)
        if isinstance(q.failure, DegeneratePhi):
            res.skip()
            continue
        m = min(len(cg.states), len(q.states))
        g0 = np.linalg.norm(cg.states[0].g)
        xerr = max(
            np.linalg.norm(q.states[k].x - cg.states[k].x)
            / (1 + np.linalg.norm(cg.states[k].x))
            / rounding_budget(qp, g0, np.linalg.norm(cg.states[k].g), q.B[k] if k < len(q.B) else None)
            for k in range(m)
        )
        angle = angle_excess(qp, q, cg)
        ok = q.failure is None and xerr <= 1.0 and angle <= 1.0
        res.record(ok, max(xerr, angle), f"trial {t}: phi={phi} xerr/budget={xerr:.2e} angle/budget={angle:.2e}")
    return res


def random_parallel_scheme(rng):
    """A scheme claiming parallelism, with random parameters."""
    pick = int(rng.integers(6))
    if pick == 0:
        return BroydenFamily(float(rng.choice(BROYDEN_PHIS)), degenerate_rtol=1e-6)
    if pick == 1:
        return BroydenFamily(float(rng.uniform(-1.0, 5.0)), degenerate_rtol=1e-6)
    if pick == 2:
        return GeneralRankOne([random_alphas(rng)])
    if pick == 3:
        return Sr1Secant()
    if pick == 4:
        return RankOneForDelta(float(rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)))
    return WBased(str(rng.choice(["identity", "previous"])))


def one_step(scheme, ctx):
    """B_k and p_k from applying ``scheme`` once; None on breakdown."""
    try:
        B = scheme.update(ctx)
        return B, solve_linear(B, -ctx.g)
    except CgqnError:
        return None


def battery_delta_prediction(rng_for, trials, n):
    """Measured vs predicted delta for Broyden and general rank-one updates.

    Each update is applied at every iteration of a BFGS history, where the
    standing assumption B_{k-1} g_k = g_k holds to rounding.
    """
    res = PropertyResult("delta-prediction")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        _, ctxs = _bfgs_contexts(qp)
        for ctx in ctxs:
            if rng.random() < 0.5:
                scheme = BroydenFamily(float(rng.uniform(-1.0, 5.0)), degenerate_rtol=1e-6)
            else:
                scheme = GeneralRankOne([random_alphas(rng)])
            step = one_step(scheme, ctx)
            if step is None:
                res.skip()
                continue
            B, p = step
            dp = scheme.predicted_delta(ctx)
            dm = measure_delta(p, B, ctx.g)
            err = abs(dm - dp) / abs(dp)
            res.record(err <= TOL, err, f"trial {t} k={ctx.k}: {scheme.name} {dm!r} vs {dp!r}")
    return res


def perturbed(B, rng, scale=0.3):
    v = rng.standard_normal(B.shape[0])
    return B + scale * np.linalg.norm(B, 2) * np.outer(v, v) / (v @ v)


def theorem_corollary_samples(rng, n=None):
    """(holds, corollary residual, theorem residual) at each iteration of a BFGS history.

    B_k comes from a random parallel scheme, and half of the time it is
    perturbed by a random symmetric rank-one term so the condition fails.
    """
    qp = random_instance(rng, n)
    _, ctxs = _bfgs_contexts(qp)
    out = []
    for ctx in ctxs:
        step = one_step(random_parallel_scheme(rng), ctx)
        if step is None:
            continue
        B = step[0] if rng.random() < 0.5 else perturbed(step[0], rng)
        A = build_A(ctx.p_prev, ctx.g, ctx.g_prev, AForm.P)
        chk = check_theorem_iff(B, A, ctx.g)
        delta = chk.delta
        if delta is None:
            delta = measure_delta(solve_linear(B, -ctx.g), B, ctx.g)
        u_res = check_corollary_U(B - ctx.B_prev, A, ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, delta)
        out.append((chk.holds, u_res, chk.residual))
    return out


def battery_theorem_corollary(rng_for, trials, n):
    res = PropertyResult("theorem-corollary")
    for t in range(trials):
        for holds, u_res, th_res in theorem_corollary_samples(rng_for(t), n):
            if holds != (u_res <= TOL) and max(u_res, th_res) <= AMBIGUOUS_BAND * TOL:
                res.skip(f"trial {t}: both residuals within the rounding band")
                continue
            agree = holds == (u_res <= TOL)
            res.record(agree, 0.0 if agree else 1.0, f"trial {t}: theorem {th_res:.2e} vs corollary {u_res:.2e}")
    return res


def necessity_residuals(qp):
    """Per scheme: (max angle, max secant, max span, min secant) over the run."""
    tol = run_tol(qp)
    cg = cg_run(qp, tol=tol)
    out = {}
    for strategy in ("identity", "previous"):
        q = qn_run(qp, WBased(strategy), tol=tol)
        angles = [principal_angle(a, b) for a, b in zip(q.directions, cg.directions)]
        secants, spans = [], []
        for k in range(1, len(q.directions)):
            ctx = q.context(k, qp.H)
            s, sp = secant_and_span_residuals(q.B[k] - ctx.B_prev, ctx.p_prev, qp.H, ctx.B_prev, ctx.g, ctx.g_prev)
            secants.append(s)
            spans.append(sp)
        out[strategy] = (max(angles), max(secants), max(spans), min(secants))
    return out


def battery_necessity(rng_for, trials, n):
    res = PropertyResult("necessity")
    for t in range(trials):
        qp = random_instance(rng_for(t), 3)
        out = necessity_residuals(qp)
        a_i, sec_i, span_i, _ = out["identity"]
        a_p, sec_p, span_p, _ = out["previous"]
        ok = a_i <= TOL and sec_i > 1e-4 and span_i > 1e-4 and a_p <= TOL and span_p <= TOL and sec_p > 1e-4
        res.record(ok, max(a_i, a_p, span_p), f"trial {t}: {out}")
    return res


def battery_rank_one(rng_for, trials, n):
    """Rank-one forms agree, the SR1 parameterization holds, directions stay parallel.

    General rank-one updates are applied one step at a time on a BFGS
    history; chaining them compounds the error in B_{k-1} g_k = g_k by
    roughly two orders of magnitude per iteration.
    """
    res = PropertyResult("rank-one")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        tol = run_tol(qp)
        cg = cg_run(qp, tol=tol)
        g0 = np.linalg.norm(cg.states[0].g)
        _, ctxs = _bfgs_contexts(qp)
        worst = agree = 0.0
        for ctx in ctxs:
            if not well_scaled_step(ctx):
                res.skip()
                continue
            a_prev, a = random_alphas(rng)
            B_gen = general_rank_one_update(ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, a_prev, a)
            try:
                delta = predict_delta_rank_one(a_prev, a, ctx.gnorm2, ctx.curvature)
                B_lem = rank_one_for_delta(ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, delta)
                p = solve_linear(B_gen, -ctx.g)
            except CgqnError:
                res.skip()
                continue
            U_gen = B_gen - ctx.B_prev
            agree = max(agree, np.max(np.abs(U_gen - (B_lem - ctx.B_prev))) / max(1.0, np.max(np.abs(U_gen))))
            if ctx.k < len(cg.directions):
                budget = rounding_budget(qp, g0, np.linalg.norm(cg.states[ctx.k].g), B_gen)
                worst = max(worst, principal_angle(p, cg.directions[ctx.k]) / budget)
        sr1 = 0.0
        s = qn_run(qp, Sr1Secant(), tol=tol)
        for k in range(1, len(s.directions)):
            ctx = s.context(k, qp.H)
            if not well_scaled_step(ctx):
                continue
            B_sr1 = sr1_secant_update(ctx.B_prev, ctx.p_prev, qp.H, ctx.theta_prev)
            a_prev, a = Sr1Secant.alphas(ctx.theta_prev)
            B_gen = general_rank_one_update(ctx.B_prev, ctx.p_prev, ctx.g, ctx.g_prev, a_prev, a)
            sr1 = max(sr1, np.max(np.abs(B_sr1 - B_gen)) / max(1.0, np.max(np.abs(B_sr1))))
        ok = worst <= 1.0 and agree <= 1e-9 and sr1 <= 1e-9
        res.record(ok, max(agree, sr1), f"trial {t}: angle/budget={worst:.2e} agree={agree:.2e} sr1={sr1:.2e}")
    return res


def u_positivity_sample(rng):
    """Random (alpha_prev, alpha, gnorm2, curvature) with curvature of either sign.

    Returns (beta, delta, delta_hat).
    """
    a_prev, a = random_alphas(rng)
    gnorm2 = 10.0 ** rng.uniform(-2, 2)
    curvature = rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-2, 2)
    beta = 1.0 / (a_prev * (a - a_prev) * curvature)
    try:
        delta = predict_delta_rank_one(a_prev, a, gnorm2, curvature)
    except DegenerateDelta:
        return None
    return beta, delta, degenerate_values(gnorm2, curvature).delta_hat


def battery_u_positivity(rng_for, trials, n):
    """beta > 0 exactly when 1/delta > 1/delta_hat."""
    res = PropertyResult("u-positivity")
    for t in range(trials):
        rng = rng_for(t)
        for _ in range(10):
            sample = u_positivity_sample(rng)
            if sample is None:
                res.skip()
                continue
            beta, delta, delta_hat = sample
            ok = (beta > 0) == (1.0 / delta > 1.0 / delta_hat)
            res.record(ok, 0.0, f"beta={beta:.3g} delta={delta:.3g} delta_hat={delta_hat:.3g}")
    return res


def battery_degeneracy(rng_for, trials, n):
    res = PropertyResult("degeneracy")
    for t in range(trials):
        qp = random_instance(rng_for(t), n)
        _, ctxs = _bfgs_contexts(qp)
        for ctx in ctxs:
            dv = degenerate_values(ctx.gnorm2, ctx.curvature)
            aborts = 0
            try:
                BroydenFamily(dv.phi_hat).update(ctx)
            except DegeneratePhi:
                aborts += 1
            try:
                RankOneForDelta(dv.delta_hat).update(ctx)
            except DegenerateDelta:
                aborts += 1
            A = build_A(ctx.p_prev, ctx.g, ctx.g_prev, AForm.P)
            W = extract_W(broyden_update(ctx.B_prev, ctx.p_prev, qp.H, dv.phi_hat), A)
            wres = np.linalg.norm(W @ ctx.g) / (np.linalg.norm(W, 2) * np.linalg.norm(ctx.g))
            res.record(aborts == 2 and wres <= TOL, wres, f"trial {t} k={ctx.k}: aborts={aborts} wres={wres:.2e}")
    return res


def battery_pd_threshold(rng_for, trials, n):
    res = PropertyResult("pd-threshold")
    for t in range(trials):
        qp = random_instance(rng_for(t), n)
        tr, ctxs = _bfgs_contexts(qp)
        hereditary = all(is_positive_definite(B) for B in tr.B)
        res.record(hereditary, 0.0, f"trial {t}: BFGS lost positive definiteness")
        for ctx in ctxs:
            phi_hat = degenerate_values(ctx.gnorm2, ctx.curvature).phi_hat
            for phi in (phi_hat * (1 + 1e-3), phi_hat * (1 - 1e-3)):
                B_new = broyden_update(ctx.B_prev, ctx.p_prev, qp.H, phi)
                chk = pd_analysis(ctx.B_prev, phi, ctx.gnorm2, ctx.curvature, B_new)
                res.record(chk.agrees, 0.0, f"trial {t} k={ctx.k}: phi={phi:.6g} {chk}")
    return res


def battery_closed_form(rng_for, trials, n):
    res = PropertyResult("closed-form")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        _, ctxs = _bfgs_contexts(qp)
        for ctx in ctxs:
            phi = float(rng.uniform(-0.5, 5.0))
            W0, Wphi = w_closed_forms(ctx.B_prev, ctx.p_prev, ctx.theta_prev, ctx.g, ctx.g_prev, phi)
            A = build_A(ctx.p_prev, ctx.g, ctx.g_prev, AForm.P)
            E0 = extract_W(broyden_update(ctx.B_prev, ctx.p_prev, qp.H, 0.0), A)
            Ephi = extract_W(broyden_update(ctx.B_prev, ctx.p_prev, qp.H, phi), A)
            e0 = np.linalg.norm(E0 - W0) / np.linalg.norm(W0)
            ephi = np.linalg.norm((Ephi - E0) - (Wphi - W0)) / np.linalg.norm(Wphi)
            res.record(max(e0, ephi) <= 1e-9, max(e0, ephi), f"trial {t} k={ctx.k}: {e0:.2e} {ephi:.2e}")
    return res


def battery_a_forms(rng_for, trials, n):
    """CG and P forms of A_k agree for rescaled directions; A^{-T} g = g; closed-form inverse."""
    res = PropertyResult("a-forms")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        cg = cg_run(qp, tol=run_tol(qp))
        for k in range(1, len(cg.directions)):
            p_prev, g_prev, g = cg.states[k - 1].p, cg.states[k - 1].g, cg.states[k].g
            scale = rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-6, 6)
            A_cg = build_A(p_prev, g, g_prev, AForm.CG)
            A_p = build_A(scale * p_prev, g, g_prev, AForm.P)
            diff = np.linalg.norm(A_cg - A_p)
            Ainv = invert_A(p_prev, g, g_prev, AForm.CG)
            inv = np.linalg.norm(A_cg @ Ainv - np.eye(qp.n))
            gres = np.linalg.norm(solve_linear(A_cg.T, g) - g) / np.linalg.norm(g)
            ok = diff <= 1e-9 and inv <= 1e-10 and gres <= 1e-10
            res.record(ok, max(diff, inv, gres), f"trial {t} k={k}: {diff:.2e} {inv:.2e} {gres:.2e}")
    return res


def battery_terminal_hessian(rng_for, trials, n):
    res = PropertyResult("terminal-hessian")
    qp = qpa()
    B_r = qn_run(qp, WBased("identity")).terminal_B
    gap = np.linalg.norm(B_r - qp.H) / np.linalg.norm(qp.H)
    res.record(gap > 1e-4, None, f"W=I terminal gap {gap:.2e}")
    B_r = qn_run(qp, BroydenFamily(0.0)).terminal_B
    gap = np.linalg.norm(B_r - qp.H) / np.linalg.norm(qp.H)
    res.record(gap <= 1e-10, gap, f"BFGS terminal gap {gap:.2e}")
    return res


def battery_linalg(rng_for, trials, n):
    res = PropertyResult("linalg")
    for t in range(trials):
        rng = rng_for(t)
        m = int(rng.integers(1, 9)) if n is None else n
        Q = random_orthogonal(m, int(rng.integers(2**62)))
        orth = np.linalg.norm(Q.T @ Q - np.eye(m))
        M = Q @ np.diag(10.0 ** rng.uniform(-1, 1, m)) @ random_orthogonal(m, int(rng.integers(2**62))).T
        b = rng.standard_normal(m)
        x = solve_linear(M, b)
        solve_res = np.linalg.norm(M @ x - b) / (np.linalg.norm(M) * np.linalg.norm(x) + np.linalg.norm(b))
        S = rng.standard_normal((m, m))
        S = S + S.T
        pd_ok = is_positive_definite(S) == bool(np.min(np.linalg.eigvalsh(S)) > 0)
        ok = orth <= 1e-10 and solve_res <= 1e-10 and pd_ok
        res.record(ok, max(orth, solve_res), f"trial {t}: orth={orth:.2e} solve={solve_res:.2e} pd={pd_ok}")
    return res


def battery_problem(rng_for, trials, n):
    res = PropertyResult("problem")
    for t in range(trials):
        rng = rng_for(t)
        qp = random_instance(rng, n)
        xs = qp.minimizer()
        gres = np.linalg.norm(gradient_at(qp, xs))
        q_star = objective_at(qp, xs)
        lower = min(objective_at(qp, xs + rng.standard_normal(qp.n) * 10.0 ** rng.uniform(-3, 1)) for _ in range(20))
        sym = np.linalg.norm(qp.H - qp.H.T) / np.linalg.norm(qp.H)
        ok = gres <= 1e-10 and lower >= q_star - 1e-12 and sym <= 1e-12 and is_positive_definite(qp.H)
        res.record(ok, gres, f"trial {t}: grad={gres:.2e} sym={sym:.2e}")
    return res


BATTERIES = {
    "qpa-fixture": battery_qpa_fixture,
    "linalg": battery_linalg,
    "problem": battery_problem,
    "cg-orthogonality": battery_cg_orthogonality,
    "broyden-equivalence": battery_broyden_equivalence,
    "delta-prediction": battery_delta_prediction,
    "theorem-corollary": battery_theorem_corollary,
    "necessity": battery_necessity,
    "rank-one": battery_rank_one,
    "u-positivity": battery_u_positivity,
    "degeneracy": battery_degeneracy,
    "pd-threshold": battery_pd_threshold,
    "closed-form": battery_closed_form,
    "a-forms": battery_a_forms,
    "terminal-hessian": battery_terminal_hessian,
}


def run_batteries(trials, seed, n=None, only=None):
    """Run the selected batteries; returns {name: PropertyResult}."""
    names = list(BATTERIES) if only is None else list(only)
    results = {}
    for index, name in enumerate(names):
        if name not in BATTERIES:
            raise KeyError(name)
        battery_id = list(BATTERIES).index(name)

        def rng_for(trial, _b=battery_id):
            return np.random.default_rng([seed, _b, trial])

        try:
            result = BATTERIES[name](rng_for, trials, n)
        except CgqnError as exc:
            result = PropertyResult(name)
            result.record(False, None, f"{type(exc).__name__}: {exc}")
        log.info("%s: %s (%d trials, %d skipped)", name, "pass" if result.passed else "FAIL", result.trials, result.skipped)
        results[name] = result
    return results
