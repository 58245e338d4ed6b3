import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgqn.cg import cg_run
from cgqn.equivalence import (
    AForm,
    build_A,
    check_corollary_U,
    check_theorem_iff,
    degenerate_values,
    extract_W,
    invert_A,
    is_excluded_delta,
    measure_delta,
    pd_analysis,
    predict_delta_broyden,
    predict_delta_rank_one,
    principal_angle,
    secant_and_span_residuals,
    w_closed_forms,
)
from cgqn.errors import DegenerateDelta, DegeneratePhi, InvalidScheme
from cgqn.problem import SpectrumSpec, random_spd_problem
from cgqn.qn import (
    BroydenFamily,
    GeneralRankOne,
    WBased,
    b_identity_closed_form,
    broyden_update,
    general_rank_one_update,
    qn_direction,
    qn_run,
    rank_one_for_delta,
)
from cgqn.verify import necessity_residuals

A1 = np.array([[41.0, 2.0], [-8.0, 49.0]]) / 45.0


def test_build_A_base_case():
    np.testing.assert_array_equal(build_A(None, np.ones(3), None), np.eye(3))
    np.testing.assert_array_equal(invert_A(None, np.ones(3), None), np.eye(3))


def test_build_A_on_qpa(qpa_step1):
    s = qpa_step1
    A_cg = build_A(s["p0"], s["g1"], s["g0"], AForm.CG)
    A_p = build_A(s["p0"], s["g1"], s["g0"], AForm.P)
    np.testing.assert_allclose(A_cg, A1, rtol=0, atol=1e-15)
    assert np.max(np.abs(A_p - A_cg)) <= 1e-12


def test_build_A_zero_denominator():
    with pytest.raises(ValueError):
        build_A(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0]), AForm.P)
    with pytest.raises(ValueError):
        build_A(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2), AForm.CG)


def test_invert_A_on_qpa(qpa_step1):
    s = qpa_step1
    Ainv = invert_A(s["p0"], s["g1"], s["g0"])
    np.testing.assert_allclose(Ainv @ s["g1"], -s["p1_cg"], rtol=0, atol=1e-15)
    np.testing.assert_allclose(Ainv @ A1, np.eye(2), rtol=0, atol=1e-15)


def test_invert_A_rejects_inexact_line_search():
    with pytest.raises(ValueError, match="exact line search"):
        invert_A(np.array([1.0, 1.0]), np.array([1.0, 0.0]), np.array([-1.0, -1.0]))


def test_invert_A_on_cg_trace():
    qp = random_spd_problem(SpectrumSpec.log_spaced(10, 30.0, seed=8))
    tr = cg_run(qp, tol=1e-6 * np.linalg.norm(qp.c))
    for k in range(1, tr.r):
        prev, cur = tr.states[k - 1], tr.states[k]
        A = build_A(prev.p, cur.g, prev.g, AForm.CG)
        Ainv = invert_A(prev.p, cur.g, prev.g, AForm.CG)
        assert np.linalg.norm(A @ Ainv - np.eye(qp.n)) <= 1e-10
        # A^{-T} g = g along exact line search iterates
        assert np.linalg.norm(Ainv.T @ cur.g - cur.g) <= 1e-10 * np.linalg.norm(cur.g)


def test_extract_W_examples(qp_a, qpa_step1):
    s = qpa_step1
    np.testing.assert_array_equal(extract_W(np.eye(2), np.eye(2)), np.eye(2))
    assert np.linalg.norm(extract_W(A1.T @ A1, A1) - np.eye(2)) <= 1e-10
    B1 = broyden_update(np.eye(2), s["p0"], qp_a.H, 0.0)
    W0, _ = w_closed_forms(np.eye(2), s["p0"], s["theta0"], s["g1"], s["g0"], 0.0)
    assert np.linalg.norm(extract_W(B1, A1) - W0) <= 1e-10
    expected = np.eye(2) + (18.0 / 5.0 - 1.0) / 20.0 * np.outer(s["g0"], s["g0"])
    np.testing.assert_allclose(W0, expected, rtol=0, atol=1e-14)


def test_theorem_examples(qp_a, qpa_step1):
    s = qpa_step1
    chk = check_theorem_iff(np.eye(2), np.eye(2), np.array([1.0, -3.0]))
    assert chk.holds and chk.delta == pytest.approx(1.0)
    B1 = broyden_update(np.eye(2), s["p0"], qp_a.H, 0.0)
    chk = check_theorem_iff(B1, A1, s["g1"])
    assert chk.holds and chk.delta == pytest.approx(1.0, abs=1e-12)
    assert not check_theorem_iff(np.eye(2), A1, s["g1"]).holds


def test_theorem_reports_absent_delta_when_orthogonal():
    rotation = np.array([[0.0, 1.0], [-1.0, 0.0]])
    chk = check_theorem_iff(rotation, np.eye(2), np.array([1.0, 0.0]))
    assert not chk.holds and chk.delta is None


def test_corollary_examples(qpa_step1):
    s = qpa_step1
    B1 = rank_one_for_delta(np.eye(2), s["p0"], s["g1"], s["g0"], 1.0)
    assert check_corollary_U(B1 - np.eye(2), A1, np.eye(2), s["p0"], s["g1"], s["g0"], 1.0) <= 1e-10
    zero = check_corollary_U(np.zeros((2, 2)), A1, np.eye(2), s["p0"], s["g1"], s["g0"], 1.0)
    expected = (80.0 / 81.0) / 20.0 * np.linalg.norm(s["g0"]) / np.linalg.norm(s["g1"])
    assert zero == pytest.approx(expected, rel=1e-12) and zero > 0
    U_id = b_identity_closed_form(s["p0"], s["g1"], s["g0"]) - np.eye(2)
    assert check_corollary_U(U_id, A1, np.eye(2), s["p0"], s["g1"], s["g0"], 1.0) <= 1e-10


def test_predict_delta_broyden_examples(qpa_step1):
    s = qpa_step1
    assert predict_delta_broyden(0.0, 3.0, 7.0) == 1.0
    assert predict_delta_broyden(1.0, s["gnorm2"], s["curvature"]) == pytest.approx(81.0 / 85.0, rel=1e-15)
    phi_hat = degenerate_values(s["gnorm2"], s["curvature"]).phi_hat
    with pytest.raises(DegeneratePhi):
        predict_delta_broyden(phi_hat, s["gnorm2"], s["curvature"])
    near = [abs(predict_delta_broyden(phi_hat * (1 + eps), s["gnorm2"], s["curvature"])) for eps in (1e-2, 1e-4, 1e-6)]
    assert near[0] < near[1] < near[2] and near[2] > 1e5


def test_predict_delta_rank_one_examples(qpa_step1):
    s = qpa_step1
    assert predict_delta_rank_one(1.0, 0.0, 2.0, 5.0) == 1.0
    assert predict_delta_rank_one(1.0, 2.0, s["gnorm2"], s["curvature"]) == pytest.approx(81.0 / 89.0, rel=1e-15)
    with pytest.raises(DegenerateDelta):
        predict_delta_rank_one(1.7, 1.7, s["gnorm2"], s["curvature"])
    with pytest.raises(InvalidScheme):
        predict_delta_rank_one(0.0, 1.0, s["gnorm2"], s["curvature"])


def test_degenerate_values_examples(qpa_step1):
    dv = degenerate_values(3.0, 3.0)
    assert dv.delta_hat == 0.5 and dv.phi_hat == -1.0
    dv = degenerate_values(qpa_step1["gnorm2"], qpa_step1["curvature"])
    assert dv.delta_hat == pytest.approx(81.0 / 85.0, rel=1e-15)
    assert dv.phi_hat == pytest.approx(-20.25, rel=1e-15)


def test_is_excluded_delta():
    dv = degenerate_values(2.0, 5.0)
    assert is_excluded_delta(dv.delta_hat, 2.0, 5.0)
    assert is_excluded_delta(dv.delta_hat * (1 + 1e-12), 2.0, 5.0)
    assert not is_excluded_delta(dv.delta_hat * (1 + 1e-8), 2.0, 5.0)


def test_measure_delta_examples(qp_a, qpa_step1):
    s = qpa_step1
    g = np.array([0.3, -0.4])
    assert measure_delta(-g, np.eye(2), g) == pytest.approx(1.0)
    B1 = broyden_update(np.eye(2), s["p0"], qp_a.H, 0.0)
    assert abs(measure_delta(qn_direction(B1, s["g1"]), B1, s["g1"]) - 1.0) <= 1e-10
    B1 = general_rank_one_update(np.eye(2), s["p0"], s["g1"], s["g0"], 1.0, 2.0)
    assert abs(measure_delta(qn_direction(B1, s["g1"]), B1, s["g1"]) - 81.0 / 89.0) <= 1e-10


def test_pd_analysis_examples(qp_a, qpa_step1):
    s = qpa_step1
    B_prev = np.eye(2)
    threshold = degenerate_values(s["gnorm2"], s["curvature"]).phi_hat
    for phi, expected in ((0.0, True), (1.5 * threshold, False), (0.5 * threshold, True)):
        B = broyden_update(B_prev, s["p0"], qp_a.H, phi)
        chk = pd_analysis(B_prev, phi, s["gnorm2"], s["curvature"], B)
        assert chk.threshold == pytest.approx(threshold)
        assert chk.pd_observed is expected and chk.agrees


def test_pd_analysis_needs_pd_history():
    with pytest.raises(ValueError):
        pd_analysis(np.diag([1.0, -1.0]), 0.0, 1.0, 1.0, np.eye(2))


def test_broyden_update_satisfies_secant_and_span():
    qp = random_spd_problem(SpectrumSpec.log_spaced(6, 20.0, seed=14))
    for phi in (0.0, 0.7, -0.2, 3.0):
        q = qn_run(qp, BroydenFamily(phi), tol=1e-6 * np.linalg.norm(qp.c))
        for k in range(1, len(q.directions)):
            ctx = q.context(k, qp.H)
            secant, span = secant_and_span_residuals(q.B[k] - ctx.B_prev, ctx.p_prev, qp.H, ctx.B_prev, ctx.g, ctx.g_prev)
            assert secant <= 1e-8 and span <= 1e-8


def test_w_based_necessity_on_three_dimensions():
    qp = random_spd_problem(SpectrumSpec((1.0, 3.0, 10.0), seed=5))
    out = necessity_residuals(qp)
    angle, secant, span, _ = out["identity"]
    assert angle <= 1e-8 and secant > 1e-4 and span > 1e-4
    angle, secant, span, _ = out["previous"]
    assert angle <= 1e-8 and span <= 1e-8 and secant > 1e-4


def test_w_previous_span_and_secant_on_qpa(qp_a):
    q = qn_run(qp_a, WBased("previous"))
    ctx = q.context(1, qp_a.H)
    secant, span = secant_and_span_residuals(q.B[1] - ctx.B_prev, ctx.p_prev, qp_a.H, ctx.B_prev, ctx.g, ctx.g_prev)
    assert span <= 1e-8 and secant > 1e-4


def test_w_closed_form_unit_step():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 3))
    B_prev = X @ X.T + np.eye(3)
    W0, Wphi = w_closed_forms(B_prev, rng.standard_normal(3), 1.0, rng.standard_normal(3), rng.standard_normal(3), 0.0)
    np.testing.assert_array_equal(W0, B_prev)
    np.testing.assert_array_equal(Wphi, B_prev)


def test_principal_angle():
    a = np.array([1.0, 2.0, -1.0])
    assert principal_angle(a, -3.0 * a) <= 1e-15
    assert principal_angle(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(np.pi / 2)
    assert principal_angle(np.array([1.0, 0.0]), np.array([1.0, 1e-12])) == pytest.approx(1e-12, rel=1e-6)
    assert principal_angle(np.zeros(2), np.ones(2)) == pytest.approx(np.pi / 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), st.floats(-6.0, 6.0), st.booleans())
def test_a_forms_agree_on_rescaled_directions(n, seed, log_scale, negative):
    qp = random_spd_problem(SpectrumSpec.log_spaced(n, 10.0, seed))
    tr = cg_run(qp, tol=1e-6 * np.linalg.norm(qp.c))
    scale = (-1.0 if negative else 1.0) * 10.0**log_scale
    for k in range(1, tr.r):
        prev, cur = tr.states[k - 1], tr.states[k]
        A_cg = build_A(prev.p, cur.g, prev.g, AForm.CG)
        A_p = build_A(scale * prev.p, cur.g, prev.g, AForm.P)
        assert np.linalg.norm(A_cg - A_p) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), st.floats(-3.0, 3.0))
def test_broyden_delta_prediction_over_runs(n, seed, phi):
    qp = random_spd_problem(SpectrumSpec.log_spaced(n, 30.0, seed))
    scheme = BroydenFamily(phi, degenerate_rtol=1e-6)
    q = qn_run(qp, scheme, tol=1e-6 * np.linalg.norm(qp.c))
    for k in range(1, len(q.directions)):
        ctx = q.context(k, qp.H)
        predicted = scheme.predicted_delta(ctx)
        measured = measure_delta(q.states[k].p, q.B[k], ctx.g)
        assert abs(measured - predicted) <= 1e-8 * abs(predicted)


def test_rank_one_lemma_matches_general_form(qpa_step1):
    s = qpa_step1
    for a_prev, a in ((1.0, 2.0), (-0.5, 1.5), (2.0, -3.0), (1.0, 0.0)):
        delta = predict_delta_rank_one(a_prev, a, s["gnorm2"], s["curvature"])
        B_gen = general_rank_one_update(np.eye(2), s["p0"], s["g1"], s["g0"], a_prev, a)
        B_lem = rank_one_for_delta(np.eye(2), s["p0"], s["g1"], s["g0"], delta)
        assert np.max(np.abs(B_gen - B_lem)) <= 1e-9 * max(1.0, np.max(np.abs(B_gen)))


def test_general_rank_one_scheme_delta_on_qpa(qp_a):
    q = qn_run(qp_a, GeneralRankOne([(1.0, 2.0)]))
    assert measure_delta(q.states[1].p, q.B[1], q.states[1].g) == pytest.approx(81.0 / 89.0, abs=1e-10)
