import numpy as np
import pytest

from cgqn import qn, verify
from cgqn.problem import SpectrumSpec, random_spd_problem
from cgqn.verify import BATTERIES, PropertyResult, rounding_budget, run_batteries


@pytest.mark.parametrize("name", sorted(BATTERIES))
def test_battery_passes(name):
    result = run_batteries(20, seed=123, only=[name])[name]
    assert result.passed, result.notes
    assert result.trials > result.skipped


def test_batteries_are_deterministic():
    a = run_batteries(5, seed=9)
    b = run_batteries(5, seed=9)
    assert {k: v.as_dict() for k, v in a.items()} == {k: v.as_dict() for k, v in b.items()}


def test_battery_streams_do_not_depend_on_selection():
    alone = run_batteries(8, seed=4, only=["rank-one"])["rank-one"]
    together = run_batteries(8, seed=4, only=["qpa-fixture", "rank-one"])["rank-one"]
    assert alone.as_dict() == together.as_dict()


def test_unknown_battery():
    with pytest.raises(KeyError):
        run_batteries(1, seed=0, only=["nope"])


def test_property_result_bookkeeping():
    r = PropertyResult("x")
    r.record(True, 1e-12)
    r.skip()
    assert r.passed and r.trials == 2 and r.skipped == 1
    r.record(False, 0.5, "bad")
    assert not r.passed and r.failures == 1 and r.notes == ["bad"] and r.max_residual == 0.5
    assert PropertyResult("empty").passed is False


def test_rounding_budget_grows_as_gradient_shrinks():
    qp = random_spd_problem(SpectrumSpec.log_spaced(4, 10.0, seed=0))
    b = [rounding_budget(qp, 1.0, r) for r in (1.0, 1e-2, 1e-4)]
    assert b[0] == pytest.approx(verify.TOL, rel=1e-2)
    assert b[0] < b[1] < b[2]
    assert rounding_budget(qp, 1.0, 0.0) == np.inf


def test_delta_battery_detects_wrong_prediction(monkeypatch):
    monkeypatch.setattr(qn.BroydenFamily, "predicted_delta", lambda self, ctx: 1.0)
    assert not run_batteries(10, seed=1, only=["delta-prediction"])["delta-prediction"].passed


def test_equivalence_battery_detects_broken_update(monkeypatch):
    real = qn.broyden_update

    def skewed(B_prev, p_prev, H, phi):
        B = real(B_prev, p_prev, H, phi)
        return B + 1e-3 * np.eye(B.shape[0])

    monkeypatch.setattr(qn, "broyden_update", skewed)
    assert not run_batteries(10, seed=1, only=["broyden-equivalence"])["broyden-equivalence"].passed
