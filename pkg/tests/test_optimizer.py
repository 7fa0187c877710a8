import numpy as np
import pytest

from delayring.ct_single import optimal_point
from delayring.modes import ModelSettings
from delayring.optimizer import (
    design_exact,
    design_quadratic_approx,
    objective_and_gradient,
    random_feasible_start,
)
from delayring.topology import DelayModel, NetworkSpec

CT = ModelSettings("ct-single")
STAR = optimal_point(1.0)


def test_ring_of_three_reduces_to_scalar_problem():
    spec = NetworkSpec(3, 1, DelayModel.linear())
    res = design_exact(spec, CT)
    assert res.converged
    assert res.gains.k[0] == pytest.approx(STAR.lambda_star / 3, rel=1e-9)
    assert res.objective == pytest.approx(2 * STAR.C_star, rel=1e-12)
    np.testing.assert_allclose(res.spectrum.nontrivial(), STAR.lambda_star, rtol=1e-9)


@pytest.mark.parametrize("N", [5, 7, 11])
def test_fully_connected_objective(N):
    spec = NetworkSpec(N, (N - 1) // 2, DelayModel.constant(2.0))
    res = design_exact(spec, CT)
    assert res.objective == pytest.approx((N - 1) * STAR.C_star * 2.0, rel=1e-12)
    approx = design_quadratic_approx(spec, CT)
    np.testing.assert_allclose(approx.spectrum.nontrivial(), STAR.beta_star / 2.0, rtol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exact_beats_approx(n):
    spec = NetworkSpec(10, n, DelayModel.linear())
    exact = design_exact(spec, CT)
    approx = design_quadratic_approx(spec, CT)
    assert exact.converged and exact.grad_norm < 1e-8
    assert exact.objective <= approx.objective + 1e-12
    np.testing.assert_allclose(exact.spectrum.nontrivial().min() > 0, True)


def test_quadratic_design_gain():
    spec = NetworkSpec(20, 1, DelayModel.constant(1.0))
    k = design_quadratic_approx(spec, CT).gains.k[0]
    assert k == pytest.approx(STAR.beta_star / 3, rel=1e-15)
    k2 = design_quadratic_approx(NetworkSpec(20, 1, DelayModel.constant(2.0)), CT).gains.k[0]
    assert k2 == pytest.approx(k / 2, rel=1e-15)


def test_restarts_agree():
    spec = NetworkSpec(15, 4, DelayModel.linear())
    rng = np.random.default_rng(3)
    base = design_exact(spec, CT).objective
    for _ in range(5):
        res = design_exact(spec, CT, start=random_feasible_start(spec, CT, rng))
        assert res.converged
        assert res.objective == pytest.approx(base, rel=1e-7)


@pytest.mark.parametrize(
    "settings,spec",
    [
        (CT, NetworkSpec(12, 3, DelayModel.linear())),
        (ModelSettings("ct-double", eta_normalized=70.0), NetworkSpec(12, 3, DelayModel.linear())),
        (ModelSettings("dt-single"), NetworkSpec(12, 3, DelayModel.linear())),
        (ModelSettings("dt-double", eta=0.5), NetworkSpec(12, 2, DelayModel.linear())),
    ],
)
def test_gradient_matches_finite_differences(settings, spec):
    k = design_quadratic_approx(spec, settings).gains.as_array() * 0.8
    f, g = objective_and_gradient(spec, settings, k)
    h = 1e-6 * np.max(k)
    fd = np.array([
        (objective_and_gradient(spec, settings, k + h * e)[0] - objective_and_gradient(spec, settings, k - h * e)[0]) / (2 * h)
        for e in np.eye(spec.n)
    ])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(g)))


def test_gap_shrinks_with_connectivity():
    gaps = []
    for n in range(1, 6):
        spec = NetworkSpec(11, n, DelayModel.constant(1.0))
        exact = design_exact(spec, CT).objective
        approx = design_quadratic_approx(spec, CT).objective
        gaps.append((approx - exact) / exact)
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-9


def test_iteration_limit_reported():
    spec = NetworkSpec(15, 4, DelayModel.linear())
    res = design_exact(spec, CT, max_iter=0)
    assert not res.converged
    assert "iteration limit" in res.message
    rec = res.record()
    assert rec["method"] == "exact" and len(rec["gains"]) == 4


def test_bad_start_rejected():
    spec = NetworkSpec(9, 2, DelayModel.linear())
    with pytest.raises(ValueError):
        design_exact(spec, CT, start=[0.1])
    from delayring.errors import InfeasibleDesignError

    with pytest.raises(InfeasibleDesignError):
        design_exact(spec, CT, start=[10.0, 10.0])


@pytest.mark.parametrize("settings", [ModelSettings("dt-single"), ModelSettings("dt-double", eta=0.2)])
def test_discrete_designs_converge(settings):
    for n in (1, 3, 6):
        spec = NetworkSpec(14, n, DelayModel.linear())
        res = design_exact(spec, settings)
        assert res.converged, res.message
        assert res.objective <= design_quadratic_approx(spec, settings).objective + 1e-12
