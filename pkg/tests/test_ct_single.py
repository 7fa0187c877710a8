import math

import numpy as np
import pytest

from delayring.ct_single import (
    HALF_PI,
    g_normalized,
    optimal_point,
    stability_ct_single,
    suboptimal_coefficients,
    suboptimal_multipliers,
    variance_ct_single,
)
from delayring.errors import InfeasibleDesignError, UnstableError
from delayring.topology import DelayModel, NetworkSpec, Spectrum


def dottie(iterations=500):
    # fixed point of cos: the stationarity condition g'(beta) = 0 reduces to
    # beta = cos(beta)
    b = 1.0
    for _ in range(iterations):
        b = math.cos(b)
    return b


BETA_STAR = dottie()


def golden_section(f, a, b, tol=1e-13):
    r = (math.sqrt(5) - 1) / 2
    c, d = b - r * (b - a), a + r * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - r * (b - a)
        else:
            a, c = c, d
            d = a + r * (b - a)
    return 0.5 * (a + b)


def test_undelayed_ou():
    assert variance_ct_single(1.0, 0.0) == pytest.approx(0.5, rel=1e-15)


def test_quarter_pi_unit_delay():
    expected = (1 + math.sqrt(2) / 2) / ((math.pi / 2) * (math.sqrt(2) / 2))
    assert variance_ct_single(math.pi / 4, 1.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.537, abs=5e-4)


def test_blows_up_monotonically_at_boundary():
    gaps = [1e-1, 1e-2, 1e-3, 1e-5, 1e-8]
    vals = [variance_ct_single(HALF_PI - g, 1.0) for g in gaps]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1e7


@pytest.mark.parametrize("lam", [0.0, -0.1, HALF_PI, 2.0])
def test_outside_region_raises(lam):
    with pytest.raises(UnstableError):
        variance_ct_single(lam, 1.0)


def test_stability_verdicts():
    assert stability_ct_single(Spectrum((0.0, 1.0, 1.0, 1.0)), 1.0).stable
    assert not stability_ct_single(Spectrum((0.0, -0.1, 1.0, -0.1)), 1.0).stable
    v = stability_ct_single(Spectrum((0.0, HALF_PI, HALF_PI)), 1.0)
    assert not v.stable and v.margin == 0.0
    assert stability_ct_single(Spectrum((0.0, 0.5, 0.5)), 2.0).margin == pytest.approx(HALF_PI - 1.0)


def test_beta_star_against_golden_section_oracle():
    oracle = golden_section(lambda b: float(g_normalized(b)), 0.70, 0.80)
    p = optimal_point(1.0)
    assert 0.70 <= p.beta_star <= 0.80
    assert p.beta_star == pytest.approx(oracle, abs=1e-6)  # golden-section resolves beta to ~sqrt(eps)
    assert p.beta_star == pytest.approx(BETA_STAR, abs=1e-10)
    assert p.C_star == pytest.approx(float(g_normalized(BETA_STAR)), rel=1e-14)


@pytest.mark.parametrize("tau", [0.1, 1.0, 2.0, 10.0])
def test_optimal_point_scaling(tau):
    p = optimal_point(tau)
    assert p.beta_star == pytest.approx(BETA_STAR, abs=1e-10)
    assert p.lambda_star == pytest.approx(BETA_STAR / tau, rel=1e-10)
    assert variance_ct_single(p.lambda_star, tau) == pytest.approx(p.C_star * tau, rel=1e-9)
    for s in (0.9, 1.1):
        assert variance_ct_single(s * p.lambda_star, tau) > p.C_star * tau


@pytest.mark.parametrize("s", [0.3, 1.0, 2.5, 17.0])
def test_scaling_identity(s):
    lam, tau = 0.4, 1.7
    assert variance_ct_single(lam / s, s * tau) == pytest.approx(s * variance_ct_single(lam, tau), rel=1e-13)


def test_convexity_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(200):
        tau = rng.uniform(0.1, 5.0)
        la, lb = rng.uniform(1e-3, HALF_PI / tau * (1 - 1e-3), size=2)
        th = rng.uniform()
        mid = variance_ct_single(th * la + (1 - th) * lb, tau)
        assert mid <= th * variance_ct_single(la, tau) + (1 - th) * variance_ct_single(lb, tau) + 1e-12


@pytest.mark.parametrize("N", [5, 7, 9])
def test_fully_connected_coefficients_equal_c_star(N):
    s = NetworkSpec(N, (N - 1) // 2, DelayModel.linear())
    np.testing.assert_allclose(suboptimal_multipliers(s), 1.0, rtol=1e-13)
    np.testing.assert_allclose(suboptimal_coefficients(s), optimal_point().C_star, rtol=1e-12)


def test_ring_of_four_multipliers():
    s = NetworkSpec(4, 1, DelayModel.linear())
    np.testing.assert_allclose(suboptimal_multipliers(s), np.array([2.0, 4.0, 2.0]) / 3, rtol=1e-14)


def test_coefficients_exceed_c_star():
    c_star = optimal_point().C_star
    for N in (6, 11, 25, 50):
        for n in range(1, (N - 1) // 2 + 1):
            try:
                c = suboptimal_coefficients(NetworkSpec(N, n, DelayModel.linear()))
            except InfeasibleDesignError:
                continue
            assert np.all(c >= c_star * (1 - 1e-14))


def test_uniform_multipliers_never_exceed_four_thirds():
    # so the uniform design is always feasible for the real beta*
    worst = max(
        suboptimal_multipliers(NetworkSpec(N, n, DelayModel.linear())).max()
        for N in range(3, 60)
        for n in range(1, (N - 1) // 2 + 1)
    )
    assert worst == pytest.approx(4 / 3, rel=1e-12)
    assert worst * BETA_STAR < HALF_PI


def test_infeasible_uniform_design_names_subsystem(monkeypatch):
    import delayring.ct_single as mod

    monkeypatch.setattr(mod, "_beta_star", lambda: (1.5, 10.0))
    with pytest.raises(InfeasibleDesignError, match="j=3"):
        suboptimal_coefficients(NetworkSpec(4, 1, DelayModel.linear()))
