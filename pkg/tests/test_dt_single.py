import math

import numpy as np
import pytest

from delayring.dt_single import (
    DtDelay,
    characteristic_coeffs,
    dt_single_threshold,
    moment_matching_variance,
    moment_system,
    numeric_convexity_check,
    recursive_variance,
    root_radius,
    wiener_khintchine_variance,
)
from delayring.errors import UnstableError


def tau1_closed_form(lam):
    # hand elimination of the two-equation moment system
    return (1 + lam) / (lam * (1 - lam) * (2 + lam))


def test_thresholds():
    assert dt_single_threshold(1) == 1.0
    assert dt_single_threshold(0) == 2.0
    assert 10 * dt_single_threshold(10) < math.pi / 2
    seq = [t * dt_single_threshold(t) for t in range(1, 60)]
    assert all(b > a for a, b in zip(seq, seq[1:]))
    assert all(v < math.pi / 2 for v in seq)
    thr = [dt_single_threshold(t) for t in range(0, 30)]
    assert all(b < a for a, b in zip(thr, thr[1:]))


def test_delay_ceiling():
    assert DtDelay.from_continuous(2.5, 1.0).steps == 3
    assert DtDelay.from_continuous(3.0, 1.0).steps == 3
    assert DtDelay.from_continuous(0.1 * 3, 0.1).steps == 3
    with pytest.raises(ValueError):
        DtDelay(-1)


@pytest.mark.parametrize("tau", range(1, 7))
def test_root_radius_brackets_threshold(tau):
    thr = dt_single_threshold(tau)
    assert root_radius(characteristic_coeffs(thr * (1 - 1e-7), tau)) < 1
    assert root_radius(characteristic_coeffs(thr * (1 + 1e-7), tau)) > 1


def test_root_radius_special_cases():
    assert root_radius(characteristic_coeffs(0.0, 3)) == pytest.approx(1.0, abs=1e-12)
    assert root_radius(characteristic_coeffs(1.0, 0)) == 0.0
    with pytest.raises(ValueError):
        root_radius([0.0, 0.0])
    with pytest.raises(ValueError):
        root_radius([0.0, 1.0])


def test_quadrature_examples():
    assert wiener_khintchine_variance(characteristic_coeffs(0.5, 0)) == pytest.approx(4 / 3, abs=1e-12)
    assert wiener_khintchine_variance(characteristic_coeffs(0.5, 1)) == pytest.approx(2.4, abs=1e-8)
    h = characteristic_coeffs(0.3, 4)
    a = wiener_khintchine_variance(h, 1 << 12)
    b = wiener_khintchine_variance(h, 1 << 13)
    assert abs(a - b) < 1e-10
    with pytest.raises(UnstableError):
        wiener_khintchine_variance(characteristic_coeffs(1.1, 1))


def test_quadrature_accepts_callable():
    h = lambda z: z * z - z + 0.5
    assert wiener_khintchine_variance(h) == pytest.approx(2.4, abs=1e-10)


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.9])
def test_tau_one_closed_form(lam):
    assert moment_matching_variance(lam, 1) == pytest.approx(tau1_closed_form(lam), rel=1e-13)
    assert recursive_variance(lam, 1) == pytest.approx((1 + lam) / (2 * lam - lam**2 - lam**3), rel=1e-13)


def test_moment_matrix_middle_rows():
    lam = 0.3
    np.testing.assert_allclose(moment_system(lam, 3).A[2], [0, 1, -1 - lam, 0])
    np.testing.assert_allclose(moment_system(lam, 4).A[3], [0, 0, 1 - lam, -1, 0])


def test_moment_residual_and_rank():
    for tau in range(1, 21):
        sys_ = moment_system(0.5 * dt_single_threshold(tau), tau)
        rho = sys_.solve()
        assert np.max(np.abs(sys_.A @ rho - sys_.rhs)) < 1e-10
        assert np.linalg.matrix_rank(sys_.A) == tau + 1


def test_recursion_base_cases():
    assert recursive_variance(0.4, 0) == pytest.approx(1 / (2 * 0.4 - 0.16), rel=1e-15)
    assert recursive_variance(0.2, 7) == pytest.approx(moment_matching_variance(0.2, 7), rel=1e-9)


def test_recursion_matches_solve_to_tau_25():
    for tau in range(0, 26):
        thr = dt_single_threshold(tau)
        for f in (0.1, 0.5, 0.9):
            lam = f * thr
            assert recursive_variance(lam, tau) == pytest.approx(moment_matching_variance(lam, tau), rel=1e-9)


def test_unstable_inputs():
    for fn in (moment_matching_variance, recursive_variance):
        with pytest.raises(UnstableError):
            fn(1.0, 1)
        with pytest.raises(UnstableError):
            fn(0.0, 3)


@pytest.mark.parametrize("tau", [0, 1, 15])
def test_convexity_check(tau):
    assert numeric_convexity_check(tau)


@pytest.mark.parametrize("tau", range(1, 6))
def test_variance_grows_toward_boundary(tau):
    thr = dt_single_threshold(tau)
    assert moment_matching_variance(0.999 * thr, tau) >= 10 * moment_matching_variance(0.5 * thr, tau)
