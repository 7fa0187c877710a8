import math

import numpy as np
import pytest

from delayring.ct_double import phi_of_eta
from delayring.ct_single import variance_ct_single
from delayring.dt_single import dt_single_threshold, moment_matching_variance
from delayring.sim import (
    SimConfig,
    default_step_size,
    replicate_generator,
    simulate,
    simulate_ct_double,
    simulate_ct_single,
    simulate_dt,
)
from delayring.topology import DelayModel, GainProfile, NetworkSpec, circulant_eigenvalues


def within(res, target, k=3.0):
    return abs(res.variance_estimate - target) <= k * res.standard_error


def test_ornstein_uhlenbeck():
    res = simulate_ct_single(SimConfig("ct-single", 2000.0, lambdas=(1.0,), tau=0.0, step_size=1 / 64, seed=1))
    assert within(res, 0.5)
    assert res.history_length == 0 and not res.diverged


def test_ct_single_closed_form():
    lam = math.pi / 4
    res = simulate(SimConfig("ct-single", 1000.0, lambdas=(lam,), tau=1.0, seed=2))
    assert variance_ct_single(lam, 1.0) == pytest.approx(1.537, abs=1e-3)
    assert within(res, variance_ct_single(lam, 1.0))
    assert res.history_length == 64 and res.step_size == 1 / 64


def test_ct_single_divergence():
    res = simulate(SimConfig("ct-single", 400.0, lambdas=(1.1 * math.pi / 2,), tau=1.0, replicates=2))
    assert res.diverged and res.component_diverged == (True,)
    assert math.isinf(res.variance_estimate)


def test_ct_double_stability_sides():
    eta = 5.0
    phi = phi_of_eta(eta)
    res = simulate_ct_double(SimConfig("ct-double", 300.0, lambdas=(0.5 * phi, 1.2 * phi), tau=1.0,
                                       eta=eta, replicates=2))
    assert res.component_diverged == (False, True)
    assert math.isfinite(res.component_estimates[0])


def test_dt_single_value_and_divergence():
    res = simulate_dt(SimConfig("dt-single", 40000, lambdas=(0.5,), tau=1, seed=4))
    assert within(res, 2.4)
    bad = simulate_dt(SimConfig("dt-single", 20000, lambdas=(1.01 * dt_single_threshold(2),), tau=2, replicates=2))
    assert bad.diverged


def test_dt_double_position_variance():
    from delayring.dt_double import DtPdSubsystem, moment_matching_dt_double

    res = simulate_dt(SimConfig("dt-double", 40000, lambdas=(0.2,), tau=1, eta=0.5, seed=5))
    assert within(res, moment_matching_dt_double(DtPdSubsystem(0.5, 0.2, 1)))


def test_network_matches_decoupled_sum():
    spec = NetworkSpec(6, 1, DelayModel.constant(2.0))
    gains = GainProfile((0.15,))
    target = sum(moment_matching_variance(l, 2) for l in circulant_eigenvalues(spec, gains).nontrivial())
    res = simulate_dt(SimConfig("dt-single", 20000, spec=spec, gains=gains, seed=6))
    assert within(res, target)


def test_mean_free_error():
    spec = NetworkSpec(7, 2, DelayModel.linear(0.5))
    res = simulate(SimConfig("ct-single", 20.0, spec=spec, gains=GainProfile((0.2, 0.1)), replicates=2,
                             trajectory_every=7))
    traj = res.trajectory
    assert traj.shape[1] == 1 + 7
    assert np.max(np.abs(traj[:, 1:].sum(axis=1))) < 1e-10


def test_determinism_and_replicate_independence():
    cfg = dict(model="ct-single", horizon=50.0, lambdas=(0.7, 0.3), tau=1.0, seed=11)
    a = simulate(SimConfig(**cfg, replicates=3))
    b = simulate(SimConfig(**cfg, replicates=3))
    assert a.replicate_estimates == b.replicate_estimates
    c = simulate(SimConfig(**cfg, replicates=5))
    assert c.replicate_estimates[:3] == a.replicate_estimates


def test_generator_streams_distinct():
    x = replicate_generator(1, 0).standard_normal(4)
    y = replicate_generator(1, 1).standard_normal(4)
    assert not np.array_equal(x, y)
    np.testing.assert_array_equal(x, replicate_generator(1, 0).standard_normal(4))


def test_step_halving_is_within_one_standard_error():
    base = dict(model="ct-single", horizon=400.0, lambdas=(0.6,), tau=1.0, seed=8, replicates=16)
    coarse = simulate(SimConfig(**base, step_size=1 / 64, noise_substeps=2))
    fine = simulate(SimConfig(**base, step_size=1 / 128))
    assert abs(coarse.variance_estimate - fine.variance_estimate) < fine.standard_error


def test_coarse_step_warnings():
    res = simulate(SimConfig("ct-single", 50.0, lambdas=(0.5,), tau=1.0, step_size=0.3, replicates=2))
    text = " ".join(res.warnings)
    assert "< 10" in text and "not a multiple" in text


def test_default_step_size():
    assert default_step_size("ct-single", 2.0) == 2.0 / 64
    dt = default_step_size("ct-double", 1.0, 70.0)
    assert 70.0 * dt <= 1 / 16 and (1.0 / dt) == int(1.0 / dt)
    assert default_step_size("ct-single", 0.0) == 1 / 64


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(model="ct-single", horizon=10.0),
        dict(model="ct-single", horizon=10.0, lambdas=(1.0,)),
        dict(model="ct-single", horizon=10.0, lambdas=(1.0,), tau=1.0, burn_in=1.0),
        dict(model="ct-single", horizon=10.0, lambdas=(1.0,), tau=1.0, replicates=0),
        dict(model="ct-single", horizon=-1.0, lambdas=(1.0,), tau=1.0),
        dict(model="ct-double", horizon=10.0, lambdas=(1.0,), tau=1.0),
        dict(model="dt-single", horizon=10.0, lambdas=(1.0,), tau=1, noise_substeps=2),
        dict(model="ct-single", horizon=10.0, lambdas=(1.0,), tau=1.0, seed=-1),
        dict(model="ct-single", horizon=10.0, spec=NetworkSpec(5, 1, DelayModel.linear())),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_wrong_simulator_for_model():
    cfg = SimConfig("dt-single", 10, lambdas=(0.5,), tau=1)
    with pytest.raises(ValueError):
        simulate_ct_single(cfg)


def test_record_round_trip():
    res = simulate(SimConfig("dt-single", 100, lambdas=(0.5,), tau=1, replicates=2))
    rec = res.record()
    assert rec["steps"] == 100 and len(rec["replicate_estimates"]) == 2


@pytest.mark.slow
def test_ct_double_large_eta_matches_reduced_model():
    from delayring.ct_double import reduced_model_variance
    from delayring.ct_single import optimal_point

    beta = optimal_point().beta_star
    target = reduced_model_variance(70.0, beta)  # tau = 1, so normalized and physical units coincide
    res = simulate_ct_double(SimConfig("ct-double", 300.0, lambdas=(beta,), tau=1.0, eta=70.0,
                                       step_size=1 / 1024, replicates=4, seed=12))
    assert abs(res.variance_estimate - target) <= 0.15 * target
