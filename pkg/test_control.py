"""
Test action updates, sensory-action Jacobians, closed loops and the PID reference
"""

import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from agent.base import DimensionError
from agent.control import (
    ControllerConfig,
    JacobianStrategy,
    PidGains,
    generalize_action_jacobian,
    pid_controller,
    run_aic,
    sensory_action_jacobian,
    sign_jacobian,
    step_action,
)
from agent.gencoords import GeneralizedVector, SmoothnessKernel
from agent.inference import EstimatorConfig, initial_beliefs
from agent.model import AttractorGoal, AttractorModel, LinearModel, NoiseSpec
from plants.base import step_plant
from plants.lti import integrator_plant


def reaching_model(target=1.0, tau=1.0):
    return AttractorModel(AttractorGoal([target], tau), NoiseSpec.isotropic(1.0, 1), NoiseSpec.isotropic(1.0, 1))


def test_sign_jacobian():
    assert sign_jacobian([[0.3, -2.0, 0.0]]).tolist() == [[1.0, -1.0, 0.0]]


def test_generalized_action_jacobian_blocks():
    np.testing.assert_allclose(generalize_action_jacobian([[2.0]], order=0, dt=0.1), [[2.0]])
    np.testing.assert_allclose(generalize_action_jacobian([[2.0]], order=1, dt=0.1), [[2.0], [20.0]])


def test_exact_jacobian_from_plant():
    plant = integrator_plant(dt=0.1)
    jac = sensory_action_jacobian('exact', plant, [0.0], order=0)
    np.testing.assert_allclose(jac, [[0.1]], rtol=1e-6)
    assert plant.steps == 0


def test_sign_only_jacobian_from_plant():
    plant = integrator_plant(dt=0.1)
    jac = sensory_action_jacobian(JacobianStrategy.SIGN_ONLY, plant, [0.0], order=1)
    assert jac.tolist() == [[1.0], [1.0]]


def test_nominal_jacobian_overrides_plant():
    plant = integrator_plant(dt=0.1)
    jac = sensory_action_jacobian('exact', plant, [0.0], order=0, nominal=[[-3.0]])
    assert jac.tolist() == [[-3.0]]


def test_step_action_example():
    model = LinearModel([[0.0]], None, [[1.0]], NoiseSpec.isotropic(1.0, 1), NoiseSpec.isotropic(1.0, 1))
    beliefs = initial_beliefs(model, GeneralizedVector(0, 1, [0.0]))
    cfg = ControllerConfig(kappa_u=1.0, dt=0.1)
    state = step_action(model, beliefs, GeneralizedVector(0, 1, [1.0]), [0.0], cfg, [[1.0]])
    assert state.u.tolist() == pytest.approx([-0.1])


def test_step_action_zero_gain_keeps_action():
    model = reaching_model()
    beliefs = initial_beliefs(model, GeneralizedVector(0, 1, [0.0]))
    cfg = ControllerConfig(kappa_u=0.0, dt=0.1)
    state = step_action(model, beliefs, GeneralizedVector(0, 1, [5.0]), [0.25], cfg, [[1.0]])
    assert state.u.tolist() == [0.25]


def test_step_action_checks_jacobian_shape():
    model = reaching_model()
    beliefs = initial_beliefs(model, GeneralizedVector(1, 1, [0.0, 0.0]))
    with pytest.raises(DimensionError):
        step_action(model, beliefs, GeneralizedVector(1, 1, [1.0, 0.0]), [0.0], ControllerConfig(), [[1.0]])


def test_controller_config_validation():
    assert ControllerConfig(jacobian_strategy='sign_only').jacobian_strategy is JacobianStrategy.SIGN_ONLY
    with pytest.raises(ValueError):
        ControllerConfig(kappa_u=-1.0)
    with pytest.raises(ValueError):
        ControllerConfig(jacobian_strategy='guess')


def test_zero_action_gain_leaves_plant_at_rest():
    plant = integrator_plant(dt=0.05)
    trace = run_aic(plant, reaching_model(), EstimatorConfig(kappa_x=10.0, dt=0.005, steps_per_observation=10),
                    ControllerConfig(kappa_u=0.0, dt=0.05), horizon=100)
    assert len(trace) == 100
    assert plant.state.tolist() == [0.0]
    assert not np.any(np.array(trace.actions))


@pytest.mark.parametrize("strategy", ['exact', 'sign_only'])
def test_closed_loop_reaches_target(strategy):
    plant = integrator_plant(dt=0.05)
    est = EstimatorConfig(kappa_x=10.0, dt=0.005, steps_per_observation=10)
    ctrl = ControllerConfig(kappa_u=2.0, dt=0.05, jacobian_strategy=strategy)
    trace = run_aic(plant, reaching_model(), est, ctrl, horizon=2000, order=1)

    assert abs(plant.state[0] - 1.0) < 0.02
    tenth = len(trace) // 10
    assert np.mean(trace.free_energy[-tenth:]) < np.mean(trace.free_energy[:tenth])
    assert trace.times[-1] == pytest.approx(2000 * 0.05)


def test_run_aic_checks_observation_channels():
    model = AttractorModel(AttractorGoal([1.0, 1.0], 1.0), NoiseSpec.isotropic(1.0, 2), NoiseSpec.isotropic(1.0, 2))
    with pytest.raises(DimensionError):
        run_aic(integrator_plant(dofs=1), model, EstimatorConfig(), ControllerConfig(), horizon=5)


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_action_step_descends_the_sensory_term(seed):
    rng = np.random.default_rng(seed)
    obs_noise = NoiseSpec(np.diag(rng.uniform(0.5, 2.0, 2)), SmoothnessKernel(sigma=0.5))
    model = LinearModel(-np.eye(2), None, rng.standard_normal((2, 2)), NoiseSpec.isotropic(1.0, 2), obs_noise)
    beliefs = initial_beliefs(model, GeneralizedVector(1, 2, rng.standard_normal(4)))
    y = GeneralizedVector(1, 2, rng.standard_normal(4))
    jac = rng.standard_normal((4, 3))
    u = rng.standard_normal(3)
    step = step_action(model, beliefs, y, u, ControllerConfig(kappa_u=rng.uniform(0.1, 5.0), dt=0.01), jac).u - u

    eps_y = y.data - model.observation(beliefs.mean).data
    direction = jac.T @ model.obs_noise.generalized_precision(1).matrix @ eps_y
    assert step @ direction <= 0.0


def test_stiff_beliefs_are_flagged_before_the_loop(caplog):
    with caplog.at_level(logging.WARNING, logger='agent.control'):
        run_aic(integrator_plant(), reaching_model(tau=1e-6), EstimatorConfig(), ControllerConfig(), horizon=0)
    assert 'kappa_x*dt*lambda_max' in caplog.text


def test_pid_proportional():
    pid = pid_controller(PidGains(kp=2.0), target=1.0, dt=0.1)
    assert pid(0.5).tolist() == [1.0]


def test_pid_integral_accumulates():
    pid = pid_controller(PidGains(ki=1.0), target=1.0, dt=0.1)
    assert pid(0.0).tolist() == pytest.approx([0.1])
    assert pid(0.0).tolist() == pytest.approx([0.2])


def test_pid_first_derivative_is_zero():
    pid = pid_controller(PidGains(kd=1.0), target=0.0, dt=0.1)
    assert pid(1.0).tolist() == [0.0]
    assert pid(0.5).tolist() == pytest.approx([5.0])


def test_pid_reset_with_previous_measurement():
    pid = pid_controller(PidGains(kd=1.0), target=0.0, dt=0.1)
    pid.reset(measurement=0.0)
    assert pid(1.0).tolist() == pytest.approx([-10.0])


def test_pid_gains_are_non_negative():
    with pytest.raises(ValueError):
        PidGains(kp=-1.0)


def test_pi_step_response_has_no_steady_state_error():
    # a constant load on the integrator leaves a P controller short of the target
    def settle(gains):
        plant = integrator_plant(dt=0.01)
        pid = pid_controller(gains, target=1.0, dt=0.01)
        y = plant.observe()
        for _ in range(3000):
            y = step_plant(plant, pid(y) - 0.5)
        return y[0]

    assert settle(PidGains(kp=1.0, ki=1.0)) == pytest.approx(1.0, abs=1e-4)
    assert settle(PidGains(kp=1.0)) == pytest.approx(0.5, abs=1e-3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
