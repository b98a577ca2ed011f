"""
Test colored noise and the simulated plants
"""

import math

import numpy as np
import pytest
from scipy import signal

from agent.base import DimensionError
from plants.base import PlantError, step_plant
from plants.lti import LTIPlant, integrator_plant
from plants.mountain_car import MAX_SPEED, MIN_POSITION, MountainCarPlant
from plants.noise import ColoredNoiseConfig, ColoredNoiseStream, colored_noise, gaussian_kernel, kernel_half_width
from plants.tmaze import CENTER, CUE, LEFT, RIGHT, TMazeEnv, state_index


def autocorrelation(x, lag):
    x = x - x.mean()
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))


# colored noise

def test_white_noise_is_uncorrelated():
    noise = colored_noise(100_000, ColoredNoiseConfig(0.0, [[1.0]], seed=0), dt=0.1)[:, 0]
    assert abs(autocorrelation(noise, 1)) < 0.05


@pytest.mark.parametrize("lag", [1, 5, 10, 20])
def test_smooth_noise_autocorrelation(lag):
    noise = colored_noise(100_000, ColoredNoiseConfig(1.0, [[1.0]], seed=1), dt=0.1)[:, 0]
    expected = math.exp(-(lag * 0.1) ** 2 / 4.0)
    assert autocorrelation(noise, lag) == pytest.approx(expected, abs=0.05)


def test_noise_covariance_is_exact():
    covariance = np.array([[1.0, 0.3], [0.3, 0.5]])
    noise = colored_noise(5000, ColoredNoiseConfig(0.5, covariance, seed=2), dt=0.05)
    np.testing.assert_allclose(noise.T @ noise / len(noise), covariance, atol=1e-10)


def test_noise_is_seeded():
    cfg = ColoredNoiseConfig(0.3, [[2.0]], seed=9)
    np.testing.assert_array_equal(colored_noise(500, cfg, 0.1), colored_noise(500, cfg, 0.1))


def test_noise_needs_samples_beyond_kernel_support():
    cfg = ColoredNoiseConfig(1.0, [[1.0]], seed=0)
    assert kernel_half_width(1.0, 0.1) == 40
    with pytest.raises(ValueError):
        colored_noise(81, cfg, dt=0.1)
    assert colored_noise(82, cfg, dt=0.1).shape == (82, 1)


def test_kernel_has_unit_energy():
    kernel = gaussian_kernel(0.5, 0.05)
    assert np.sum(kernel ** 2) == pytest.approx(1.0)
    np.testing.assert_allclose(kernel, kernel[::-1])


def test_noise_config_validation():
    with pytest.raises(ValueError):
        ColoredNoiseConfig(-1.0, [[1.0]], seed=0)
    with pytest.raises(ValueError):
        ColoredNoiseConfig(1.0, [[1.0, 2.0], [2.0, 1.0]], seed=0)


# linear plants

def oscillator(**kwargs):
    return LTIPlant([[0.0, 1.0], [-1.0, -0.2]], [[0.0], [1.0]], [[1.0, 0.0]], x0=[1.0, 0.0], dt=0.01, **kwargs)


def test_lti_matches_closed_form():
    plant = oscillator()
    for _ in range(50):
        plant.step([0.0])
    expected = np.linalg.matrix_power(np.eye(2) + 0.01 * plant.A, 50) @ [1.0, 0.0]
    np.testing.assert_allclose(plant.state, expected, rtol=1e-12)
    np.testing.assert_allclose(plant.observe(), expected[:1], rtol=1e-12)


def test_lti_peek_does_not_advance():
    plant = oscillator()
    predicted = plant.peek([0.5])
    assert plant.steps == 0
    np.testing.assert_allclose(plant.step([0.5]), predicted)


def test_lti_noise_is_reproducible():
    noise = ColoredNoiseConfig(0.2, [[0.1]], seed=4)
    runs = []
    for _ in range(2):
        plant = oscillator(obs_noise=noise)
        runs.append([plant.step([0.0])[0] for _ in range(20)])
    assert runs[0] == runs[1]


def test_noise_stream_filters_across_chunk_boundaries():
    cfg = ColoredNoiseConfig(0.05, [[2.0]], seed=7)
    stream = ColoredNoiseStream(cfg, dt=0.01, chunk_size=64)
    samples = np.array([stream.next() for _ in range(3 * 64)])

    # one long convolution over the same white draws
    rng = np.random.default_rng(7)
    half = kernel_half_width(0.05, 0.01)
    white = np.concatenate([rng.standard_normal((2 * half, 1))] + [rng.standard_normal((64, 1)) for _ in range(3)])
    expected = signal.fftconvolve(white, gaussian_kernel(0.05, 0.01)[:, None], mode='valid', axes=0) * np.sqrt(2.0)
    np.testing.assert_allclose(samples, expected, atol=1e-10)


def test_noise_stream_variance_matches_target():
    stream = ColoredNoiseStream(ColoredNoiseConfig(0.05, [[0.5]], seed=1), dt=0.01, chunk_size=256)
    samples = np.array([stream.next()[0] for _ in range(20000)])
    assert np.var(samples) == pytest.approx(0.5, rel=0.15)


def test_lti_noise_stream_crosses_chunks():
    process = ColoredNoiseConfig(0.0, [[1e-4]], seed=3)
    plant = LTIPlant([[0.0]], [[0.0]], [[1.0]], x0=[0.0], dt=0.01, process_noise=process)
    states = [plant.step([0.0])[0] for _ in range(5000)]
    draws = np.diff(np.concatenate([[0.0], states]))
    assert np.all(np.isfinite(draws))
    assert not np.allclose(draws[4096:4106], draws[:10])


def test_lti_reset_returns_to_initial_state():
    plant = oscillator()
    plant.step([1.0])
    np.testing.assert_allclose(plant.reset(), [1.0])
    assert plant.steps == 0


def test_lti_input_checks():
    with pytest.raises(PlantError):
        oscillator().step([0.0, 1.0])
    with pytest.raises(DimensionError):
        LTIPlant(np.eye(2), np.ones((3, 1)), np.eye(2), x0=[0.0, 0.0], dt=0.1)
    with pytest.raises(PlantError):
        LTIPlant(np.eye(2), np.ones((2, 1)), np.eye(2), x0=[0.0], dt=0.1)
    with pytest.raises(PlantError):
        integrator_plant(dt=0.0)


def test_step_plant_with_frozen_dynamics_keeps_state():
    plant = LTIPlant([[0.0, 0.0], [0.0, 0.0]], [[0.0], [0.0]], np.eye(2), x0=[0.3, -1.2], dt=0.1)
    for _ in range(10):
        np.testing.assert_array_equal(step_plant(plant, [5.0]), [0.3, -1.2])
    assert plant.steps == 10


def test_step_plant_checks_input_size():
    with pytest.raises(PlantError):
        step_plant(integrator_plant(dofs=2), [1.0])


def test_integrator_moves_by_dt_times_input():
    plant = integrator_plant(dofs=2, dt=0.1, x0=[1.0, 2.0])
    np.testing.assert_allclose(plant.step([1.0, -1.0]), [1.1, 1.9])


# mountain car

def test_mountain_car_equilibrium():
    car = MountainCarPlant()
    car.place(-math.pi / 6)
    car.step([0.0])
    assert car.position == pytest.approx(-math.pi / 6, abs=1e-12)
    assert car.velocity == pytest.approx(0.0, abs=1e-12)


def test_mountain_car_full_throttle_is_not_enough():
    car = MountainCarPlant(seed=0)
    while not car.done:
        car.step([1.0])
    assert not car.reached_goal
    assert car.steps == 200


def test_mountain_car_left_wall_stops_the_car():
    car = MountainCarPlant()
    car.place(MIN_POSITION + 0.01, -0.05)
    car.step([-1.0])
    assert car.position == MIN_POSITION
    assert car.velocity == 0.0


def test_mountain_car_speed_and_force_are_clipped():
    car = MountainCarPlant()
    car.place(-0.5, MAX_SPEED)
    np.testing.assert_array_equal(car.peek([5.0]), car.peek([1.0]))
    assert car.peek([1.0])[1] <= MAX_SPEED


def test_mountain_car_rollout_matches_steps():
    car = MountainCarPlant(seed=3)
    actions = np.array([[[1.0], [-1.0], [0.5], [0.0]]])
    predicted = car.rollout(car.observe(), actions)
    stepped = np.array([car.step(a) for a in actions[0]])
    np.testing.assert_allclose(predicted[0], stepped)


def test_mountain_car_rewards():
    sparse = MountainCarPlant()
    assert sparse.reward([[0.5, 0.0], [0.0, 0.0]]).tolist() == [1.0, 0.0]
    shaped = MountainCarPlant(sparse_reward=False)
    assert shaped.reward([0.45, 0.0]) == pytest.approx(1.0)
    assert shaped.reward([MIN_POSITION, 0.0]) == pytest.approx(0.0)


def test_mountain_car_seeded_starts():
    first = MountainCarPlant().reset(seed=7)
    second = MountainCarPlant().reset(seed=7)
    np.testing.assert_array_equal(first, second)
    assert -0.6 <= first[0] <= -0.4
    assert first[1] == 0.0


# T-maze

def test_tmaze_state_index():
    assert state_index(CENTER, 0) == 0
    assert state_index(CUE, 1) == 7


def test_tmaze_model_is_a_valid_pomdp():
    pomdp = TMazeEnv(reward_probability=0.8, cue_validity=0.95).as_pomdp()
    assert (pomdp.num_obs, pomdp.num_states, pomdp.num_actions) == (7, 8, 4)


@pytest.mark.parametrize("seed", range(4))
def test_tmaze_cue_reveals_context(seed):
    env = TMazeEnv(seed=seed)
    assert env.observe() == 0
    assert env.step([CUE]) == 1 + env.context
    assert not env.done


def test_tmaze_arms_are_absorbing():
    env = TMazeEnv(seed=0)
    env.step([LEFT])
    assert env.done
    env.step([RIGHT])
    assert env.state == LEFT


def test_tmaze_rewarded_arm_pays_at_its_probability():
    paid = 0
    for seed in range(200):
        env = TMazeEnv(reward_probability=0.9, seed=seed)
        env.step([(LEFT, RIGHT)[env.context]])
        paid += env.reached_goal
    assert 0.8 < paid / 200 < 0.97


def test_tmaze_input_checks():
    with pytest.raises(PlantError):
        TMazeEnv().step([4])
    with pytest.raises(PlantError):
        TMazeEnv(reward_probability=1.5)


@pytest.mark.parametrize("reward_probability, cue_validity", [(1.0, 1.0), (0.0, 1.0), (0.9, 0.9), (0.2, 0.85)])
def test_tmaze_arms_must_be_less_informative_than_the_cue(reward_probability, cue_validity):
    with pytest.raises(PlantError, match="more informative"):
        TMazeEnv(reward_probability=reward_probability, cue_validity=cue_validity)


def test_tmaze_accepts_a_misleading_but_informative_cue():
    env = TMazeEnv(reward_probability=0.6, cue_validity=0.1)
    assert env.likelihood()[1, state_index(CUE, 0)] == pytest.approx(0.1)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
