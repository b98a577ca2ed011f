"""
Experiment pipelines

Builds plants and generative models from validated configs and runs one
seed of each experiment kind, returning trace rows and metrics.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List

import numpy as np

from agent.control import ControllerConfig, JacobianStrategy, PidGains, pid_controller, run_aic
from agent.gencoords import GeneralizedVector, SmoothnessKernel, embed_series, smoothness_precision
from agent.inference import run_filter, vfe
from agent.model import AttractorGoal, AttractorModel, LinearModel, NoiseSpec
from agent.planning import plan_act_loop
from oracles.kalman import KalmanState, kalman_step
from plants.base import step_plant
from plants.lti import LTIPlant
from plants.mountain_car import MountainCarPlant
from plants.noise import ColoredNoiseConfig, colored_noise
from plants.tmaze import CUE, ARMS, TMazeEnv
from .config import ExperimentConfig


logger = logging.getLogger(__name__)

PROCESS_STREAM = 1
OBSERVATION_STREAM = 2


@dataclass
class SeedResult:
    """Trace and metrics of one seed"""
    header: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)


def derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _columns(prefix: str, count: int) -> List[str]:
    return [f"{prefix}.{i}" for i in range(count)]


def build_noise(spec, seed: int, stream: int):
    if spec is None:
        return None
    return ColoredNoiseConfig(sigma=spec['sigma'], covariance=spec['covariance'],
                              seed=derived_seed(seed, stream))


def build_plant(cfg: ExperimentConfig, seed: int):
    spec = cfg.plant
    if spec['type'] in ('lti', 'integrator'):
        return LTIPlant(
            spec['A'], spec['B'], spec['C'], spec['x0'], spec['dt'],
            process_noise=build_noise(spec['process_noise'], seed, PROCESS_STREAM),
            obs_noise=build_noise(spec['obs_noise'], seed, OBSERVATION_STREAM),
        )
    if spec['type'] == 'tmaze':
        return TMazeEnv(spec['reward_probability'], spec['cue_validity'], spec['preference'], seed=seed)
    return MountainCarPlant(
        force_limit=spec['force_limit'],
        goal_position=spec['goal_position'],
        sparse_reward=spec['sparse_reward'],
        max_steps=spec['max_steps'],
        seed=seed,
    )


def _noise_spec(spec) -> NoiseSpec:
    return NoiseSpec(spec['covariance'], SmoothnessKernel(sigma=spec['sigma']))


def build_model(cfg: ExperimentConfig):
    spec = cfg.model
    process_noise = _noise_spec(spec['process_noise'])
    obs_noise = _noise_spec(spec['obs_noise'])
    if spec['type'] == 'linear':
        B = spec['B'] if np.asarray(spec['B']).size else None
        return LinearModel(spec['A'], B, spec['C'], process_noise, obs_noise)
    goal = AttractorGoal(target=spec['target'], tau=spec['tau'])
    return AttractorModel(goal, process_noise, obs_noise, C=spec['C'])


def _simulate_open_loop(plant: LTIPlant, u: np.ndarray, horizon: int):
    observations, states = [], []
    for _ in range(horizon):
        observations.append(step_plant(plant, u))
        states.append(plant.state)
    return np.array(observations), np.array(states)


def _filter(cfg: ExperimentConfig, model, plant, observations, u):
    initial = np.zeros((cfg.order + 1, model.state_dim))
    initial[0] = plant.x0
    causes = np.tile(u, (len(observations), 1)) if model.cause_dim else None
    beliefs = run_filter(model, observations, causes, cfg.estimator, order=cfg.order,
                         sample_dt=plant.dt, initial_mean=GeneralizedVector.from_blocks(initial))
    embedded = embed_series(observations, plant.dt, cfg.order)
    free_energy = [vfe(model, b, y, None if causes is None else causes[t])
                   for t, (b, y) in enumerate(zip(beliefs, embedded))]
    return beliefs, free_energy


def _state_mse(estimates: np.ndarray, states: np.ndarray) -> float:
    burn = len(states) // 2
    return float(np.mean((estimates[burn:] - states[burn:]) ** 2))


def run_estimate(cfg: ExperimentConfig, seed: int, with_kalman: bool = False) -> SeedResult:
    plant = build_plant(cfg, seed)
    model = build_model(cfg)
    n, q, m = plant.state_dim, plant.obs_dim, plant.input_dim
    width = model.state_dim * (cfg.order + 1)

    header = ['t'] + _columns('y', q) + _columns('mu', width) + _columns('u', m) + ['F'] + _columns('x', n)
    if with_kalman:
        header += _columns('kf', n)
    result = SeedResult(header=header)
    if cfg.horizon == 0:
        result.metrics = {'steps': 0}
        return result

    u = np.asarray(cfg.plant['input'], dtype=float)
    observations, states = _simulate_open_loop(plant, u, cfg.horizon)
    beliefs, free_energy = _filter(cfg, model, plant, observations, u)
    estimates = np.array([b.mean.blocks[0] for b in beliefs])

    kalman = []
    if with_kalman:
        A_d = plant.transition
        B_d = plant.dt * plant.B
        Q = (np.asarray(cfg.plant['process_noise']['covariance']) if cfg.plant['process_noise']
             else np.zeros((n, n)))
        R = np.asarray(cfg.plant['obs_noise']['covariance'])
        state = KalmanState(plant.x0, np.eye(n))
        for y in observations:
            state = kalman_step(A_d, B_d, plant.C, Q, R, state, u, y)
            kalman.append(state.mean)
        kalman = np.array(kalman)

    for t in range(cfg.horizon):
        row = [(t + 1) * plant.dt, *observations[t], *beliefs[t].mean.data, *u, free_energy[t], *states[t]]
        if with_kalman:
            row += list(kalman[t])
        result.rows.append(row)

    result.metrics = {
        'steps': cfg.horizon,
        'mse_aif': _state_mse(estimates, states),
        'final_error': float(np.max(np.abs(estimates[-1] - states[-1]))),
        'mean_F': float(np.mean(free_energy)),
    }
    if with_kalman:
        result.metrics['mse_kf'] = _state_mse(kalman, states)
        result.metrics['mse_ratio'] = result.metrics['mse_aif'] / max(result.metrics['mse_kf'], 1e-300)
    plant.log_summary({'seed': seed, **result.metrics})
    return result


def _control_header(plant, width: int) -> List[str]:
    return (['t'] + _columns('y', plant.obs_dim) + _columns('mu', width)
            + _columns('u', plant.input_dim) + ['F'] + _columns('x', plant.state_dim))


def _control_rows(trace) -> List[List[Any]]:
    return [[t, *y, *mu, *u, F, *x] for t, y, mu, u, F, x in zip(
        trace.times, trace.observations, trace.means, trace.actions, trace.free_energy, trace.plant_states)]


def _window_mean(values: List[float], first: bool) -> float:
    size = max(1, len(values) // 10)
    return float(np.mean(values[:size] if first else values[-size:]))


def run_control(cfg: ExperimentConfig, seed: int) -> SeedResult:
    plant = build_plant(cfg, seed)
    model = build_model(cfg)
    result = SeedResult(header=_control_header(plant, model.state_dim * (cfg.order + 1)))
    if cfg.horizon == 0:
        result.metrics = {'steps': 0}
        return result

    trace = run_aic(plant, model, cfg.estimator, cfg.controller, cfg.horizon, order=cfg.order)
    result.rows = _control_rows(trace)
    target = model.C @ model.goal.target
    result.metrics = {
        'steps': cfg.horizon,
        'final_abs_error': float(np.max(np.abs(trace.observations[-1] - target))),
        'mean_F_first': _window_mean(trace.free_energy, first=True),
        'mean_F_last': _window_mean(trace.free_energy, first=False),
    }
    plant.log_summary({'seed': seed, **result.metrics})
    return result


def pi_gains(model, controller: ControllerConfig) -> PidGains:
    """PI gains equivalent to order-1 sensory descent: kp from the y' precision, ki from the y precision"""
    S = smoothness_precision(SmoothnessKernel(model.obs_noise.smoothness.sigma, 1))
    precision = float(model.obs_noise.precision[0, 0])
    return PidGains(kp=controller.kappa_u * S[1, 1] * precision, ki=controller.kappa_u * S[0, 0] * precision)


def increment_mismatch(du_aif, du_pid, floor: float = 1e-8) -> float:
    """
    Largest per-step relative gap |du_aif - du_pid| / |du_pid|

    Steps where the PI increment crosses zero are measured against
    floor * max|du_pid| instead.
    """
    du_aif = np.asarray(du_aif, dtype=float)
    du_pid = np.asarray(du_pid, dtype=float)
    if du_pid.size == 0:
        return 0.0
    scale = np.maximum(np.abs(du_pid), floor * max(float(np.max(np.abs(du_pid))), 1e-300))
    return float(np.max(np.abs(du_aif - du_pid) / scale))


def run_compare_pid(cfg: ExperimentConfig, seed: int) -> SeedResult:
    plant = build_plant(cfg, seed)
    model = build_model(cfg)
    header = _control_header(plant, model.state_dim * (cfg.order + 1)) + ['u_pid', 'du_aif', 'du_pid']
    result = SeedResult(header=header)
    if cfg.horizon == 0:
        result.metrics = {'steps': 0}
        return result

    # the PI mapping holds for sign-only Jacobians stepped at the plant rate
    controller = replace(cfg.controller, jacobian_strategy=JacobianStrategy.SIGN_ONLY, dt=plant.dt)
    initial = np.zeros((cfg.order + 1, model.state_dim))
    initial[0] = model.goal.target
    y_initial = plant.observe()
    trace = run_aic(plant, model, cfg.estimator, controller, cfg.horizon, order=cfg.order,
                    initial_mean=GeneralizedVector.from_blocks(initial))

    pid = pid_controller(pi_gains(model, controller), model.C @ model.goal.target, plant.dt)
    pid.reset(measurement=y_initial)
    pid_actions = np.array([pid(y)[0] for y in trace.observations])
    aif_actions = np.array([u[0] for u in trace.actions])
    # the positional PI already outputs kp * e_0 before the first sample
    u_before = pid.gains.kp * float((pid.target - np.atleast_1d(y_initial))[0])
    du_aif = np.diff(np.concatenate([[0.0], aif_actions]))
    du_pid = np.diff(np.concatenate([[u_before], pid_actions]))

    for row, u_pid, a, p in zip(_control_rows(trace), pid_actions, du_aif, du_pid):
        result.rows.append(row + [u_pid, a, p])
    result.metrics = {
        'steps': cfg.horizon,
        'kp': pid.gains.kp,
        'ki': pid.gains.ki,
        'max_relative_mismatch': increment_mismatch(du_aif, du_pid),
    }
    plant.log_summary({'seed': seed, **result.metrics})
    return result


def run_noise(cfg: ExperimentConfig, seed: int) -> SeedResult:
    spec = cfg.noise
    dim = len(spec['covariance'])
    result = SeedResult(header=['t'] + _columns('noise', dim))
    if cfg.horizon == 0:
        result.metrics = {'steps': 0}
        return result

    noise_cfg = ColoredNoiseConfig(spec['sigma'], spec['covariance'], seed)
    samples = colored_noise(cfg.horizon, noise_cfg, spec['dt'])
    result.rows = [[t * spec['dt'], *sample] for t, sample in enumerate(samples)]
    result.metrics = {'steps': cfg.horizon}
    for i in range(dim):
        channel = samples[:, i]
        result.metrics[f'variance_{i}'] = float(np.mean(channel ** 2))
        result.metrics[f'lag1_autocorr_{i}'] = float(np.mean(channel[:-1] * channel[1:]) / np.mean(channel ** 2))
    return result


def run_plan(cfg: ExperimentConfig, seed: int) -> SeedResult:
    environment = build_plant(cfg, seed)
    planner = replace(cfg.planner, seed=seed, cem=replace(cfg.planner.cem, seed=seed))
    discrete = isinstance(environment, TMazeEnv)
    obs_width = 1 if discrete else 2
    belief_width = len(environment.as_pomdp().prior) if discrete else 2

    header = (['t', 'episode'] + _columns('y', obs_width) + _columns('mu', belief_width)
              + _columns('u', 1) + ['F', 'reward', 'goal'])
    result = SeedResult(header=header)
    if cfg.horizon == 0:
        result.metrics = {'steps': 0}
        return result

    planner = replace(planner, episode_length=min(planner.episode_length, cfg.horizon))
    traces = plan_act_loop(environment, planner, cfg.episodes)

    t = 0
    for trace in traces:
        for step in range(len(trace)):
            t += 1
            result.rows.append([
                t, trace.episode, *np.atleast_1d(trace.observations[step]), *np.atleast_1d(trace.beliefs[step]),
                *np.atleast_1d(trace.actions[step]), trace.efe[step], trace.rewards[step],
                int(trace.reached_goal and step == len(trace) - 1),
            ])

    goals = [trace.reached_goal for trace in traces]
    result.metrics = {
        'steps': t,
        'episodes': len(traces),
        'goal_rate': float(np.mean(goals)),
        'episodes_to_goal': float(goals.index(True) + 1) if any(goals) else -1.0,
    }
    if discrete:
        result.metrics['cue_first_rate'] = float(np.mean([_cue_first(trace.states) for trace in traces]))
    environment.log_summary({'seed': seed, **result.metrics})
    return result


def _cue_first(locations) -> bool:
    for location in locations:
        if location == CUE:
            return True
        if location in ARMS:
            return False
    return False


RUNNERS = {
    'estimate': run_estimate,
    'compare_kf': lambda cfg, seed: run_estimate(cfg, seed, with_kalman=True),
    'control': run_control,
    'compare_pid': run_compare_pid,
    'noise': run_noise,
    'plan': run_plan,
}


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    logger.info(f"Running {cfg.kind} with seed {seed}")
    return RUNNERS[cfg.kind](cfg, seed)
