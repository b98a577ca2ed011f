"""
Planning by expected free energy

Provides:
- Discrete POMDP beliefs: Bayes update and plan rollouts
- Expected free energy per step and per plan (extrinsic/intrinsic split)
- Softmax plan posterior and action selection
- Cross-entropy method (CEM) for continuous plans
- Count-based information gain for continuous observation boxes
- Filtered perception of continuous plants (rollout prediction, then run_filter)
- plan_act_loop: receding-horizon perceive/score/act episodes

Discrete environments expose as_pomdp(), reset(seed) and step(action);
continuous plants expose rollout(obs, actions), reward(obs), reset(seed),
step(u) and the observation box bounds.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from .base import (
    DimensionError,
    ImpossibleObservationError,
    PlanningBudgetError,
    PlanningError,
)
from .gencoords import GeneralizedVector
from .inference import EstimatorConfig, run_filter
from .model import LinearModel, NoiseSpec, boltzmann_preference


logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-9
PROB_FLOOR = 1e-300
MAX_PLANS = 1024
SELECTION_MODES = ('most_likely', 'sample')


@dataclass(frozen=True, eq=False)
class DiscretePOMDP:
    """
    Finite POMDP with a biased (preference) observation prior

    likelihood[y, x] = p(y | x); transitions[a, x', x] = p(x' | x, a);
    preferences[y] = log p~(y), unnormalized.
    """
    likelihood: np.ndarray
    transitions: np.ndarray
    preferences: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        likelihood = np.array(self.likelihood, dtype=float)
        transitions = np.array(self.transitions, dtype=float)
        preferences = np.array(self.preferences, dtype=float).reshape(-1)
        prior = np.array(self.prior, dtype=float).reshape(-1)

        if likelihood.ndim != 2:
            raise DimensionError(f"likelihood must be O x S, got shape {likelihood.shape}")
        num_obs, num_states = likelihood.shape
        if transitions.ndim == 2:
            transitions = transitions[None]
        if transitions.ndim != 3 or transitions.shape[1:] != (num_states, num_states):
            raise DimensionError(
                f"transitions must be U x {num_states} x {num_states}, got shape {transitions.shape}"
            )
        if preferences.size != num_obs:
            raise DimensionError(f"preferences have {preferences.size} entries for {num_obs} observations")
        if prior.size != num_states:
            raise DimensionError(f"prior has {prior.size} entries for {num_states} states")

        _check_stochastic(likelihood, 'likelihood')
        for a, matrix in enumerate(transitions):
            _check_stochastic(matrix, f'transitions[{a}]')
        _check_stochastic(prior[:, None], 'prior')

        for name, array in (('likelihood', likelihood), ('transitions', transitions),
                            ('preferences', preferences), ('prior', prior)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def num_states(self) -> int:
        return self.likelihood.shape[1]

    @property
    def num_obs(self) -> int:
        return self.likelihood.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[0]

    def with_preferences(self, preferences) -> 'DiscretePOMDP':
        return DiscretePOMDP(self.likelihood, self.transitions, preferences, self.prior)


def _check_stochastic(matrix: np.ndarray, name: str):
    if np.any(matrix < 0):
        raise ValueError(f"{name} has negative probabilities")
    sums = matrix.sum(axis=0)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=STOCHASTIC_TOL):
        raise ValueError(f"{name} columns must sum to 1, got {sums.tolist()}")


@dataclass(frozen=True)
class Plan:
    """A fixed sequence of action indices"""
    actions: Tuple[int, ...]

    def __post_init__(self):
        actions = tuple(int(a) for a in self.actions)
        if not actions:
            raise ValueError("a plan needs at least one action")
        if min(actions) < 0:
            raise ValueError(f"negative action index in plan {actions}")
        object.__setattr__(self, 'actions', actions)

    def __len__(self) -> int:
        return len(self.actions)

    def check(self, pomdp: DiscretePOMDP):
        if max(self.actions) >= pomdp.num_actions:
            raise DimensionError(f"plan {self.actions} uses actions beyond {pomdp.num_actions - 1}")


@dataclass(frozen=True)
class EFEBreakdown:
    """Total G with its extrinsic and intrinsic parts, per step and summed"""
    total: float
    extrinsic: float
    intrinsic: float
    per_step: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True, eq=False)
class PlanPosterior:
    plans: Tuple[Plan, ...]
    log_prior: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        if len(self.plans) != len(self.probabilities):
            raise DimensionError(f"{len(self.plans)} plans but {len(self.probabilities)} probabilities")
        if not np.isclose(np.sum(self.probabilities), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("plan probabilities must sum to 1")


@dataclass(frozen=True, eq=False)
class GaussianPlan:
    """Diagonal Gaussian over T x m action sequences"""
    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.array(self.mean, dtype=float))
        stddev = np.broadcast_to(np.array(self.stddev, dtype=float), mean.shape).copy()
        if np.any(stddev < 0):
            raise ValueError("stddev must be non-negative")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'stddev', stddev)


def bayes_update(pomdp: DiscretePOMDP, belief, obs_index: int) -> np.ndarray:
    """
    Exact posterior over states after one observation

    Raises:
        ImpossibleObservationError: If the observation has zero probability
    """
    if not 0 <= obs_index < pomdp.num_obs:
        raise DimensionError(f"observation {obs_index} out of range 0..{pomdp.num_obs - 1}")
    posterior = pomdp.likelihood[obs_index] * np.asarray(belief, dtype=float)
    total = posterior.sum()
    if total <= 0:
        raise ImpossibleObservationError(f"observation {obs_index} is impossible under the current belief")
    return posterior / total


def predict_rollout(pomdp: DiscretePOMDP, belief, plan: Plan) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Per-step (state belief, observation belief) under a plan"""
    plan.check(pomdp)
    state = np.asarray(belief, dtype=float)
    rollout = []
    for action in plan.actions:
        state = pomdp.transitions[action] @ state
        rollout.append((state, pomdp.likelihood @ state))
    return rollout


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    return float(np.sum(p[support] * (np.log(np.maximum(p[support], PROB_FLOOR))
                                      - np.log(np.maximum(q[support], PROB_FLOOR)))))


def efe_timestep(pomdp: DiscretePOMDP, state_belief, obs_belief) -> Tuple[float, float]:
    """
    Extrinsic and intrinsic value of one predicted step

    extrinsic = -sum_y q(y) log p~(y)
    intrinsic = sum_y q(y) KL[q(x|y) || q(x)]
    """
    state_belief = np.asarray(state_belief, dtype=float)
    obs_belief = np.asarray(obs_belief, dtype=float)

    extrinsic = -float(obs_belief @ pomdp.preferences)
    intrinsic = 0.0
    for y in np.flatnonzero(obs_belief > 0):
        posterior = pomdp.likelihood[y] * state_belief
        total = posterior.sum()
        if total <= 0:
            continue
        intrinsic += obs_belief[y] * _kl(posterior / total, state_belief)
    return extrinsic, intrinsic


def efe_plan(pomdp: DiscretePOMDP, belief, plan: Plan, extrinsic_weight: float = 1.0,
             intrinsic_weight: float = 1.0) -> EFEBreakdown:
    """
    Expected free energy of a plan as the sum of per-step values

    The weights scale the two components (ablations); per-step entries are
    reported already weighted so total = sum(extrinsic_t - intrinsic_t).
    """
    per_step = []
    for state_belief, obs_belief in predict_rollout(pomdp, belief, plan):
        extrinsic, intrinsic = efe_timestep(pomdp, state_belief, obs_belief)
        per_step.append((extrinsic_weight * extrinsic, intrinsic_weight * intrinsic))

    extrinsic = sum(e for e, _ in per_step)
    intrinsic = sum(i for _, i in per_step)
    return EFEBreakdown(
        total=sum(e - i for e, i in per_step),
        extrinsic=extrinsic,
        intrinsic=intrinsic,
        per_step=tuple(per_step),
    )


def plan_posterior(efes: Sequence[float], log_prior=None, plans: Optional[Sequence[Plan]] = None) -> PlanPosterior:
    """
    q(pi) = softmax(log p(pi) - G(pi))

    Args:
        efes: Total G per plan
        log_prior: Log prior per plan (uniform when omitted)
        plans: The plans, for bookkeeping (indices stand in when omitted)
    """
    efes = np.asarray(efes, dtype=float)
    log_prior = np.zeros_like(efes) if log_prior is None else np.asarray(log_prior, dtype=float)
    if log_prior.shape != efes.shape:
        raise DimensionError(f"log_prior has shape {log_prior.shape}, efes {efes.shape}")
    if not (np.all(np.isfinite(efes)) and np.all(np.isfinite(log_prior))):
        raise PlanningError("plan posterior needs finite EFE and prior values")

    if plans is None:
        plans = [Plan((i,)) for i in range(efes.size)]
    return PlanPosterior(tuple(plans), log_prior, softmax(log_prior - efes))


def enumerate_plans(num_actions: int, horizon: int, budget: int = MAX_PLANS) -> List[Plan]:
    """
    Every action sequence of the given length, in lexicographic order

    Raises:
        PlanningBudgetError: If num_actions ** horizon exceeds the budget
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    count = num_actions ** horizon
    if count > budget:
        raise PlanningBudgetError(
            f"{num_actions}^{horizon} = {count} plans exceeds the budget of {budget}; use CEM"
        )
    return [Plan(actions) for actions in itertools.product(range(num_actions), repeat=horizon)]


def select_action(posterior: PlanPosterior, mode: str = 'most_likely', rng: Optional[np.random.Generator] = None,
                  seed: Optional[int] = None) -> int:
    """
    First action of the most likely plan (ties to the lowest index) or of a sampled plan

    Args:
        posterior: Plan posterior
        mode: 'most_likely' or 'sample'
        rng: Generator used in sample mode
        seed: Seed for a fresh generator when rng is not given
    """
    if mode == 'most_likely':
        index = int(np.argmax(posterior.probabilities))
    elif mode == 'sample':
        rng = rng if rng is not None else np.random.default_rng(seed)
        index = int(rng.choice(len(posterior.plans), p=posterior.probabilities))
    else:
        raise ValueError(f"mode must be one of {SELECTION_MODES}, got {mode!r}")
    return posterior.plans[index].actions[0]


def _check_integers(config, names):
    for name in names:
        value = getattr(config, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ValueError(f"{name} must be an integer, got {value!r}")


@dataclass(frozen=True)
class CemConfig:
    """Cross-entropy method settings"""
    population: int = 64
    elite_frac: float = 0.1
    iters: int = 5
    init_mean: float = 0.0
    init_std: float = 1.0
    seed: int = 0
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        _check_integers(self, ('population', 'iters', 'seed'))
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        if not 0 < self.elite_frac <= 1:
            raise ValueError(f"elite_frac must be in (0, 1], got {self.elite_frac}")
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")
        if self.init_std < 0:
            raise ValueError(f"init_std must be >= 0, got {self.init_std}")

    @property
    def num_elites(self) -> int:
        return max(1, int(round(self.elite_frac * self.population)))


def cem_optimize(score: Callable, horizon: int, dims: int, cfg: CemConfig = CemConfig(),
                 batched: bool = False) -> GaussianPlan:
    """
    Minimize a plan score with the cross-entropy method

    Each iteration draws the whole population from one generator before any
    scoring, then refits mean and stddev to the lowest-scoring elites.

    Args:
        score: Plan (T x m array) -> real; or, with batched=True,
            (P x T x m) -> P reals
        horizon: Plan length T
        dims: Action dimension m
        cfg: CEM settings
        batched: Whether score takes the whole population at once

    Returns:
        Final GaussianPlan

    Raises:
        PlanningError: If any score is non-finite
    """
    rng = np.random.default_rng(cfg.seed)
    mean = np.full((horizon, dims), cfg.init_mean, dtype=float)
    std = np.full((horizon, dims), cfg.init_std, dtype=float)

    for iteration in range(cfg.iters):
        noise = rng.standard_normal((cfg.population, horizon, dims))
        samples = mean + std * noise
        if cfg.lower is not None or cfg.upper is not None:
            samples = np.clip(samples, cfg.lower, cfg.upper)

        if batched:
            scores = np.asarray(score(samples), dtype=float).reshape(-1)
        else:
            scores = np.array([float(score(sample)) for sample in samples])
        if not np.all(np.isfinite(scores)):
            raise PlanningError(f"non-finite plan score at CEM iteration {iteration}")

        elites = samples[np.argsort(scores, kind='stable')[:cfg.num_elites]]
        mean = elites.mean(axis=0)
        std = elites.std(axis=0)
        logger.debug(f"CEM iteration {iteration}: best score {scores.min():.4f}")

    return GaussianPlan(mean, std)


class CellInformationGain:
    """
    Count-based information gain over a gridded observation box

    Each cell holds an unknown quantity with unit prior variance, observed
    with unit noise on every visit. After n visits one more visit is worth
    1/2 ln((n + 2) / (n + 1)) nats. Visits accumulate across episodes;
    imagined repeat visits within one rollout also count.
    """

    def __init__(self, low, high, bins: Sequence[int]):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.bins = tuple(int(b) for b in bins)
        if not (self.low.size == self.high.size == len(self.bins)):
            raise DimensionError("low, high and bins must have one entry per observation channel")
        self.counts = np.zeros(self.bins)

    def cells(self, observations) -> np.ndarray:
        observations = np.asarray(observations, dtype=float)
        scaled = (observations - self.low) / (self.high - self.low)
        index = np.clip(np.floor(scaled * self.bins).astype(int), 0, np.array(self.bins) - 1)
        return np.ravel_multi_index(tuple(np.moveaxis(index, -1, 0)), self.bins)

    def update(self, observation):
        self.counts.flat[self.cells(observation)] += 1

    def expected_gain(self, trajectories) -> np.ndarray:
        """Total gain of each rollout, trajectories shaped (P, H, d)"""
        cells = self.cells(trajectories)
        visits = self.counts.flat[cells]
        for t in range(1, cells.shape[1]):
            visits[:, t] += np.sum(cells[:, :t] == cells[:, t:t + 1], axis=1)
        return 0.5 * np.log((visits + 2.0) / (visits + 1.0)).sum(axis=1)

    @property
    def visited_cells(self) -> int:
        return int(np.count_nonzero(self.counts))


@dataclass(frozen=True)
class PlannerConfig:
    """Settings of the plan/act loop"""
    horizon: int = 2
    selection: str = 'most_likely'
    extrinsic_weight: float = 1.0
    intrinsic_weight: float = 1.0
    max_plans: int = MAX_PLANS
    episode_length: int = 200
    seed: int = 0
    action_repeat: int = 1
    beta: float = 1.0
    bins: Tuple[int, ...] = (12, 10)
    stop_on_goal: bool = False
    cem: CemConfig = CemConfig()
    perception: EstimatorConfig = EstimatorConfig(kappa_x=1.0, dt=0.1, steps_per_observation=20)

    def __post_init__(self):
        _check_integers(self, ('horizon', 'max_plans', 'episode_length', 'seed', 'action_repeat'))
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"selection must be one of {SELECTION_MODES}, got {self.selection!r}")
        if self.extrinsic_weight < 0 or self.intrinsic_weight < 0:
            raise ValueError("EFE weights must be >= 0")
        if self.episode_length < 1:
            raise ValueError(f"episode_length must be >= 1, got {self.episode_length}")
        if self.action_repeat < 1:
            raise ValueError(f"action_repeat must be >= 1, got {self.action_repeat}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass
class EpisodeTrace:
    """Per-step record of one planning episode"""
    episode: int
    observations: List = field(default_factory=list)
    beliefs: List[np.ndarray] = field(default_factory=list)
    actions: List = field(default_factory=list)
    efe: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    states: List = field(default_factory=list)
    posteriors: List[np.ndarray] = field(default_factory=list)
    reached_goal: bool = False

    def __len__(self) -> int:
        return len(self.actions)


def _derived_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _run_discrete_episode(env, pomdp: DiscretePOMDP, plans: List[Plan], cfg: PlannerConfig,
                          episode: int, rng: np.random.Generator) -> EpisodeTrace:
    trace = EpisodeTrace(episode=episode)
    obs = env.reset(seed=_derived_seed(cfg.seed, episode))
    belief = bayes_update(pomdp, pomdp.prior, obs)

    for step in range(cfg.episode_length):
        totals = [efe_plan(pomdp, belief, plan, cfg.extrinsic_weight, cfg.intrinsic_weight).total
                  for plan in plans]
        posterior = plan_posterior(totals, plans=plans)
        action = select_action(posterior, cfg.selection, rng=rng)

        predicted = pomdp.transitions[action] @ belief
        obs = env.step(action)
        belief = bayes_update(pomdp, predicted, obs)

        trace.observations.append(obs)
        trace.beliefs.append(belief)
        trace.actions.append(action)
        trace.efe.append(float(np.min(totals)))
        trace.rewards.append(float(env.reward))
        trace.states.append(env.state)
        trace.posteriors.append(posterior.probabilities)
        if env.done:
            break

    trace.reached_goal = env.reached_goal
    return trace


class ContinuousEfeScorer:
    """
    Batched G for action sequences on a plant with a known rollout model

    G = -w_e * sum_t beta * reward(y_t) - w_i * information gain

    Rollouts start from `start` (the current belief mean), or from the
    plant's observation when no belief has been set.
    """

    def __init__(self, plant, novelty: CellInformationGain, cfg: PlannerConfig):
        self.plant = plant
        self.novelty = novelty
        self.cfg = cfg
        self.preference = boltzmann_preference(plant.reward, cfg.beta)
        self.start = None

    def __call__(self, samples: np.ndarray) -> np.ndarray:
        actions = np.repeat(samples, self.cfg.action_repeat, axis=1)
        start = self.plant.observe() if self.start is None else self.start
        predicted = self.plant.rollout(start, actions)
        extrinsic = -np.sum(self.preference(predicted), axis=1)
        score = self.cfg.extrinsic_weight * extrinsic
        if self.cfg.intrinsic_weight > 0:
            score = score - self.cfg.intrinsic_weight * self.novelty.expected_gain(predicted)
        return score


class RolloutPerception:
    """
    Beliefs over a continuous plant's observed state

    Each sample is filtered from the rollout model's prediction under the
    last action: the prediction seeds the belief mean and run_filter
    descends F toward the observation with cfg.steps_per_observation Euler
    steps.
    """

    def __init__(self, plant, cfg: EstimatorConfig, obs_variance: float = 1.0):
        dim = len(plant.observation_bounds[0])
        self.plant = plant
        self.cfg = cfg
        self.dim = dim
        self.model = LinearModel(
            np.zeros((dim, dim)), None, np.eye(dim),
            NoiseSpec.isotropic(1.0, dim), NoiseSpec.isotropic(obs_variance, dim),
        )
        self.mean = None

    def reset(self, observation) -> np.ndarray:
        self.mean = self._filter(np.asarray(observation, dtype=float), observation)
        return self.mean

    def update(self, action, observation) -> np.ndarray:
        actions = np.asarray(action, dtype=float).reshape(1, 1, -1)
        predicted = self.plant.rollout(self.mean, actions)[0, 0]
        self.mean = self._filter(predicted, observation)
        return self.mean

    def _filter(self, prior_mean: np.ndarray, observation) -> np.ndarray:
        initial = GeneralizedVector(0, self.dim, prior_mean)
        (beliefs,) = run_filter(self.model, np.reshape(observation, (1, self.dim)), cfg=self.cfg,
                                initial_mean=initial)
        return beliefs.mean.data.copy()


def _run_continuous_episode(plant, novelty: CellInformationGain, cfg: PlannerConfig,
                            episode: int) -> EpisodeTrace:
    trace = EpisodeTrace(episode=episode)
    scorer = ContinuousEfeScorer(plant, novelty, cfg)
    perception = RolloutPerception(plant, cfg.perception)
    obs = plant.reset(seed=_derived_seed(cfg.seed, episode))
    belief = perception.reset(obs)
    novelty.update(belief)

    action, G = None, 0.0
    for step in range(cfg.episode_length):
        if step % cfg.action_repeat == 0:
            scorer.start = belief
            cem_cfg = replace(cfg.cem, seed=_derived_seed(cfg.cem.seed, cfg.seed, episode, step))
            plan = cem_optimize(scorer, cfg.horizon, plant.input_dim, cem_cfg, batched=True)
            action = plan.mean[0]
            G = float(scorer(plan.mean[None])[0])

        obs = plant.step(action)
        belief = perception.update(action, obs)
        novelty.update(belief)

        trace.observations.append(obs)
        trace.beliefs.append(belief)
        trace.actions.append(action)
        trace.efe.append(G)
        trace.rewards.append(float(plant.reward(obs)))
        trace.states.append(plant.state)
        if plant.done:
            break

    trace.reached_goal = plant.reached_goal
    return trace


def plan_act_loop(environment, planner_cfg: PlannerConfig, episodes: int) -> List[EpisodeTrace]:
    """
    Receding-horizon active inference episodes

    Discrete environments (with as_pomdp) score every enumerated plan and
    update beliefs by Bayes' rule; continuous plants filter each sample
    with RolloutPerception and score CEM samples from the filtered mean
    against their rollout model, with a count-based intrinsic term that
    persists across episodes.

    Args:
        environment: TMaze-like discrete environment or continuous plant
        planner_cfg: Planner settings
        episodes: Number of episodes

    Returns:
        One EpisodeTrace per episode run
    """
    traces = []
    if hasattr(environment, 'as_pomdp'):
        pomdp = environment.as_pomdp()
        plans = enumerate_plans(pomdp.num_actions, planner_cfg.horizon, planner_cfg.max_plans)
        rng = np.random.default_rng(planner_cfg.seed)
        run_episode = lambda e: _run_discrete_episode(environment, pomdp, plans, planner_cfg, e, rng)
    else:
        low, high = environment.observation_bounds
        novelty = CellInformationGain(low, high, planner_cfg.bins)
        run_episode = lambda e: _run_continuous_episode(environment, novelty, planner_cfg, e)

    for episode in range(episodes):
        trace = run_episode(episode)
        traces.append(trace)
        logger.info(f"Episode {episode}: {len(trace)} steps, goal reached: {trace.reached_goal}")
        if trace.reached_goal and planner_cfg.stop_on_goal:
            break
    return traces
