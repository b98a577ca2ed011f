"""
Brute-force plan posterior

Enumerates every plan and every hidden-state path, accumulates per-step
state marginals from the path probabilities, and evaluates

    G_t = sum_{x,y} q(x) p(y|x) [ln q(y) - ln p(y|x) - ln p~(y)]

directly from the joint, then normalizes exp(ln p(pi) - G) over plans.
Plain Python loops throughout.
"""

import itertools
import math
from typing import Optional, Sequence

import numpy as np

from agent.base import PlanningBudgetError
from agent.planning import DiscretePOMDP, Plan, PlanPosterior


ORACLE_BUDGET = 4096


def _path_marginals(pomdp: DiscretePOMDP, belief: Sequence[float], actions: Sequence[int]):
    S = pomdp.num_states
    T = len(actions)
    marginals = [[0.0] * S for _ in range(T)]
    for start in range(S):
        if belief[start] == 0.0:
            continue
        for path in itertools.product(range(S), repeat=T):
            probability = belief[start]
            previous = start
            for t, state in enumerate(path):
                probability *= pomdp.transitions[actions[t]][state][previous]
                if probability == 0.0:
                    break
                previous = state
            if probability == 0.0:
                continue
            for t, state in enumerate(path):
                marginals[t][state] += probability
    return marginals


def _path_efe(pomdp: DiscretePOMDP, belief: Sequence[float], actions: Sequence[int]) -> float:
    total = 0.0
    for marginal in _path_marginals(pomdp, belief, actions):
        obs_marginal = [
            sum(pomdp.likelihood[y][x] * marginal[x] for x in range(pomdp.num_states))
            for y in range(pomdp.num_obs)
        ]
        for x in range(pomdp.num_states):
            for y in range(pomdp.num_obs):
                joint = marginal[x] * pomdp.likelihood[y][x]
                if joint <= 0.0:
                    continue
                total += joint * (math.log(obs_marginal[y]) - math.log(pomdp.likelihood[y][x])
                                  - pomdp.preferences[y])
    return total


def brute_force_plan_posterior(pomdp: DiscretePOMDP, belief, T: int, log_prior=None,
                               budget: int = ORACLE_BUDGET) -> PlanPosterior:
    """
    Plan posterior by exhaustive enumeration

    Args:
        pomdp: Discrete POMDP
        belief: Current state belief
        T: Plan length
        log_prior: Per-plan log prior (uniform when omitted)
        budget: Maximum number of plans

    Returns:
        PlanPosterior over plans in lexicographic order

    Raises:
        PlanningBudgetError: If U^T exceeds the budget
    """
    count = pomdp.num_actions ** T
    if count > budget:
        raise PlanningBudgetError(f"{pomdp.num_actions}^{T} = {count} plans exceeds the oracle budget of {budget}")

    belief = [float(b) for b in belief]
    plans = [Plan(actions) for actions in itertools.product(range(pomdp.num_actions), repeat=T)]
    log_prior = [0.0] * count if log_prior is None else [float(v) for v in log_prior]

    scores = [log_prior[i] - _path_efe(pomdp, belief, plan.actions) for i, plan in enumerate(plans)]
    top = max(scores)
    weights = [math.exp(s - top) for s in scores]
    norm = math.fsum(weights)
    return PlanPosterior(tuple(plans), np.array(log_prior), np.array([w / norm for w in weights]))
