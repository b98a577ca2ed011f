"""
Experiment configuration

Parses and validates the JSON experiment configs documented in
docs/CONFIG.md. Validation collects every problem it finds, each message
prefixed with the field path (e.g. "plant.C"), instead of stopping at the
first one.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from agent.control import ControllerConfig
from agent.gencoords import MAX_ORDER
from agent.inference import EstimatorConfig
from agent.planning import CemConfig, PlannerConfig


EXPERIMENT_KINDS = ('estimate', 'control', 'plan', 'noise', 'compare_kf', 'compare_pid')
PLANT_TYPES = {
    'estimate': ('lti', 'integrator'),
    'compare_kf': ('lti', 'integrator'),
    'control': ('lti', 'integrator'),
    'compare_pid': ('lti', 'integrator'),
    'plan': ('tmaze', 'mountain_car'),
}
MODEL_TYPES = ('linear', 'attractor')
DEFAULT_SMOOTHNESS = 1.0


class ConfigError(Exception):
    """Raised when a config file fails validation; carries every error found"""

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment

    plant, model and noise hold normalized JSON-ready specs (matrices as
    nested lists); the runtime configs are the toolkit's own dataclasses.
    """
    kind: str
    horizon: int
    seeds: Tuple[int, ...]
    order: int = 0
    episodes: int = 1
    plant: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    noise: Dict[str, Any] = field(default_factory=dict)
    estimator: EstimatorConfig = EstimatorConfig()
    controller: ControllerConfig = ControllerConfig()
    planner: PlannerConfig = PlannerConfig()
    output_dir: Optional[str] = None

    def with_seeds(self, seeds) -> 'ExperimentConfig':
        values = asdict_shallow(self)
        values['seeds'] = tuple(int(s) for s in seeds)
        return ExperimentConfig(**values)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready echo of the normalized config"""
        controller = asdict(self.controller)
        controller['jacobian_strategy'] = self.controller.jacobian_strategy.value
        planner = asdict(self.planner)
        planner['bins'] = list(self.planner.bins)
        return {
            'experiment': self.kind,
            'horizon': self.horizon,
            'seeds': list(self.seeds),
            'order': self.order,
            'episodes': self.episodes,
            'plant': self.plant,
            'model': self.model,
            'noise': self.noise,
            'estimator': asdict(self.estimator),
            'controller': controller,
            'planner': planner,
            'output_dir': self.output_dir,
        }


def asdict_shallow(config: ExperimentConfig) -> Dict[str, Any]:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}


def _number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _int_field(raw: dict, key: str, errors: List[str], default=None, minimum=None,
               maximum=None, prefix: str = '') -> Optional[int]:
    path = f"{prefix}{key}"
    if key not in raw:
        if default is None:
            errors.append(f"{path}: required")
        return default
    value = raw[key]
    if not isinstance(value, int) or isinstance(value, bool):
        errors.append(f"{path}: must be an integer, got {value!r}")
        return default
    if minimum is not None and value < minimum:
        errors.append(f"{path}: must be >= {minimum}, got {value}")
        return default
    if maximum is not None and value > maximum:
        errors.append(f"{path}: must be <= {maximum}, got {value}")
        return default
    return value


def _float_field(raw: dict, key: str, errors: List[str], default=None, positive: bool = False,
                 prefix: str = '') -> Optional[float]:
    path = f"{prefix}{key}"
    if key not in raw:
        if default is None:
            errors.append(f"{path}: required")
        return default
    value = raw[key]
    if not _number(value):
        errors.append(f"{path}: must be a finite number, got {value!r}")
        return default
    if positive and value <= 0:
        errors.append(f"{path}: must be > 0, got {value}")
        return default
    return float(value)


def _matrix(raw: dict, key: str, errors: List[str], prefix: str, required: bool = True) -> Optional[np.ndarray]:
    path = f"{prefix}{key}"
    if key not in raw:
        if required:
            errors.append(f"{path}: required")
        return None
    value = raw[key]
    if _number(value):
        return np.array([[float(value)]])
    if (not isinstance(value, list) or not value
            or not all(isinstance(row, list) and row and all(_number(v) for v in row) for row in value)
            or len({len(row) for row in value}) != 1):
        errors.append(f"{path}: must be a rectangular numeric matrix")
        return None
    return np.array(value, dtype=float)


def _vector(raw: dict, key: str, errors: List[str], prefix: str, size: Optional[int] = None,
            default=None) -> Optional[np.ndarray]:
    path = f"{prefix}{key}"
    if key not in raw:
        return None if default is None else np.asarray(default, dtype=float)
    value = raw[key]
    if _number(value):
        value = [value]
    if not isinstance(value, list) or not all(_number(v) for v in value):
        errors.append(f"{path}: must be a list of numbers")
        return None
    vector = np.array(value, dtype=float)
    if size is not None and vector.size != size:
        errors.append(f"{path}: has {vector.size} entries, expected {size}")
        return None
    return vector


def _noise(raw: Any, path: str, dim: Optional[int], errors: List[str]) -> Optional[Dict[str, Any]]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.append(f"{path}: must be an object with covariance and sigma")
        return None
    count = len(errors)
    covariance = _matrix(raw, 'covariance', errors, f"{path}.")
    sigma = _float_field(raw, 'sigma', errors, default=0.0, prefix=f"{path}.")
    if sigma is not None and sigma < 0:
        errors.append(f"{path}.sigma: must be >= 0, got {sigma}")
    if covariance is not None:
        if covariance.shape[0] != covariance.shape[1]:
            errors.append(f"{path}.covariance: must be square, got {covariance.shape[0]}x{covariance.shape[1]}")
        elif dim is not None and covariance.shape[0] != dim:
            errors.append(f"{path}.covariance: is {covariance.shape[0]}x{covariance.shape[0]}, expected {dim}x{dim}")
        elif (not np.allclose(covariance, covariance.T)
              or np.linalg.eigvalsh(0.5 * (covariance + covariance.T))[0] <= 0):
            errors.append(f"{path}.covariance: must be symmetric positive definite")
    if len(errors) > count:
        return None
    return {'covariance': covariance.tolist(), 'sigma': sigma}


def _check_dims(A, B, C, prefix: str, errors: List[str]) -> bool:
    ok = True
    if A is not None and A.shape[0] != A.shape[1]:
        errors.append(f"{prefix}A: must be square, got {A.shape[0]}x{A.shape[1]}")
        ok = False
    if A is not None and B is not None and B.shape[0] != A.shape[0]:
        errors.append(f"{prefix}B: is {B.shape[0]}x{B.shape[1]} but {prefix}A is {A.shape[0]}x{A.shape[1]}")
        ok = False
    if A is not None and C is not None and C.shape[1] != A.shape[0]:
        errors.append(f"{prefix}C: is {C.shape[0]}x{C.shape[1]} but {prefix}A is {A.shape[0]}x{A.shape[1]}")
        ok = False
    return ok and A is not None and B is not None and C is not None


def _lti_plant(raw: dict, kind_of_plant: str, errors: List[str]) -> Optional[Dict[str, Any]]:
    prefix = 'plant.'
    dt = _float_field(raw, 'dt', errors, default=0.01, positive=True, prefix=prefix)
    if kind_of_plant == 'integrator':
        dofs = _int_field(raw, 'dofs', errors, default=1, minimum=1, prefix=prefix)
        A, B, C = np.zeros((dofs, dofs)), np.eye(dofs), np.eye(dofs)
    else:
        A = _matrix(raw, 'A', errors, prefix)
        B = _matrix(raw, 'B', errors, prefix)
        C = _matrix(raw, 'C', errors, prefix)
    if not _check_dims(A, B, C, prefix, errors):
        return None

    n, m, q = A.shape[0], B.shape[1], C.shape[0]
    x0 = _vector(raw, 'x0', errors, prefix, size=n, default=np.zeros(n))
    u = _vector(raw, 'input', errors, prefix, size=m, default=np.zeros(m))
    process_noise = _noise(raw.get('process_noise'), 'plant.process_noise', n, errors)
    obs_noise = _noise(raw.get('obs_noise'), 'plant.obs_noise', q, errors)
    if x0 is None or u is None or dt is None:
        return None
    return {
        'type': kind_of_plant, 'A': A.tolist(), 'B': B.tolist(), 'C': C.tolist(),
        'x0': x0.tolist(), 'input': u.tolist(), 'dt': dt,
        'process_noise': process_noise, 'obs_noise': obs_noise,
    }


def _planning_plant(raw: dict, kind_of_plant: str, errors: List[str]) -> Optional[Dict[str, Any]]:
    prefix = 'plant.'
    if kind_of_plant == 'tmaze':
        spec = {
            'type': 'tmaze',
            'reward_probability': _float_field(raw, 'reward_probability', errors, default=0.9, prefix=prefix),
            'cue_validity': _float_field(raw, 'cue_validity', errors, default=1.0, prefix=prefix),
            'preference': _float_field(raw, 'preference', errors, default=3.0, prefix=prefix),
        }
        for key in ('reward_probability', 'cue_validity'):
            if spec[key] is not None and not 0.0 <= spec[key] <= 1.0:
                errors.append(f"plant.{key}: must be in [0, 1], got {spec[key]}")
        p, c = spec['reward_probability'], spec['cue_validity']
        in_range = all(value is not None and 0.0 <= value <= 1.0 for value in (p, c))
        if in_range and not abs(c - 0.5) > abs(p - 0.5):
            errors.append(
                f"plant.reward_probability: an arm must be less informative than the cue, "
                f"need |reward_probability - 0.5| < |cue_validity - 0.5|, got {p} and {c}"
            )
        return spec

    sparse = raw.get('sparse_reward', True)
    if not isinstance(sparse, bool):
        errors.append(f"plant.sparse_reward: must be true or false, got {sparse!r}")
    return {
        'type': 'mountain_car',
        'force_limit': _float_field(raw, 'force_limit', errors, default=1.0, positive=True, prefix=prefix),
        'goal_position': _float_field(raw, 'goal_position', errors, default=0.45, prefix=prefix),
        'sparse_reward': bool(sparse),
        'max_steps': _int_field(raw, 'max_steps', errors, default=200, minimum=1, prefix=prefix),
    }


def _plant(raw: Any, kind: Optional[str], errors: List[str]) -> Optional[Dict[str, Any]]:
    if kind not in PLANT_TYPES:
        return None
    if not isinstance(raw, dict):
        errors.append("plant: required object")
        return None
    kind_of_plant = raw.get('type', PLANT_TYPES[kind][0])
    if kind_of_plant not in PLANT_TYPES[kind]:
        errors.append(f"plant.type: must be one of {list(PLANT_TYPES[kind])} for {kind}, got {kind_of_plant!r}")
        return None
    if kind == 'plan':
        return _planning_plant(raw, kind_of_plant, errors)
    return _lti_plant(raw, kind_of_plant, errors)


def _default_noise(plant_noise: Optional[dict], dim: int, scale: float = 1.0) -> Dict[str, Any]:
    if plant_noise is None:
        return {'covariance': np.eye(dim).tolist(), 'sigma': DEFAULT_SMOOTHNESS}
    sigma = plant_noise['sigma'] if plant_noise['sigma'] > 0 else DEFAULT_SMOOTHNESS
    return {'covariance': (np.asarray(plant_noise['covariance']) * scale).tolist(), 'sigma': sigma}


def _model_noise(raw: dict, key: str, dim: int, fallback: Dict[str, Any], errors: List[str]) -> Optional[Dict[str, Any]]:
    if key not in raw:
        return fallback
    spec = _noise(raw[key], f"model.{key}", dim, errors)
    if spec is not None and spec['sigma'] <= 0:
        errors.append(f"model.{key}.sigma: must be > 0 for a generative model, got {spec['sigma']}")
        return None
    return spec


def _model(raw: Any, kind: Optional[str], plant: Optional[dict], errors: List[str]) -> Optional[Dict[str, Any]]:
    if kind not in ('estimate', 'compare_kf', 'control', 'compare_pid') or plant is None:
        return {}
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        errors.append("model: must be an object")
        return None

    default_type = 'linear' if kind in ('estimate', 'compare_kf') else 'attractor'
    model_type = raw.get('type', default_type)
    if model_type not in MODEL_TYPES:
        errors.append(f"model.type: must be one of {list(MODEL_TYPES)}, got {model_type!r}")
        return None
    if kind in ('control', 'compare_pid') and model_type != 'attractor':
        errors.append(f"model.type: {kind} needs an attractor model, got {model_type!r}")
        return None

    plant_A = np.asarray(plant['A'])
    plant_C = np.asarray(plant['C'])
    q = plant_C.shape[0]
    count = len(errors)

    if model_type == 'linear':
        A = _matrix(raw, 'A', errors, 'model.', required=False)
        B = _matrix(raw, 'B', errors, 'model.', required=False)
        C = _matrix(raw, 'C', errors, 'model.', required=False)
        A = plant_A if A is None else A
        B = np.asarray(plant['B']) if B is None else B
        C = plant_C if C is None else C
        if not _check_dims(A, B, C, 'model.', errors):
            return None
        if A.shape[0] != plant_A.shape[0]:
            errors.append(
                f"model.A: is {A.shape[0]}x{A.shape[1]} but plant.A is {plant_A.shape[0]}x{plant_A.shape[1]}"
            )
        if C.shape[0] != q:
            errors.append(f"model.C: is {C.shape[0]}x{C.shape[1]} but plant.C is {q}x{plant_C.shape[1]}")
        n = A.shape[0]
        spec = {'type': 'linear', 'A': A.tolist(), 'B': B.tolist(), 'C': C.tolist()}
    else:
        target = _vector(raw, 'target', errors, 'model.')
        if target is None:
            if 'target' not in raw:
                errors.append("model.target: required")
            return None
        if target.size == 0:
            errors.append("model.target: must not be empty")
            return None
        tau = _float_field(raw, 'tau', errors, default=1.0, positive=True, prefix='model.')
        n = target.size
        C = _matrix(raw, 'C', errors, 'model.', required=False)
        C = np.eye(n) if C is None else C
        if C.shape[1] != n:
            errors.append(f"model.C: is {C.shape[0]}x{C.shape[1]} but model.target has {n} entries")
        elif C.shape[0] != q:
            errors.append(f"model.C: is {C.shape[0]}x{C.shape[1]} but plant.C is {q}x{plant_C.shape[1]}")
        spec = {'type': 'attractor', 'target': target.tolist(), 'tau': tau, 'C': C.tolist()}

    dt = plant['dt']
    spec['process_noise'] = _model_noise(
        raw, 'process_noise', n,
        _default_noise(plant['process_noise'], n, 1.0 / dt ** 2) if model_type == 'linear'
        else _default_noise(None, n), errors)
    spec['obs_noise'] = _model_noise(raw, 'obs_noise', q, _default_noise(plant['obs_noise'], q), errors)
    return None if len(errors) > count else spec


def _runtime(cls, raw: Any, path: str, errors: List[str], **overrides):
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        errors.append(f"{path}: must be an object")
        return cls()
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    for key in unknown:
        errors.append(f"{path}.{key}: unknown field")
    values = {k: v for k, v in raw.items() if k in known}
    values.update(overrides)
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        errors.append(f"{path}: {e}")
        return cls()


def _planner(raw: Any, errors: List[str]) -> PlannerConfig:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        errors.append("planner: must be an object")
        return PlannerConfig()
    overrides = {}
    if 'cem' in raw:
        overrides['cem'] = _runtime(CemConfig, raw['cem'], 'planner.cem', errors)
    if 'perception' in raw:
        overrides['perception'] = _runtime(EstimatorConfig, raw['perception'], 'planner.perception', errors)
    if 'bins' in raw:
        bins = raw['bins']
        if not isinstance(bins, list) or not all(isinstance(b, int) and b > 0 for b in bins):
            errors.append("planner.bins: must be a list of positive integers")
        else:
            overrides['bins'] = tuple(bins)
    rest = {k: v for k, v in raw.items() if k not in ('cem', 'bins', 'perception')}
    return _runtime(PlannerConfig, rest, 'planner', errors, **overrides)


def _seeds(raw: dict, errors: List[str]) -> Tuple[int, ...]:
    if 'seeds' in raw:
        seeds = raw['seeds']
    elif 'seed' in raw:
        seeds = [raw['seed']]
    else:
        return ()
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        errors.append("seeds: must be a non-empty list of non-negative integers")
        return ()
    if len(set(seeds)) != len(seeds):
        errors.append("seeds: must not repeat")
    return tuple(seeds)


def _is_stochastic(kind: str, plant: Optional[dict]) -> bool:
    if kind in ('plan', 'noise'):
        return True
    if plant is None:
        return False
    return plant.get('process_noise') is not None or plant.get('obs_noise') is not None


def _noise_experiment(raw: Any, horizon: Optional[int], errors: List[str]) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        errors.append("noise: required object with covariance, sigma and dt")
        return {}
    spec = _noise(raw, 'noise', None, errors)
    dt = _float_field(raw, 'dt', errors, default=0.1, positive=True, prefix='noise.')
    if spec is None or dt is None:
        return {}
    support = 2 * int(np.ceil(4.0 * spec['sigma'] / dt)) + 1 if spec['sigma'] > 0 else 1
    if horizon and horizon <= max(support, len(spec['covariance'])):
        errors.append(f"horizon: noise runs need more than {max(support, len(spec['covariance']))} samples, got {horizon}")
    spec['dt'] = dt
    return spec


def validate_config(raw: Any) -> Tuple[Optional[ExperimentConfig], List[str]]:
    """
    Validate a raw experiment config

    Args:
        raw: Parsed JSON

    Returns:
        (ExperimentConfig, []) when valid, otherwise (None, every error found)
    """
    errors: List[str] = []
    if not isinstance(raw, dict):
        return None, ["config: must be a JSON object"]

    kind = raw.get('experiment')
    if isinstance(kind, str):
        kind = kind.replace('-', '_')
    if kind not in EXPERIMENT_KINDS:
        errors.append(f"experiment: must be one of {list(EXPERIMENT_KINDS)}, got {raw.get('experiment')!r}")
        kind = None

    horizon = _int_field(raw, 'horizon', errors, minimum=0)
    order = _int_field(raw, 'order', errors, default=0, minimum=0, maximum=MAX_ORDER)
    episodes = _int_field(raw, 'episodes', errors, default=1, minimum=1)
    seeds = _seeds(raw, errors)

    output_dir = raw.get('output_dir')
    if output_dir is not None and not isinstance(output_dir, str):
        errors.append("output_dir: must be a string")

    plant = _plant(raw.get('plant'), kind, errors)
    model = _model(raw.get('model'), kind, plant, errors)
    noise = _noise_experiment(raw.get('noise'), horizon, errors) if kind == 'noise' else {}

    estimator = _runtime(EstimatorConfig, raw.get('estimator'), 'estimator', errors)
    controller = _runtime(ControllerConfig, raw.get('controller'), 'controller', errors)
    planner = _planner(raw.get('planner'), errors)

    if kind == 'compare_kf' and plant is not None and plant['obs_noise'] is None:
        errors.append("plant.obs_noise: compare_kf needs observation noise")
    if kind == 'compare_pid':
        if order != 1:
            errors.append(f"order: compare_pid needs order 1, got {order}")
        if plant is not None and len(plant['C']) != 1:
            errors.append("plant.C: compare_pid needs a single output channel")
    if kind is not None and not seeds and _is_stochastic(kind, plant):
        errors.append(f"seeds: seed required for stochastic experiment {kind!r}")

    if errors:
        return None, errors
    return ExperimentConfig(
        kind=kind,
        horizon=horizon,
        seeds=seeds or (0,),
        order=order,
        episodes=episodes,
        plant=plant or {},
        model=model or {},
        noise=noise,
        estimator=estimator,
        controller=controller,
        planner=planner,
        output_dir=output_dir,
    ), []


def load_config(path: str) -> ExperimentConfig:
    """
    Read and validate a JSON config file

    Raises:
        ConfigError: With every validation error
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config: invalid JSON ({e})"]) from e

    config, errors = validate_config(raw)
    if errors:
        raise ConfigError(errors)
    return config
