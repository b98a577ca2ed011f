"""
Test config validation, run outputs and the experiment CLI
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from harness.config import ConfigError, load_config, validate_config
from harness.experiments import increment_mismatch, run_seed
from harness.report import REPORT_FILE, RunReport, _cell, write_trace
from harness.run import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main, resolve_output_dir


TEST_DATA = Path(__file__).parent / 'test_data'


def estimate_config(**overrides):
    raw = {
        'experiment': 'estimate',
        'horizon': 20,
        'seeds': [0],
        'plant': {'type': 'lti', 'A': [[0.0]], 'B': [[1.0]], 'C': [[1.0]],
                  'obs_noise': {'covariance': [[0.1]], 'sigma': 0.0}},
    }
    raw.update(overrides)
    return raw


def write_config(tmp_path, raw, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(raw), encoding='utf-8')
    return str(path)


def errors_for(raw):
    config, errors = validate_config(raw)
    assert config is None
    return errors


# validation

def test_golden_minimal_config():
    config = load_config(TEST_DATA / 'minimal_estimate.json')
    expected = json.loads((TEST_DATA / 'minimal_estimate_expected.json').read_text(encoding='utf-8'))
    assert json.loads(json.dumps(config.to_dict())) == expected


def test_config_must_be_an_object():
    assert errors_for([]) == ["config: must be a JSON object"]


def test_unknown_experiment():
    assert any(e.startswith("experiment: must be one of") for e in errors_for(estimate_config(experiment='dance')))


def test_horizon_required_and_non_negative():
    raw = estimate_config()
    del raw['horizon']
    assert "horizon: required" in errors_for(raw)
    assert "horizon: must be >= 0, got -1" in errors_for(estimate_config(horizon=-1))


def test_matrix_shapes_are_checked():
    raw = estimate_config(plant={'type': 'lti', 'A': np.eye(2).tolist(), 'B': [[1.0], [0.0]],
                                 'C': [[1.0, 0.0, 0.0]]})
    assert "plant.C: is 1x3 but plant.A is 2x2" in errors_for(raw)


def test_stochastic_experiment_needs_seeds():
    raw = estimate_config()
    del raw['seeds']
    assert "seeds: seed required for stochastic experiment 'estimate'" in errors_for(raw)


def test_deterministic_experiment_defaults_to_seed_zero():
    raw = {'experiment': 'estimate', 'horizon': 5, 'plant': {'type': 'integrator'}}
    config, errors = validate_config(raw)
    assert errors == []
    assert config.seeds == (0,)


def test_noise_covariance_must_be_positive_definite():
    raw = estimate_config()
    raw['plant']['obs_noise'] = {'covariance': [[-1.0]]}
    assert "plant.obs_noise.covariance: must be symmetric positive definite" in errors_for(raw)


def test_order_is_bounded():
    assert "order: must be <= 6, got 9" in errors_for(estimate_config(order=9))


def test_runtime_values_are_validated():
    assert "estimator: kappa_x must be > 0, got -1" in errors_for(estimate_config(estimator={'kappa_x': -1}))
    assert "estimator.kapa_x: unknown field" in errors_for(estimate_config(estimator={'kapa_x': 1.0}))
    errors = errors_for(estimate_config(controller={'jacobian_strategy': 'guess'}))
    assert any(e.startswith("controller: jacobian_strategy must be one of") for e in errors)


def test_every_error_is_reported():
    errors = errors_for(estimate_config(horizon=-1, order=9, seeds=[1, 1]))
    assert "horizon: must be >= 0, got -1" in errors
    assert "order: must be <= 6, got 9" in errors
    assert "seeds: must not repeat" in errors


def test_plant_type_must_fit_experiment():
    raw = estimate_config(plant={'type': 'tmaze'})
    assert any(e.startswith("plant.type: must be one of") for e in errors_for(raw))


def test_compare_pid_needs_first_order():
    raw = {'experiment': 'compare_pid', 'horizon': 10, 'order': 0, 'plant': {'type': 'integrator'},
           'model': {'type': 'attractor', 'target': [1.0]}}
    assert "order: compare_pid needs order 1, got 0" in errors_for(raw)


def test_model_state_must_match_plant_state():
    raw = estimate_config(model={'type': 'linear', 'A': [[0.0, 1.0], [0.0, 0.0]], 'B': [[0.0], [1.0]],
                                 'C': [[1.0, 0.0]]})
    assert "model.A: is 2x2 but plant.A is 1x1" in errors_for(raw)


def test_attractor_target_must_not_be_empty():
    raw = {'experiment': 'control', 'horizon': 10, 'plant': {'type': 'integrator'},
           'model': {'type': 'attractor', 'target': []}}
    assert errors_for(raw) == ["model.target: must not be empty"]


def test_tmaze_arm_must_be_less_informative_than_cue():
    raw = {'experiment': 'plan', 'horizon': 10, 'seeds': [0],
           'plant': {'type': 'tmaze', 'reward_probability': 1.0}}
    errors = errors_for(raw)
    assert len(errors) == 1
    assert errors[0].startswith("plant.reward_probability: an arm must be less informative than the cue")


def test_planner_counts_must_be_integers():
    raw = {'experiment': 'plan', 'horizon': 10, 'seeds': [0], 'plant': {'type': 'mountain_car'},
           'planner': {'cem': {'population': 2.5}}}
    errors = errors_for(raw)
    assert len(errors) == 1
    assert errors[0].startswith("planner.cem: population must be an integer")


def test_planner_perception_settings():
    raw = {'experiment': 'plan', 'horizon': 10, 'seeds': [0], 'plant': {'type': 'mountain_car'},
           'planner': {'perception': {'kappa_x': 2.0, 'steps_per_observation': 5}}}
    config, errors = validate_config(raw)
    assert errors == []
    assert config.planner.perception.kappa_x == 2.0
    assert config.planner.perception.steps_per_observation == 5
    raw['planner']['perception'] = {'kappa_x': 0.0}
    assert errors_for(raw) == ["planner.perception: kappa_x must be > 0, got 0.0"]


def test_compare_kf_needs_observation_noise():
    raw = {'experiment': 'compare_kf', 'horizon': 10, 'seeds': [0], 'plant': {'type': 'integrator'}}
    assert "plant.obs_noise: compare_kf needs observation noise" in errors_for(raw)


def test_load_config_raises_with_all_errors(tmp_path):
    path = write_config(tmp_path, estimate_config(horizon=-1, order=9))
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert len(excinfo.value.errors) == 2


@pytest.mark.parametrize("path", sorted((Path(__file__).parent / 'configs').glob('*.json')), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    config = load_config(path)
    assert path.stem.startswith(config.kind)


def test_invalid_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"experiment": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(path)


# run outputs

def test_cell_formatting():
    assert _cell(True) == '1'
    assert _cell(np.int64(3)) == '3'
    assert _cell(0.1) == '0.1'
    assert _cell(np.float64(1 / 3)) == repr(1 / 3)


def test_write_trace_checks_row_width(tmp_path):
    with pytest.raises(ValueError):
        write_trace(tmp_path / 'trace.csv', ['t', 'y'], [[0.0]])


def test_report_round_trip(tmp_path):
    report = RunReport(experiment='estimate', config={'horizon': 3})
    report.add_seed(0, {'mse_aif': 0.25, 'steps': 3})
    report.wall_clock_seconds = 1.5
    report.to_json(tmp_path / REPORT_FILE)
    loaded = RunReport.from_json(tmp_path / REPORT_FILE)
    assert loaded == report
    assert loaded.metrics_for(0)['mse_aif'] == 0.25


def test_report_rejects_non_finite_metrics():
    with pytest.raises(ValueError):
        RunReport(experiment='estimate', config={}).add_seed(0, {'mse_aif': math.nan})


def test_output_dir_resolution(monkeypatch):
    config, _ = validate_config(estimate_config())
    monkeypatch.setenv('FEA_OUT_DIR', 'elsewhere')
    assert resolve_output_dir(config, 'explicit') == Path('explicit')
    assert resolve_output_dir(config, None) == Path('elsewhere')
    monkeypatch.delenv('FEA_OUT_DIR')
    assert resolve_output_dir(config, None) == Path('runs')


# CLI

def test_cli_writes_trace_and_report(tmp_path):
    out = tmp_path / 'out'
    assert main(['estimate', '--config', write_config(tmp_path, estimate_config()), '--out', str(out)]) == EXIT_OK

    lines = (out / 'trace_0.csv').read_text(encoding='utf-8').splitlines()
    assert lines[0] == 't,y.0,mu.0,u.0,F,x.0'
    assert len(lines) == 21
    report = RunReport.from_json(out / REPORT_FILE)
    assert report.experiment == 'estimate'
    assert report.config['horizon'] == 20
    assert set(report.metrics_for(0)) == {'steps', 'mse_aif', 'final_error', 'mean_F'}


def test_cli_rejects_invalid_config(tmp_path):
    path = write_config(tmp_path, estimate_config(horizon=-1))
    assert main(['estimate', '--config', path, '--out', str(tmp_path / 'out')]) == EXIT_CONFIG
    assert not (tmp_path / 'out').exists()


def test_cli_rejects_missing_file(tmp_path):
    assert main(['estimate', '--config', str(tmp_path / 'missing.json')]) == EXIT_CONFIG


def test_cli_subcommand_must_match_experiment(tmp_path):
    assert main(['control', '--config', write_config(tmp_path, estimate_config())]) == EXIT_CONFIG


def test_cli_reports_divergence(tmp_path):
    raw = {
        'experiment': 'estimate',
        'horizon': 50,
        'plant': {'type': 'integrator', 'input': [1.0]},
        'estimator': {'kappa_x': 1000.0, 'dt': 1.0, 'steps_per_observation': 10},
    }
    assert main(['estimate', '--config', write_config(tmp_path, raw), '--out', str(tmp_path / 'out')]) == EXIT_DIVERGED


def test_zero_horizon_writes_header_only(tmp_path):
    out = tmp_path / 'out'
    assert main(['estimate', '--config', write_config(tmp_path, estimate_config(horizon=0)), '--out', str(out)]) == EXIT_OK
    assert (out / 'trace_0.csv').read_text(encoding='utf-8') == 't,y.0,mu.0,u.0,F,x.0\n'
    assert RunReport.from_json(out / REPORT_FILE).metrics_for(0) == {'steps': 0.0}


def test_reruns_are_byte_identical(tmp_path):
    path = write_config(tmp_path, estimate_config(seeds=[0, 1]))
    for name in ('a', 'b'):
        assert main(['estimate', '--config', path, '--out', str(tmp_path / name)]) == EXIT_OK
    for seed in (0, 1):
        trace = f'trace_{seed}.csv'
        assert (tmp_path / 'a' / trace).read_bytes() == (tmp_path / 'b' / trace).read_bytes()
    first = RunReport.from_json(tmp_path / 'a' / REPORT_FILE)
    second = RunReport.from_json(tmp_path / 'b' / REPORT_FILE)
    assert first.results == second.results


def test_seeds_differ(tmp_path):
    config, _ = validate_config(estimate_config(seeds=[0, 1]))
    assert run_seed(config, 0).rows != run_seed(config, 1).rows


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / 'out'
    path = write_config(tmp_path, estimate_config(seeds=[0, 1]))
    assert main(['estimate', '--config', path, '--out', str(out), '--seed', '5']) == EXIT_OK
    assert sorted(p.name for p in out.glob('trace_*.csv')) == ['trace_5.csv']
    assert main(['estimate', '--config', path, '--seed', '-1']) == EXIT_CONFIG


def test_parallel_seeds_match_sequential(tmp_path):
    path = write_config(tmp_path, estimate_config(seeds=[0, 1, 2]))
    assert main(['estimate', '--config', path, '--out', str(tmp_path / 'serial')]) == EXIT_OK
    assert main(['estimate', '--config', path, '--out', str(tmp_path / 'parallel'), '--jobs', '2']) == EXIT_OK
    for seed in (0, 1, 2):
        trace = f'trace_{seed}.csv'
        assert (tmp_path / 'serial' / trace).read_bytes() == (tmp_path / 'parallel' / trace).read_bytes()


def test_compare_kf_reports_both_errors(tmp_path):
    raw = estimate_config(experiment='compare-kf', horizon=200, seeds=[0, 1, 2])
    raw['plant']['process_noise'] = {'covariance': [[0.01]]}
    out = tmp_path / 'out'
    assert main(['compare-kf', '--config', write_config(tmp_path, raw), '--out', str(out)]) == EXIT_OK
    report = RunReport.from_json(out / REPORT_FILE)
    for seed in (0, 1, 2):
        metrics = report.metrics_for(seed)
        assert metrics['mse_kf'] > 0
        assert metrics['mse_ratio'] == pytest.approx(metrics['mse_aif'] / metrics['mse_kf'])
    header = (out / 'trace_0.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header.endswith(',kf.0')


def test_noise_experiment_matches_target_variance(tmp_path):
    raw = {'experiment': 'noise', 'horizon': 500, 'seeds': [3],
           'noise': {'covariance': [[0.5]], 'sigma': 0.5, 'dt': 0.1}}
    out = tmp_path / 'out'
    assert main(['noise', '--config', write_config(tmp_path, raw), '--out', str(out)]) == EXIT_OK
    metrics = RunReport.from_json(out / REPORT_FILE).metrics_for(3)
    assert metrics['variance_0'] == pytest.approx(0.5, abs=1e-10)
    assert metrics['lag1_autocorr_0'] > 0.9


def test_tmaze_plan_experiment(tmp_path):
    raw = {'experiment': 'plan', 'horizon': 10, 'seeds': [0], 'episodes': 3,
           'plant': {'type': 'tmaze', 'reward_probability': 0.9}}
    out = tmp_path / 'out'
    assert main(['plan', '--config', write_config(tmp_path, raw), '--out', str(out)]) == EXIT_OK
    metrics = RunReport.from_json(out / REPORT_FILE).metrics_for(0)
    assert metrics['episodes'] == 3
    assert metrics['cue_first_rate'] == 1.0


def test_control_experiment(tmp_path):
    raw = {'experiment': 'control', 'horizon': 400, 'order': 1,
           'plant': {'type': 'integrator', 'dt': 0.05},
           'model': {'type': 'attractor', 'target': [1.0], 'tau': 1.0},
           'estimator': {'kappa_x': 10.0, 'dt': 0.005, 'steps_per_observation': 10},
           'controller': {'kappa_u': 2.0, 'dt': 0.05}}
    out = tmp_path / 'out'
    assert main(['control', '--config', write_config(tmp_path, raw), '--out', str(out)]) == EXIT_OK
    metrics = RunReport.from_json(out / REPORT_FILE).metrics_for(0)
    assert metrics['mean_F_last'] < metrics['mean_F_first']
    assert metrics['final_abs_error'] < 1.0


def test_increment_mismatch_is_per_step():
    # a 1% gap on a small step counts as much as on a large one
    assert increment_mismatch([1.0, 0.0101], [1.0, 0.01]) == pytest.approx(0.01)
    assert increment_mismatch([], []) == 0.0


def test_increment_mismatch_floors_zero_crossings():
    assert increment_mismatch([1.0, 1e-12], [1.0, 0.0]) == pytest.approx(1e-4)


def test_compare_pid_experiment_counts_the_initial_pi_output():
    raw = {'experiment': 'compare_pid', 'horizon': 50, 'order': 1,
           'plant': {'type': 'integrator', 'dt': 0.01, 'x0': [0.0]},
           'model': {'type': 'attractor', 'target': [1.0], 'tau': 1e-6,
                     'obs_noise': {'covariance': [[1.0]], 'sigma': 0.7071067811865476}},
           'estimator': {'kappa_x': 1.0, 'dt': 5e-13, 'steps_per_observation': 20},
           'controller': {'kappa_u': 1.0}}
    config, errors = validate_config(raw)
    assert errors == []
    result = run_seed(config, 0)
    assert result.metrics['kp'] == pytest.approx(1.0)
    assert result.metrics['ki'] == pytest.approx(1.0)
    du_aif, du_pid = result.header.index('du_aif'), result.header.index('du_pid')
    first = result.rows[0]
    # at rest both increments are ki * e * dt on the first step
    assert first[du_pid] == pytest.approx(0.01)
    assert first[du_aif] == pytest.approx(0.01, rel=1e-6)
    assert result.metrics['max_relative_mismatch'] < 0.01


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
