"""
Analysis API endpoints
Handles fitness summaries, classification, predictions, ODE and simulation requests
"""
import logging
from dataclasses import replace

from flask import jsonify, request

from ..config import Config
from ..ecology import summarize
from ..exceptions import ClonalError
from ..gillespie import RecordPolicy, simulate, simulate_conditioned
from ..lotka_volterra import LVSystem, classify, integrate
from ..phase_analyzer import AnalysisConfig, analyze, detect_cycles
from ..scenario_predictor import format_predictions, predict
from ..spec_files import condition_from_value, params_from_section, sim_from_section

logger = logging.getLogger(__name__)


def _payload():
    data = request.get_json(silent=True)
    if not data:
        raise ValueError('No JSON data provided')
    if 'params' not in data:
        raise ValueError('Request needs a params object')
    return data


def _params(data):
    section = dict(data['params'])
    if 'alpha' in data:
        section['alpha'] = data['alpha']
    return params_from_section(section)


def _error(e, status):
    return jsonify({'success': False, 'error': str(e)}), status


def fitness_summary():
    """API endpoint returning the fitness summary of a parameter set"""
    try:
        summary = summarize(_params(_payload()))
        return jsonify({'success': True, 'summary': summary.to_dict()})
    except (ClonalError, ValueError) as e:
        return _error(e, 400)
    except Exception as e:
        logger.exception('fitness request failed')
        return _error(e, 500)


def classify_outcome():
    """API endpoint returning the deterministic outcome of the three-type system"""
    try:
        outcome = classify(summarize(_params(_payload())))
        return jsonify({'success': True, 'outcome': outcome.to_dict()})
    except (ClonalError, ValueError) as e:
        return _error(e, 400)
    except Exception as e:
        logger.exception('classify request failed')
        return _error(e, 500)


def predict_outcomes():
    """API endpoint returning every outcome branch for params and alpha"""
    try:
        data = _payload()
        params = _params(data)
        predictions = predict(summarize(params), params.alpha,
                              mutation1=bool(data.get('mutation1', True)),
                              mutation2=bool(data.get('mutation2', True)))
        return jsonify({
            'success': True,
            'predictions': [p.to_dict() for p in predictions],
            'table': format_predictions(predictions, params.K),
        })
    except (ClonalError, ValueError) as e:
        return _error(e, 400)
    except Exception as e:
        logger.exception('predict request failed')
        return _error(e, 500)


def ode_trajectory():
    """API endpoint integrating the Lotka-Volterra system from z0"""
    try:
        data = _payload()
        params = _params(data)
        z0 = data.get('z0')
        if not z0 or len(z0) != 3:
            raise ValueError('z0 must list three densities')
        horizon = float(data.get('horizon', 50.0))
        stride = data.get('stride')
        solution = integrate(LVSystem.from_params(params), [float(x) for x in z0], horizon,
                             stride=None if stride is None else float(stride))
        rows = [[float(t)] + [float(x) for x in row]
                for t, row in zip(solution.times, solution.full_states())]
        return jsonify({'success': True, 'terminal': solution.terminal.value,
                        'columns': ['t', 'n0', 'n1', 'n2'], 'rows': rows})
    except (ClonalError, ValueError) as e:
        return _error(e, 400)
    except Exception as e:
        logger.exception('ode request failed')
        return _error(e, 500)


def simulate_trajectory():
    """API endpoint running one trajectory and returning its phase report"""
    try:
        data = _payload()
        params = _params(data)
        if params.K > Config.API_MAX_K:
            raise ValueError(f'K={params.K} exceeds the server limit of {Config.API_MAX_K}')
        eps = float(data.get('eps', 0.1))
        config = sim_from_section(data.get('sim') or {})
        if not config.record.levels and not config.record.every_event:
            record = RecordPolicy.default_for(params, eps, config.record.stride or 0.1)
            config = replace(config, record=record)
        condition = condition_from_value(data.get('condition'))
        if condition is not None:
            traj = simulate_conditioned(params, config, condition, eps=eps)
        else:
            traj = simulate(params, config)
        analysis = AnalysisConfig(eps=eps)
        report = analyze(traj, analysis, summarize(params))
        return jsonify({
            'success': True,
            'trajectory': traj.summary(),
            'report': report.to_dict(),
            'cycles': detect_cycles(traj, analysis).to_dict(),
        })
    except (ClonalError, ValueError) as e:
        return _error(e, 400)
    except Exception as e:
        logger.exception('simulate request failed')
        return _error(e, 500)
