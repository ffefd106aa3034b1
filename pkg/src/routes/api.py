"""
API routes for the clonal interference toolkit
"""
from flask import Blueprint, jsonify

from ..api.analysis import (classify_outcome, fitness_summary, ode_trajectory, predict_outcomes,
                            simulate_trajectory)
from ..presets import PRESETS

api_bp = Blueprint('api', __name__, url_prefix='/api')


@api_bp.route('/fitness', methods=['POST'])
def fitness_route():
    """Route wrapper for the fitness summary"""
    return fitness_summary()


@api_bp.route('/classify', methods=['POST'])
def classify_route():
    """Route wrapper for the deterministic classification"""
    return classify_outcome()


@api_bp.route('/predict', methods=['POST'])
def predict_route():
    """Route wrapper for the outcome predictions"""
    return predict_outcomes()


@api_bp.route('/ode', methods=['POST'])
def ode_route():
    """Route wrapper for the deterministic trajectory"""
    return ode_trajectory()


@api_bp.route('/simulate', methods=['POST'])
def simulate_route():
    """Route wrapper for a single stochastic trajectory"""
    return simulate_trajectory()


@api_bp.route('/presets')
def presets_route():
    """Named parameter sets as params sections"""
    return jsonify({
        'success': True,
        'presets': {name: params.to_section() for name, params in sorted(PRESETS.items())},
    })
