"""
Main routes for the clonal interference toolkit
"""
from flask import Blueprint, request

from ..ecology import summarize
from ..exceptions import ClonalError
from ..presets import get_preset, list_presets
from ..scenario_predictor import format_predictions, predict
from ..utils.helpers import render_page

main_bp = Blueprint('main', __name__)

INTRO = """
# Clonal interference toolkit

Two beneficial mutants compete with a resident population in a three-type
birth-death model with logistic competition. The second mutant arrives at
time `alpha log K`.

## Endpoints

| Method | Path | Body |
|---|---|---|
| POST | `/api/fitness` | `{"params": {...}}` |
| POST | `/api/classify` | `{"params": {...}}` |
| POST | `/api/predict` | `{"params": {...}, "alpha": 1.1}` |
| POST | `/api/ode` | `{"params": {...}, "z0": [1, 0.1, 0.1], "horizon": 50}` |
| POST | `/api/simulate` | `{"params": {...}, "sim": {...}, "eps": 0.1}` |
| GET | `/api/presets` | |

`params` is a flat mapping (`beta0..beta2`, `delta0..delta2`, `c00..c22`,
`K`, `alpha`) or `{"preset": name}` with optional overrides.

Presets: {presets}

Add `?preset=<name>&alpha=<value>` to this page for a prediction table.
"""


@main_bp.route('/')
def index():
    """Home page with the service description and an optional prediction table"""
    text = INTRO.replace('{presets}', ', '.join(f'`{name}`' for name in list_presets()))
    preset = request.args.get('preset')
    if preset:
        try:
            params = get_preset(preset)
            alpha = request.args.get('alpha')
            if alpha is not None:
                params = params.with_alpha(float(alpha))
            table = format_predictions(predict(summarize(params)), params.K)
            text += f'\n## Predictions for `{preset}` (alpha = {params.alpha:g})\n\n```\n{table}\n```\n'
        except (ClonalError, ValueError) as e:
            return render_page(text + f'\n**Error:** {e}\n', title='Clonal interference'), 400
    return render_page(text, title='Clonal interference')
