import logging

import numpy as np
import scipy
from flask import Blueprint, jsonify, request

from config import APP_VERSION, CALIBRATION_TARGETS, PRESET_NAMES, parse_config, preset_config
from exceptions import ConfigError
from experiment import calibrate, run_scenario
from helpers import to_jsonable

logger = logging.getLogger(__name__)

api = Blueprint('api', __name__, url_prefix='/api')


# =============== HELPER FUNCTIONS ===============
def json_body():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ConfigError('Request body must be a JSON object')
    return data


def success(data):
    return jsonify({'success': True, 'data': to_jsonable(data)})


# =============== PUBLIC API ROUTES ===============
@api.route('/health')
def health_api():
    return success({
        'status': 'ok',
        'versions': {'app': APP_VERSION, 'numpy': np.__version__, 'scipy': scipy.__version__},
    })


@api.route('/presets')
def presets_list_api():
    return success({'presets': list(PRESET_NAMES)})


@api.route('/presets/<name>')
def preset_details_api(name):
    if name not in PRESET_NAMES:
        return jsonify({'success': False, 'error': f'Unknown preset {name}', 'code': 404}), 404
    return success(preset_config(name).to_dict())


@api.route('/calibrate', methods=['POST'])
def calibrate_api():
    data = json_body()
    unknown = set(data) - set(CALIBRATION_TARGETS)
    if unknown:
        raise ConfigError(f'Unknown keys: {sorted(unknown)}')
    targets = {**CALIBRATION_TARGETS, **data}
    try:
        targets = {k: float(v) for k, v in targets.items()}
    except (TypeError, ValueError):
        raise ConfigError('Calibration targets must be numbers')
    v_s, v_a = calibrate(targets['ln_initial'], targets['ln_discrete_premix'])
    return success({'v_squeezed': v_s, 'v_antisqueezed': v_a, 'targets': targets})


@api.route('/scenario', methods=['POST'])
def scenario_api():
    """Run a scenario with the analytic engine and return the report (no files written)"""
    config = parse_config(json_body())
    if config.engine != 'analytic':
        raise ConfigError('Only the analytic engine is served over HTTP; use the CLI for Monte Carlo runs')
    report = run_scenario(config, write=False)
    logger.info('served scenario %s (%s)', config.name, report.status)
    return success(report.to_dict())
