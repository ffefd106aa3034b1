"""
Experiment spec files: YAML with one flat section per type.

    params:      preset name and/or beta0..beta2, delta0..delta2, c00..c22, K, alpha
    sim:         seed, horizon, max_events, stride, every_event, levels, mutation1,
                 mutation2, stop_on_mutant_loss, count_ceiling, initial, attempts
    analysis:    eps, final_window, prominence
    experiment:  name, replicates, parallelism, conditioning, targets
    tolerance:   frequency, duration, ratio, confidence

See SPEC_FILE_FORMAT.md for the full schema.
"""
import logging
import os
from dataclasses import replace
from typing import Any, Dict, Mapping, Optional

import yaml

from .config import Config
from .ecology import EcologyParams
from .exceptions import InvalidParameters, InvalidSpecFile
from .experiment import ExperimentSpec, TolerancePolicy, target_from_dict
from .gillespie import Condition, RecordPolicy, SimConfig
from .phase_analyzer import AnalysisConfig
from .presets import get_preset

logger = logging.getLogger(__name__)

SECTIONS = ('params', 'sim', 'analysis', 'experiment', 'tolerance')
SIM_KEYS = ('seed', 'horizon', 'max_events', 'stride', 'every_event', 'levels', 'mutation1',
            'mutation2', 'stop_on_mutant_loss', 'count_ceiling', 'initial', 'attempts')
ANALYSIS_KEYS = ('eps', 'final_window', 'prominence')
EXPERIMENT_KEYS = ('name', 'replicates', 'parallelism', 'conditioning', 'targets')
TOLERANCE_KEYS = ('frequency', 'duration', 'ratio', 'confidence')


def _section(data: Mapping[str, Any], name: str, allowed=None) -> Dict[str, Any]:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise InvalidSpecFile(f'Section {name!r} must be a mapping')
    if allowed is not None:
        unknown = sorted(set(section) - set(allowed))
        if unknown:
            raise InvalidSpecFile(f'Unknown keys in section {name!r}: {", ".join(unknown)}')
    return dict(section)


def params_from_section(section: Mapping[str, Any]) -> EcologyParams:
    """A preset (optional) overlaid with explicit keys"""
    section = dict(section)
    preset = section.pop('preset', None)
    try:
        if preset is not None:
            merged = get_preset(preset).to_section()
            merged.update(section)
            section = merged
        return EcologyParams.from_section(section)
    except (InvalidParameters, ValueError) as e:
        raise InvalidSpecFile(f'Invalid params section: {e}') from e


def sim_from_section(section: Mapping[str, Any]) -> SimConfig:
    every_event = bool(section.get('every_event', False))
    stride = section.get('stride', None if every_event else 0.1)
    record = RecordPolicy(every_event=every_event,
                          stride=None if stride is None else float(stride),
                          levels=tuple(int(x) for x in section.get('levels') or ()))
    initial = section.get('initial')
    try:
        return SimConfig(
            seed=int(section.get('seed', Config.BASE_SEED)),
            horizon=None if section.get('horizon') is None else float(section['horizon']),
            max_events=int(float(section.get('max_events', 1e9))),
            record=record,
            mutation1_enabled=bool(section.get('mutation1', True)),
            mutation2_enabled=bool(section.get('mutation2', True)),
            stop_on_mutant_loss=bool(section.get('stop_on_mutant_loss', False)),
            count_ceiling=None if section.get('count_ceiling') is None else int(section['count_ceiling']),
            initial=None if initial is None else tuple(int(x) for x in initial),
            attempts=None if section.get('attempts') is None else int(section['attempts']),
        )
    except (TypeError, ValueError) as e:
        raise InvalidSpecFile(f'Invalid sim section: {e}') from e


def analysis_from_section(section: Mapping[str, Any]) -> AnalysisConfig:
    try:
        return AnalysisConfig(**{k: (None if v is None else float(v)) for k, v in section.items()})
    except (TypeError, ValueError) as e:
        raise InvalidSpecFile(f'Invalid analysis section: {e}') from e


def condition_from_value(value: Optional[str]) -> Optional[Condition]:
    if value in (None, '', 'none', 'None'):
        return None
    try:
        return Condition(value)
    except ValueError:
        names = ', '.join(c.value for c in Condition)
        raise InvalidSpecFile(f'Unknown conditioning {value!r}. Available: {names}')


def spec_from_dict(data: Mapping[str, Any], default_name: str = 'experiment') -> ExperimentSpec:
    """
    Build an ExperimentSpec from parsed YAML.

    Raises:
        InvalidSpecFile: On unknown sections or keys, or invalid values
    """
    if not isinstance(data, dict):
        raise InvalidSpecFile('Spec file must contain a mapping')
    unknown = sorted(set(data) - set(SECTIONS) - {'description'})
    if unknown:
        raise InvalidSpecFile(f'Unknown sections: {", ".join(unknown)}')
    if 'params' not in data:
        raise InvalidSpecFile('Spec file needs a params section')

    experiment = _section(data, 'experiment', EXPERIMENT_KEYS)
    tolerance = _section(data, 'tolerance', TOLERANCE_KEYS)
    targets = experiment.get('targets') or []
    if not isinstance(targets, list):
        raise InvalidSpecFile('experiment.targets must be a list')
    try:
        policy = TolerancePolicy(**{k: float(v) for k, v in tolerance.items()})
    except ValueError as e:
        raise InvalidSpecFile(f'Invalid tolerance section: {e}') from e

    return ExperimentSpec(
        params=params_from_section(_section(data, 'params')),
        sim=sim_from_section(_section(data, 'sim', SIM_KEYS)),
        analysis=analysis_from_section(_section(data, 'analysis', ANALYSIS_KEYS)),
        replicates=int(experiment.get('replicates', 100)),
        conditioning=condition_from_value(experiment.get('conditioning')),
        targets=[target_from_dict(t) for t in targets],
        tolerance=policy,
        name=str(experiment.get('name', default_name)),
        parallelism=int(experiment.get('parallelism', Config.PARALLELISM)),
    )


def load_spec(path: str) -> ExperimentSpec:
    """
    Load an experiment spec file.

    Raises:
        InvalidSpecFile: If the file is missing, not YAML, or invalid
    """
    if not os.path.exists(path):
        raise InvalidSpecFile(f'Spec file not found: {path}')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise InvalidSpecFile(f'Error parsing spec file {path}: {e}') from e
    name = os.path.splitext(os.path.basename(path))[0]
    spec = spec_from_dict(data, default_name=name)
    logger.info(f'Loaded spec {spec.name} from {path}')
    return spec


def apply_overrides(spec: ExperimentSpec, seed: Optional[int] = None, replicates: Optional[int] = None,
                    parallelism: Optional[int] = None, eps: Optional[float] = None,
                    horizon: Optional[float] = None) -> ExperimentSpec:
    """Command-line overrides of spec fields; None leaves a field unchanged"""
    sim = spec.sim
    if seed is not None:
        sim = replace(sim, seed=int(seed))
    if horizon is not None:
        sim = replace(sim, horizon=float(horizon))
    analysis = spec.analysis if eps is None else replace(spec.analysis, eps=float(eps))
    return replace(
        spec, sim=sim, analysis=analysis,
        replicates=spec.replicates if replicates is None else int(replicates),
        parallelism=spec.parallelism if parallelism is None else int(parallelism),
    )


def spec_to_dict(spec: ExperimentSpec) -> Dict[str, Any]:
    """Inverse of spec_from_dict, for provenance and the export bundle"""
    sim = spec.sim
    return {
        'params': spec.params.to_section(),
        'sim': {
            'seed': sim.seed, 'horizon': sim.horizon, 'max_events': sim.max_events,
            'stride': sim.record.stride, 'every_event': sim.record.every_event,
            'levels': list(sim.record.levels), 'mutation1': sim.mutation1_enabled,
            'mutation2': sim.mutation2_enabled, 'stop_on_mutant_loss': sim.stop_on_mutant_loss,
            'count_ceiling': sim.count_ceiling,
            'initial': None if sim.initial is None else list(sim.initial),
            'attempts': sim.attempts,
        },
        'analysis': {'eps': spec.analysis.eps, 'final_window': spec.analysis.final_window,
                     'prominence': spec.analysis.prominence},
        'experiment': {
            'name': spec.name, 'replicates': spec.replicates, 'parallelism': spec.parallelism,
            'conditioning': spec.conditioning.value if spec.conditioning else None,
            'targets': [t.to_dict() for t in spec.targets],
        },
        'tolerance': {'frequency': spec.tolerance.frequency, 'duration': spec.tolerance.duration,
                      'ratio': spec.tolerance.ratio, 'confidence': spec.tolerance.confidence},
    }
