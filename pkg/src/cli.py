"""
Command-line interface.

    fitness     print the fitness summary of a parameter set
    classify    deterministic outcome, permanence and Volterra-Lyapunov certificate
    predict     outcome branches for params and alpha
    simulate    one trajectory as CSV
    ode         deterministic trajectory as CSV
    experiment  run a spec file and write the report
    verify      run a spec file and exit nonzero on a failed verdict
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

import yaml

from .config import Config
from .ecology import EcologyParams, summarize
from .exceptions import ClonalError, NotFound, WrongSignPattern
from .experiment import run, verify
from .export_manager import export_manager
from .gillespie import RecordPolicy, SimConfig, simulate, simulate_conditioned
from .lotka_volterra import LVSystem, classify, integrate, permanence_check, vl_certificate
from .phase_analyzer import AnalysisConfig, analyze, detect_cycles
from .presets import list_presets
from .scenario_predictor import format_predictions, predict, predictions_to_json
from .spec_files import (apply_overrides, condition_from_value, load_spec, params_from_section,
                         spec_to_dict)
from .utils.logging_setup import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def load_params(args: argparse.Namespace) -> EcologyParams:
    """--preset and/or --params (spec file or bare params mapping), then --K and --alpha"""
    section = {}
    if args.params:
        try:
            with open(args.params, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ValueError(f'Cannot read {args.params}: {e}')
        section = dict(data.get('params', data))
    if args.preset:
        section['preset'] = args.preset
    if args.K is not None:
        section['K'] = args.K
    if args.alpha is not None:
        section['alpha'] = args.alpha
    if not section:
        raise ValueError('Give --preset or --params')
    return params_from_section(section)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        logger.info(f'Wrote {output}')
    else:
        sys.stdout.write(text)
        if not text.endswith('\n'):
            sys.stdout.write('\n')


def cmd_fitness(args) -> int:
    _emit(summarize(load_params(args)).to_json(), args.output)
    return EXIT_OK


def cmd_classify(args) -> int:
    params = load_params(args)
    summary = summarize(params)
    outcome = classify(summary)
    payload = outcome.to_dict()
    try:
        payload['permanence_inequality'] = permanence_check(summary)
    except WrongSignPattern as e:
        payload['permanence_inequality'] = None
        payload['permanence_note'] = str(e)
    if payload['vl_certificate'] is None and args.vl_search:
        try:
            payload['vl_certificate'] = list(vl_certificate(params.comp))
        except NotFound as e:
            payload['vl_note'] = str(e)
    _emit(json.dumps(payload, indent=2), args.output)
    return EXIT_OK


def cmd_predict(args) -> int:
    params = load_params(args)
    predictions = predict(summarize(params), params.alpha, mutation1=not args.no_mutation1,
                          mutation2=not args.no_mutation2)
    if args.json:
        _emit(predictions_to_json(predictions), args.output)
    else:
        _emit(format_predictions(predictions, params.K), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = load_params(args)
    analysis = AnalysisConfig(eps=args.eps)
    record = RecordPolicy.every() if args.every_event else RecordPolicy.default_for(params, args.eps, args.stride)
    config = SimConfig(seed=args.seed, horizon=args.horizon, record=record,
                       mutation1_enabled=not args.no_mutation1, mutation2_enabled=not args.no_mutation2)
    condition = condition_from_value(args.condition)
    if condition is not None:
        traj = simulate_conditioned(params, config, condition, eps=args.eps)
    else:
        traj = simulate(params, config)

    if args.output:
        with open(args.output, 'w', encoding='utf-8', newline='') as f:
            export_manager.write_trajectory_csv(traj, f)
        logger.info(f'Wrote {len(traj.times)} rows to {args.output}')
    else:
        export_manager.write_trajectory_csv(traj, sys.stdout)
    if args.report:
        report = analyze(traj, analysis, summarize(params))
        cycles = detect_cycles(traj, analysis)
        with open(args.report, 'w', encoding='utf-8') as f:
            f.write(export_manager.phase_report_json(report, cycles.to_dict()))
    return EXIT_OK


def cmd_ode(args) -> int:
    params = load_params(args)
    solution = integrate(LVSystem.from_params(params), args.z0, args.horizon, stride=args.stride)
    if args.output:
        with open(args.output, 'w', encoding='utf-8', newline='') as f:
            export_manager.write_ode_csv(solution, f)
    else:
        export_manager.write_ode_csv(solution, sys.stdout)
    return EXIT_OK


def _run_spec(args):
    spec = apply_overrides(load_spec(args.spec), seed=args.seed, replicates=args.replicates,
                           parallelism=args.parallelism, eps=args.eps, horizon=args.horizon)
    return spec, run(spec)


def cmd_experiment(args) -> int:
    spec, report = _run_spec(args)
    _emit(export_manager.report_json(report), args.output)
    if args.zip:
        memory_file, _ = export_manager.export_experiment_zip(report, spec_to_dict(spec), spec.params.K)
        with open(args.zip, 'wb') as f:
            f.write(memory_file.getvalue())
        logger.info(f'Wrote bundle {args.zip}')
    return EXIT_OK


def cmd_verify(args) -> int:
    _, report = _run_spec(args)
    status, table = verify(report)
    if args.json:
        _emit(json.dumps([v.to_dict() for v in report.verdicts], indent=2), args.output)
    else:
        _emit(table, args.output)
    return EXIT_FAIL if status else EXIT_OK


def _add_param_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--preset', choices=list_presets(), help='Named parameter set')
    parser.add_argument('--params', help='YAML file with a params section (or a bare params mapping)')
    parser.add_argument('--K', type=int, help='Carrying capacity override')
    parser.add_argument('--alpha', type=float, help='Arrival exponent of the second mutant')
    parser.add_argument('-o', '--output', help='Output file (default: stdout)')


def _add_override_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('spec', help='Experiment spec file (YAML)')
    parser.add_argument('--seed', type=int, help='Base seed override')
    parser.add_argument('--replicates', type=int, help='Replicate count override')
    parser.add_argument('--parallelism', type=int, help='Worker count (joblib n_jobs)')
    parser.add_argument('--eps', type=float, help='Phase threshold override')
    parser.add_argument('--horizon', type=float, help='Simulation horizon override')
    parser.add_argument('-o', '--output', help='Output file (default: stdout)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='clonal', description='Clonal interference in a three-type birth-death model')
    parser.add_argument('--log-level', default=Config.LOG_LEVEL, help='DEBUG, INFO, WARNING, ERROR')
    parser.add_argument('--log-dir', default=Config.LOG_DIR, help='Directory for a log file')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('fitness', help='Invasion fitnesses and equilibria')
    _add_param_args(p)
    p.set_defaults(func=cmd_fitness)

    p = sub.add_parser('classify', help='Deterministic outcome of the three-type system')
    _add_param_args(p)
    p.add_argument('--vl-search', action='store_true',
                   help='Search for a Volterra-Lyapunov certificate even off the cyclic pattern')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser('predict', help='Outcome branches with probabilities and durations')
    _add_param_args(p)
    p.add_argument('--json', action='store_true', help='JSON instead of a text table')
    p.add_argument('--no-mutation1', action='store_true', help='Only the second mutant appears')
    p.add_argument('--no-mutation2', action='store_true', help='Only the first mutant appears')
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser('simulate', help='One stochastic trajectory as CSV')
    _add_param_args(p)
    p.add_argument('--seed', type=int, default=Config.BASE_SEED)
    p.add_argument('--horizon', type=float, help='Final time (default 50 log K)')
    p.add_argument('--eps', type=float, default=0.1)
    p.add_argument('--stride', type=float, default=0.1, help='Sampling interval')
    p.add_argument('--every-event', action='store_true', help='Record every transition')
    p.add_argument('--no-mutation1', action='store_true')
    p.add_argument('--no-mutation2', action='store_true')
    p.add_argument('--condition', help='Mutant1Survives, Mutant2Survives or BothSurvive')
    p.add_argument('--report', help='Write the PhaseReport JSON here')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('ode', help='Deterministic trajectory as CSV')
    _add_param_args(p)
    p.add_argument('--z0', type=float, nargs=3, required=True, metavar=('N0', 'N1', 'N2'))
    p.add_argument('--horizon', type=float, default=50.0)
    p.add_argument('--stride', type=float, help='Output spacing (default: every accepted step)')
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser('experiment', help='Run a spec file and write the report JSON')
    _add_override_args(p)
    p.add_argument('--zip', help='Also write a ZIP bundle of every output')
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser('verify', help='Run a spec file and judge every target')
    _add_override_args(p)
    p.add_argument('--json', action='store_true', help='JSON verdicts instead of a table')
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_dir)
    try:
        return args.func(args)
    except (ClonalError, ValueError) as e:
        logger.debug('Command failed', exc_info=True)
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_ERROR
