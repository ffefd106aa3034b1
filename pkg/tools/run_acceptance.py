#!/usr/bin/env python3
"""
Run the shipped experiments and print every verdict.

Besides the experiment files this checks two composite quantities: the birth-death
oracle over several (b, d, lower, start, upper) settings and survival starts, and the ratio of the
second mutant's invasion time with and without the first mutant.
"""

import argparse
import os
import sys
from dataclasses import replace

# Add parent directory to path to import from src
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from src.config import Config
from src.ecology import EcologyParams
from src.experiment import HittingProb, SurvivalProb, run, verify
from src.spec_files import apply_overrides, load_spec
from src.utils.logging_setup import setup_logging

EXPERIMENTS_DIR = os.path.join(os.path.dirname(__file__), '..', 'experiments')

SPEC_FILES = [
    'single_mutant_sweep.yaml',
    'single_mutant_sweep_conditioned.yaml',
    'birth_death_extinction.yaml',
    'birth_death_survival.yaml',
    'ode_limit.yaml',
    'interference_speedup.yaml',
    'interference_speedup_conditioned.yaml',
    'second_mutant_annihilation.yaml',
    'cyclic_dominance.yaml',
]

# (b, d, lower, start, upper)
ORACLE_SETTINGS = [
    (2.0, 1.0, 0, 1, 10),
    (3.0, 1.0, 0, 2, 8),
    (1.5, 1.0, 0, 3, 12),
    (1.0, 2.0, 0, 4, 6),
    (2.0, 1.0, 2, 4, 15),
]

# (b, d, start), stopped at SURVIVAL_CEILING
SURVIVAL_SETTINGS = [
    (2.0, 1.0, 1),
    (3.0, 1.0, 1),
    (1.5, 1.0, 2),
    (2.0, 1.0, 3),
    (4.0, 3.0, 2),
]
SURVIVAL_CEILING = 60

SPEEDUP_RATIO = 1.325 / 3.0
SPEEDUP_SLACK = 0.25


def run_file(name, args):
    spec = apply_overrides(load_spec(os.path.join(EXPERIMENTS_DIR, name)),
                           seed=args.seed, parallelism=args.parallelism)
    if args.quick:
        spec = replace(spec, replicates=max(spec.replicates // 10, 20))
    report = run(spec)
    status, table = verify(report)
    print(f'\n== {spec.name} ({report.provenance["wall_time"]:.1f}s)\n{table}')
    return status, report


def _oracle_spec(base, b, d, start, ceiling, name, target):
    beta = (b,) + base.params.beta[1:]
    delta = (d,) + base.params.delta[1:]
    params = EcologyParams(beta=beta, delta=delta, comp=base.params.comp,
                           carrying_capacity=1, alpha=0.0)
    sim = replace(base.sim, initial=(start, 0, 0), count_ceiling=ceiling)
    return replace(base, params=params, sim=sim, name=name, targets=[target])


def run_oracle(args):
    base = load_spec(os.path.join(EXPERIMENTS_DIR, 'birth_death_oracle.yaml'))
    base = apply_overrides(base, seed=args.seed, parallelism=args.parallelism)
    specs = [_oracle_spec(base, b, d, start, upper, f'oracle b={b:g} d={d:g} ({lower},{start},{upper})',
                          HittingProb(lower=lower, upper=upper))
             for b, d, lower, start, upper in ORACLE_SETTINGS]
    specs += [_oracle_spec(base, b, d, start, SURVIVAL_CEILING, f'survival b={b:g} d={d:g} from {start}',
                           SurvivalProb())
              for b, d, start in SURVIVAL_SETTINGS]
    failures = 0
    for spec in specs:
        if args.quick:
            spec = replace(spec, replicates=1000)
        status, table = verify(run(spec))
        print(f'\n== {spec.name}\n{table}')
        failures += status
    return failures


def speedup_ratio(with_first, alone):
    def median(report):
        for estimate in report.estimates:
            if estimate.name == 'invasion_time[2]':
                return estimate.value
        return None

    a, b = median(with_first), median(alone)
    if a is None or b is None:
        print('\nSpeedup ratio: not available')
        return 1
    ratio = a / b
    passed = abs(ratio - SPEEDUP_RATIO) <= SPEEDUP_SLACK * SPEEDUP_RATIO
    print(f'\nSpeedup ratio {ratio:.3f} (predicted {SPEEDUP_RATIO:.3f}): {"Pass" if passed else "Fail"}')
    return 0 if passed else 1


def main():
    parser = argparse.ArgumentParser(description='Run the acceptance experiments')
    parser.add_argument('--seed', type=int, default=Config.BASE_SEED)
    parser.add_argument('--parallelism', type=int, default=Config.PARALLELISM)
    parser.add_argument('--quick', action='store_true', help='A tenth of the replicates')
    args = parser.parse_args()
    setup_logging(Config.LOG_LEVEL, Config.LOG_DIR)

    failures = run_oracle(args)
    reports = {}
    for name in SPEC_FILES:
        status, reports[name] = run_file(name, args)
        failures += status
    _, alone = run_file('interference_speedup_alone.yaml', args)
    failures += speedup_ratio(reports['interference_speedup_conditioned.yaml'], alone)

    print(f'\n{failures} failing check(s)')
    return 1 if failures else 0


if __name__ == '__main__':
    sys.exit(main())
