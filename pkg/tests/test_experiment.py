#!/usr/bin/env python3
"""
Test estimators, verdicts and the replicate driver
"""
import os
import sys
import unittest

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.ecology import EcologyParams
from src.exceptions import InvalidSpecFile
from src.experiment import (TARGET_TYPES, Acceptance, Estimate, EstimateKind, ExperimentReport,
                            ExperimentSpec, FinalStateFreq, HittingProb, InvasionProb, InvasionTime,
                            SurvivalProb, TolerancePolicy, Verdict, judge, median_interval, run,
                            state_matches, target_from_dict, verify, wilson_interval)
from src.gillespie import Condition, RecordPolicy, SimConfig
from src.phase_analyzer import AnalysisConfig
from src.presets import get_preset
from src.spec_files import apply_overrides, load_spec

EXPERIMENTS_DIR = os.path.join(os.path.dirname(__file__), '..', 'experiments')


def sweep_spec(**overrides):
    """Single mutant at K=100 with runs stopped once the mutant is gone"""
    spec = ExperimentSpec(
        params=get_preset('single_sweep').with_carrying_capacity(100),
        sim=SimConfig(seed=99, horizon=20.0, mutation2_enabled=False, stop_on_mutant_loss=True),
        analysis=AnalysisConfig(eps=0.1, final_window=5.0),
        replicates=20,
        targets=[InvasionProb(type=1), InvasionTime(type=1), FinalStateFreq()],
        name='sweep',
        parallelism=1,
    )
    for key, value in overrides.items():
        setattr(spec, key, value)
    return spec


class TestIntervals(unittest.TestCase):

    def test_wilson(self):
        low, high = wilson_interval(5, 10)
        self.assertAlmostEqual(low + high, 1.0)
        self.assertLess(low, 0.5)
        low, high = wilson_interval(0, 10)
        self.assertAlmostEqual(low, 0.0)
        self.assertGreater(high, 0.0)
        self.assertAlmostEqual(wilson_interval(10, 10)[1], 1.0)
        self.assertEqual(wilson_interval(0, 0), (0.0, 1.0))

    def test_wider_at_higher_confidence(self):
        narrow = wilson_interval(30, 100, 0.9)
        wide = wilson_interval(30, 100, 0.99)
        self.assertLess(wide[0], narrow[0])
        self.assertGreater(wide[1], narrow[1])

    def test_width_shrinks_with_root_n(self):
        widths = []
        for n in (400, 1600, 6400):
            low, high = wilson_interval(int(0.3 * n), n)
            widths.append(high - low)
        self.assertAlmostEqual(widths[0] / widths[1], 2.0, delta=0.02)
        self.assertAlmostEqual(widths[1] / widths[2], 2.0, delta=0.02)
        z = 1.959964
        self.assertAlmostEqual(widths[2], 2 * z * (0.3 * 0.7 / 6400) ** 0.5, delta=1e-4)

    def test_median_interval(self):
        self.assertEqual(median_interval([2.0, 2.0, 2.0], 0.95, seed=1), (2.0, 2.0, 2.0))
        values = [float(x) for x in range(1, 12)]
        median, low, high = median_interval(values, 0.95, seed=1)
        self.assertEqual(median, 6.0)
        self.assertLessEqual(low, median)
        self.assertGreaterEqual(high, median)
        self.assertEqual(median_interval(values, 0.95, seed=1), (median, low, high))


class TestJudge(unittest.TestCase):

    def setUp(self):
        self.policy = TolerancePolicy()

    def _frequency(self, prediction):
        return Estimate('p', EstimateKind.FREQUENCY, 0.33, 0.30, 0.36, 1000, prediction)

    def test_frequency(self):
        self.assertEqual(judge(self._frequency(1.0 / 3.0), self.policy).verdict, Verdict.PASS)
        self.assertEqual(judge(self._frequency(0.5), self.policy).verdict, Verdict.FAIL)
        self.assertEqual(judge(self._frequency(None), self.policy).verdict, Verdict.NOT_APPLICABLE)

    def test_duration(self):
        estimate = Estimate('t', EstimateKind.DURATION, 10.0, 9.0, 11.0, 50, 11.0)
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.PASS)
        estimate.prediction = 15.0
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.FAIL)

    def test_ratio(self):
        estimate = Estimate('r', EstimateKind.RATIO, 0.55, 0.5, 0.6, 50, 0.5)
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.PASS)
        estimate.prediction = 0.8
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.FAIL)

    def test_min_frequency(self):
        estimate = Estimate('d', EstimateKind.MIN_FREQUENCY, 0.97, 0.9, 0.99, 100, 0.95)
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.PASS)
        estimate.value = 0.9
        self.assertEqual(judge(estimate, self.policy).verdict, Verdict.FAIL)

    def test_policy_validation(self):
        with self.assertRaises(ValueError):
            TolerancePolicy(confidence=1.5)
        with self.assertRaises(ValueError):
            TolerancePolicy(frequency=-0.1)

    def test_verify_perturbed_prediction(self):
        good = ExperimentReport('r', [self._frequency(1.0 / 3.0)], [], [], {})
        status, table = verify(good, self.policy)
        self.assertEqual(status, 0)
        self.assertIn('Pass', table)
        bad = ExperimentReport('r', [self._frequency(1.5 / 3.0)], [], [], {})
        status, table = verify(bad, self.policy)
        self.assertEqual(status, 1)
        self.assertIn('Fail', table)

    def test_cycling_states_match_loosely(self):
        self.assertTrue(state_matches('RPSCycles', 'Undetermined'))
        self.assertTrue(state_matches('AmbiguousPossiblyPeriodic', 'interior'))
        self.assertFalse(state_matches('RPSCycles', 'axis1'))
        self.assertTrue(state_matches('axis1', 'axis1'))


class TestTargets(unittest.TestCase):

    def test_registry_round_trip(self):
        for cls in TARGET_TYPES.values():
            target = cls()
            self.assertEqual(target_from_dict(target.to_dict()), target)
        self.assertIsInstance(target_from_dict({'target': 'survival_prob'}), SurvivalProb)

    def test_list_options(self):
        target = target_from_dict({'target': 'cycle_durations', 'cycles': [1, 2, 3]})
        self.assertEqual(target.cycles, (1, 2, 3))

    def test_errors(self):
        with self.assertRaises(InvalidSpecFile):
            target_from_dict({'target': 'nothing'})
        with self.assertRaises(InvalidSpecFile):
            target_from_dict({'target': 'invasion_prob', 'colour': 'red'})
        with self.assertRaises(InvalidSpecFile):
            target_from_dict({'type': 1})

    def test_spec_validation(self):
        with self.assertRaises(InvalidSpecFile):
            ExperimentSpec(params=get_preset('speedup'), replicates=0)

    def test_resolved_levels(self):
        spec = ExperimentSpec(params=get_preset('speedup'), targets=[HittingProb(lower=2, upper=17)])
        levels = spec.resolved_sim().record.levels
        self.assertIn(17, levels)
        self.assertIn(2, levels)
        self.assertIn(100, levels)


class TestRun(unittest.TestCase):

    def test_single_sweep_report(self):
        report = run(sweep_spec())
        names = [e.name for e in report.estimates]
        self.assertIn('invasion_prob[1]', names)
        self.assertIn('invasion_time[1]', names)
        self.assertIn('final_state_freq[NoInterference:mutant1-only]', names)
        invasion = report.estimates[names.index('invasion_prob[1]')]
        self.assertAlmostEqual(invasion.prediction, 1.0 / 3.0)
        self.assertEqual(invasion.n, 20)
        self.assertEqual(report.provenance['completed'], 20)
        self.assertEqual(len(report.verdicts), len(report.estimates))

    def test_report_is_reproducible(self):
        first = run(sweep_spec()).to_json(include_wall_time=False)
        second = run(sweep_spec()).to_json(include_wall_time=False)
        self.assertEqual(first, second)

    def test_parallelism_does_not_change_results(self):
        serial = run(sweep_spec(), parallelism=1).to_json(include_wall_time=False)
        parallel = run(sweep_spec(), parallelism=2).to_json(include_wall_time=False)
        self.assertEqual(serial, parallel)

    def test_conditioned_predictions(self):
        spec = sweep_spec(conditioning=Condition.MUTANT1_SURVIVES, replicates=5,
                          targets=[InvasionProb(type=1), Acceptance()])
        report = run(spec)
        invasion, acceptance = report.estimates
        self.assertEqual(invasion.value, 1.0)
        self.assertAlmostEqual(invasion.prediction, 1.0)
        self.assertAlmostEqual(acceptance.prediction, 1.0 / 3.0)
        self.assertEqual(report.provenance['conditioning'], 'Mutant1Survives')

    def test_exhausted_replicates(self):
        # the mutant is strongly deleterious
        params = EcologyParams(beta=(2.0, 0.5, 2.0), delta=(0.0, 0.0, 0.0), comp=((1.0,) * 3,) * 3,
                               carrying_capacity=100)
        spec = ExperimentSpec(params=params,
                              sim=SimConfig(seed=5, horizon=10.0, mutation2_enabled=False, attempts=2),
                              replicates=3, conditioning=Condition.MUTANT1_SURVIVES,
                              targets=[InvasionProb(type=1)], parallelism=1)
        report = run(spec)
        self.assertEqual(report.provenance['exhausted'], 3)
        self.assertEqual(report.verdicts[0].verdict, Verdict.NOT_APPLICABLE)
        self.assertTrue(report.passed)

    def test_birth_death_oracle(self):
        params = EcologyParams(beta=(2.0, 1.0, 1.0), delta=(1.0, 1.0, 1.0), comp=((1e-9,) * 3,) * 3,
                               carrying_capacity=1)
        spec = ExperimentSpec(
            params=params,
            sim=SimConfig(seed=3, initial=(1, 0, 0), count_ceiling=10, mutation1_enabled=False,
                          mutation2_enabled=False, record=RecordPolicy(stride=None)),
            replicates=200, targets=[HittingProb(lower=0, upper=10)], parallelism=1)
        estimate = run(spec).estimates[0]
        self.assertAlmostEqual(estimate.prediction, 0.50049, places=5)
        self.assertEqual(estimate.n, 200)
        self.assertLessEqual(estimate.ci_low, estimate.value)

    def test_survival_oracle(self):
        params = EcologyParams(beta=(3.0, 1.0, 1.0), delta=(1.0, 1.0, 1.0), comp=((1e-9,) * 3,) * 3,
                               carrying_capacity=1)
        spec = ExperimentSpec(
            params=params,
            sim=SimConfig(seed=5, initial=(2, 0, 0), count_ceiling=40, mutation1_enabled=False,
                          mutation2_enabled=False, record=RecordPolicy(stride=None)),
            replicates=300, targets=[SurvivalProb()], parallelism=1)
        report = run(spec)
        estimate = report.estimates[0]
        self.assertEqual(estimate.name, 'survival_prob')
        self.assertAlmostEqual(estimate.prediction, 1.0 - 1.0 / 9.0)
        self.assertEqual(estimate.n, 300)
        self.assertLessEqual(estimate.ci_low, estimate.value)
        self.assertLessEqual(estimate.value, estimate.ci_high)
        # 300 replicates at p = 8/9 sit well inside three standard errors
        self.assertLess(abs(estimate.value - estimate.prediction), 0.06)

    def test_subcritical_survival_has_no_prediction(self):
        params = EcologyParams(beta=(1.0, 1.0, 1.0), delta=(2.0, 1.0, 1.0), comp=((1e-9,) * 3,) * 3,
                               carrying_capacity=1)
        spec = ExperimentSpec(
            params=params,
            sim=SimConfig(seed=6, initial=(1, 0, 0), count_ceiling=20, mutation1_enabled=False,
                          mutation2_enabled=False, record=RecordPolicy(stride=None)),
            replicates=20, targets=[SurvivalProb()], parallelism=1)
        report = run(spec)
        self.assertIsNone(report.estimates[0].prediction)
        self.assertEqual(report.verdicts[0].verdict, Verdict.NOT_APPLICABLE)


@unittest.skipUnless(os.getenv('CLONAL_SLOW_TESTS'), 'set CLONAL_SLOW_TESTS=1 for acceptance runs')
class TestAcceptance(unittest.TestCase):
    """Shipped experiments at reduced replicate counts"""

    def _passes(self, name, replicates):
        spec = apply_overrides(load_spec(os.path.join(EXPERIMENTS_DIR, name)), replicates=replicates)
        report = run(spec)
        status, table = verify(report)
        self.assertEqual(status, 0, table)

    def test_single_mutant_sweep(self):
        self._passes('single_mutant_sweep.yaml', 2000)

    def test_birth_death_extinction(self):
        self._passes('birth_death_extinction.yaml', 5000)

    def test_second_mutant_annihilation(self):
        self._passes('second_mutant_annihilation.yaml', 1000)

    def test_birth_death_oracle(self):
        self._passes('birth_death_oracle.yaml', 5000)

    def test_birth_death_survival(self):
        self._passes('birth_death_survival.yaml', 5000)

    def test_cyclic_dominance(self):
        self._passes('cyclic_dominance.yaml', 800)

    def test_interference_speedup(self):
        self._passes('interference_speedup.yaml', 1500)

    def test_interference_speedup_conditioned(self):
        self._passes('interference_speedup_conditioned.yaml', 300)

    def test_ode_limit(self):
        self._passes('ode_limit.yaml', 100)

    def test_speedup_ratio(self):
        # median invasion time of the second mutant with the first present, over alone
        medians = []
        for name in ('interference_speedup_conditioned.yaml', 'interference_speedup_alone.yaml'):
            spec = apply_overrides(load_spec(os.path.join(EXPERIMENTS_DIR, name)), replicates=300)
            estimates = {e.name: e for e in run(spec).estimates}
            medians.append(estimates['invasion_time[2]'].value)
        self.assertIsNotNone(medians[0])
        self.assertIsNotNone(medians[1])
        self.assertAlmostEqual(medians[0] / medians[1], 1.325 / 3.0, delta=0.25 * 1.325 / 3.0)


if __name__ == '__main__':
    unittest.main()
