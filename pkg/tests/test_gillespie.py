#!/usr/bin/env python3
"""
Test the stochastic simulator: recording, stopping rules, seeding and conditioning
"""
import io
import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.ecology import EcologyParams
from src.exceptions import InsufficientRecording, NonviableResident, RejectionBudgetExceeded
from src.gillespie import (EV_INJECT, EV_SAMPLE, Condition, PopulationState, RecordPolicy,
                           SimConfig, Terminal, derive_seed, initial_state, simulate,
                           simulate_conditioned)
from src.presets import get_preset


def _oracle_params(b, d):
    """Type 0 as a linear birth-death process"""
    return EcologyParams(beta=(b, 1.0, 1.0), delta=(d, 1.0, 1.0), comp=((1e-9,) * 3,) * 3,
                         carrying_capacity=1)


class TestSeedsAndStart(unittest.TestCase):

    def test_derive_seed(self):
        self.assertEqual(derive_seed(42, 3), derive_seed(42, 3))
        self.assertNotEqual(derive_seed(42, 3), derive_seed(42, 4))
        self.assertNotEqual(derive_seed(42, 3), derive_seed(43, 3))
        self.assertNotEqual(derive_seed(42, 3, 0), derive_seed(42, 3))

    def test_initial_state(self):
        state = initial_state(get_preset('speedup'))
        self.assertEqual(state.counts, (1111, 1, 0))
        self.assertEqual(state.time, 0.0)

    def test_nonviable_resident(self):
        params = EcologyParams(beta=(1.0, 2.0, 2.0), delta=(1.0, 0.0, 0.0), comp=((1.0,) * 3,) * 3,
                               carrying_capacity=100)
        with self.assertRaises(NonviableResident):
            initial_state(params)

    def test_population_state_validation(self):
        with self.assertRaises(ValueError):
            PopulationState((1, -1, 0), 0.0)
        with self.assertRaises(ValueError):
            PopulationState((1, 1, 0), float('nan'))


class TestConfig(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ValueError):
            SimConfig(horizon=0.0)
        with self.assertRaises(ValueError):
            SimConfig(count_ceiling=0)
        with self.assertRaises(ValueError):
            RecordPolicy(stride=-1.0)

    def test_resolved_horizon(self):
        self.assertAlmostEqual(SimConfig().resolved_horizon(1000), 50.0 * math.log(1000))
        self.assertEqual(SimConfig().resolved_horizon(1), 50.0)
        self.assertEqual(SimConfig(horizon=7.0).resolved_horizon(1000), 7.0)

    def test_default_levels(self):
        record = RecordPolicy.default_for(get_preset('single_sweep'), 0.1)
        self.assertEqual(record.levels, (1, 10, 100, 1500, 2500))
        self.assertEqual(record.stride, 0.1)


class TestSimulate(unittest.TestCase):

    def setUp(self):
        self.params = get_preset('speedup').with_carrying_capacity(100)

    def test_replay_is_identical(self):
        config = SimConfig(seed=7, horizon=5.0, record=RecordPolicy.every())
        first, second = io.StringIO(), io.StringIO()
        simulate(self.params, config).write_csv(first)
        simulate(self.params, config).write_csv(second)
        self.assertEqual(first.getvalue(), second.getvalue())
        self.assertTrue(first.getvalue().startswith('t,n0,n1,n2,event'))

    def test_seeds_give_different_paths(self):
        a = simulate(self.params, SimConfig(seed=1, horizon=5.0))
        b = simulate(self.params, SimConfig(seed=2, horizon=5.0))
        self.assertFalse(np.array_equal(a.counts, b.counts) and np.array_equal(a.times, b.times))

    def test_every_event_steps_by_one(self):
        traj = simulate(self.params, SimConfig(seed=3, horizon=5.0, record=RecordPolicy.every()))
        self.assertEqual(traj.initial.counts, (111, 1, 0))
        self.assertTrue(np.all(traj.counts >= 0))
        self.assertTrue(np.all(np.diff(traj.times) >= 0))
        jumps = np.abs(np.diff(traj.counts, axis=0)).sum(axis=1)
        self.assertTrue(np.all(jumps <= 1))

    def test_second_mutant_arrives_on_schedule(self):
        traj = simulate(self.params, SimConfig(seed=4, horizon=5.0))
        self.assertEqual(traj.terminal, Terminal.HORIZON_REACHED)
        self.assertAlmostEqual(traj.injected2_at, 0.5 * math.log(100))
        row = int(np.flatnonzero(traj.events == EV_INJECT)[0])
        self.assertEqual(traj.counts[row][2], traj.counts[row - 1][2] + 1)
        self.assertEqual(traj.times[row], traj.injected2_at)

    def test_injection_adds_one_mutant_only(self):
        t_inject = 0.5 * math.log(100)
        for seed in range(8):
            traj = simulate(self.params, SimConfig(seed=seed, horizon=5.0, record=RecordPolicy.every()))
            if traj.terminal != Terminal.HORIZON_REACHED:
                continue
            rows = np.flatnonzero(traj.events == EV_INJECT)
            self.assertEqual(len(rows), 1)
            row = int(rows[0])
            np.testing.assert_array_equal(traj.counts[row] - traj.counts[row - 1], [0, 0, 1])
            self.assertEqual(traj.counts[row - 1][2], 0)
            self.assertLess(traj.times[row - 1], t_inject)
            self.assertAlmostEqual(traj.times[row], t_inject)
            # the event drawn across the injection time is not applied
            self.assertGreater(traj.times[row + 1], t_inject)
            self.assertEqual(int(np.sum(traj.events < EV_INJECT)), traj.n_events)

    def test_second_mutant_disabled(self):
        traj = simulate(self.params, SimConfig(seed=4, horizon=5.0, mutation2_enabled=False))
        self.assertIsNone(traj.injected2_at)
        self.assertTrue(np.all(traj.counts[:, 2] == 0))

    def test_stride_samples(self):
        traj = simulate(self.params, SimConfig(seed=5, horizon=5.0, record=RecordPolicy.strided(0.5)))
        sampled = traj.times[traj.events == EV_SAMPLE][1:-1]
        np.testing.assert_allclose(sampled, 0.5 * np.arange(1, len(sampled) + 1))
        self.assertEqual(traj.end_time, 5.0)

    def test_tabulated_hits_match_event_record(self):
        record = RecordPolicy(every_event=True, stride=None, levels=(5,))
        traj = simulate(self.params, SimConfig(seed=11, horizon=5.0, mutation2_enabled=False,
                                               record=record))
        scanned = np.flatnonzero(traj.counts[:, 1] == 5)
        hit = traj.first_hit(1, 5)
        if scanned.size:
            self.assertEqual(hit, float(traj.times[scanned[0]]))
        else:
            self.assertIsNone(hit)

    def test_unrecorded_level(self):
        traj = simulate(self.params, SimConfig(seed=5, horizon=2.0, record=RecordPolicy.strided(0.5)))
        with self.assertRaises(InsufficientRecording):
            traj.first_hit(1, 7)

    def test_event_budget(self):
        traj = simulate(self.params, SimConfig(seed=6, horizon=50.0, max_events=50))
        self.assertEqual(traj.terminal, Terminal.EVENT_BUDGET)
        self.assertEqual(traj.n_events, 50)

    def test_mutant_loss_stops_run(self):
        params = get_preset('single_sweep').with_carrying_capacity(100)
        for seed in range(5):
            traj = simulate(params, SimConfig(seed=seed, horizon=30.0, mutation2_enabled=False,
                                              stop_on_mutant_loss=True))
            self.assertIn(traj.terminal, (Terminal.MUTANTS_LOST, Terminal.HORIZON_REACHED))
            if traj.terminal == Terminal.MUTANTS_LOST:
                self.assertEqual(traj.final.counts[1], 0)

    def test_count_ceiling(self):
        params = _oracle_params(2.0, 1.0)
        config = SimConfig(seed=8, horizon=100.0, initial=(1, 0, 0), count_ceiling=10,
                           mutation2_enabled=False, record=RecordPolicy(stride=None))
        for r in range(10):
            traj = simulate(params, replace(config, seed=derive_seed(8, r)))
            self.assertIn(traj.terminal, (Terminal.COUNT_CEILING, Terminal.ALL_EXTINCT))
            expected = 10 if traj.terminal == Terminal.COUNT_CEILING else 0
            self.assertEqual(traj.final.counts[0], expected)

    def test_summary_fields(self):
        summary = simulate(self.params, SimConfig(seed=9, horizon=1.0)).summary()
        self.assertEqual(summary['seed'], 9)
        self.assertIn(summary['terminal'], [t.value for t in Terminal])


class TestConditioned(unittest.TestCase):

    def test_accepted_run_reaches_level(self):
        params = get_preset('single_sweep').with_carrying_capacity(100)
        config = SimConfig(seed=12, horizon=20.0, mutation2_enabled=False)
        traj = simulate_conditioned(params, config, Condition.MUTANT1_SURVIVES, eps=0.1)
        self.assertIsNotNone(traj.first_hit(1, 10))
        self.assertGreaterEqual(traj.rejections, 0)
        again = simulate_conditioned(params, config, Condition.MUTANT1_SURVIVES, eps=0.1)
        self.assertEqual(again.seed, traj.seed)
        self.assertTrue(np.array_equal(again.counts, traj.counts))

    def test_disabled_mutant(self):
        params = get_preset('single_sweep').with_carrying_capacity(100)
        config = SimConfig(mutation2_enabled=False)
        with self.assertRaises(ValueError):
            simulate_conditioned(params, config, Condition.BOTH_SURVIVE)

    def test_budget_exhausted(self):
        # the mutant is strongly deleterious
        params = EcologyParams(beta=(2.0, 0.5, 2.0), delta=(0.0, 0.0, 0.0), comp=((1.0,) * 3,) * 3,
                               carrying_capacity=100)
        config = SimConfig(seed=13, horizon=10.0, mutation2_enabled=False, attempts=3)
        with self.assertRaises(RejectionBudgetExceeded) as ctx:
            simulate_conditioned(params, config, Condition.MUTANT1_SURVIVES, eps=0.1)
        self.assertEqual(ctx.exception.attempts, 3)


if __name__ == '__main__':
    unittest.main()
