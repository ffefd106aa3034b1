#!/usr/bin/env python3
"""
Test fitness algebra, equilibria and the cycle constructions
"""
import os
import sys
import unittest

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.ecology import (ABSENT, EcologyParams, Infeasible, Relation, TransitivityRegime,
                         build_rps_parameters, build_vl_rps_parameters, coexistence_equilibrium,
                         cyclic_pattern_violation, invasion_fitness, is_cyclic, pairwise_order,
                         summarize, transitivity_regime)
from src.exceptions import Degenerate, InvalidEta, InvalidParameters, PairInfeasible
from src.lotka_volterra import permanence_check, verify_vl_certificate
from src.presets import PRESETS, get_preset


class TestEcologyParams(unittest.TestCase):
    """Validation and the flat section form"""

    def test_rejects_invalid_values(self):
        good = get_preset('speedup')
        with self.assertRaises(InvalidParameters):
            EcologyParams(beta=(0.0, 2.0, 2.0), delta=good.delta, comp=good.comp, carrying_capacity=100)
        with self.assertRaises(InvalidParameters):
            EcologyParams(beta=good.beta, delta=(-1.0, 0.0, 0.0), comp=good.comp, carrying_capacity=100)
        with self.assertRaises(InvalidParameters):
            EcologyParams(beta=good.beta, delta=good.delta, comp=((1, 1, 1), (1, 0, 1), (1, 1, 1)),
                          carrying_capacity=100)
        with self.assertRaises(InvalidParameters):
            EcologyParams(beta=good.beta, delta=good.delta, comp=good.comp, carrying_capacity=0)
        with self.assertRaises(InvalidParameters):
            EcologyParams(beta=good.beta, delta=good.delta, comp=good.comp, carrying_capacity=10.5)
        with self.assertRaises(InvalidParameters):
            good.with_alpha(-0.1)

    def test_integral_float_capacity_is_accepted(self):
        params = get_preset('speedup').with_carrying_capacity(500.0)
        self.assertEqual(params.K, 500)
        self.assertIsInstance(params.carrying_capacity, int)

    def test_section_round_trip(self):
        params = get_preset('annihilation')
        self.assertEqual(EcologyParams.from_section(params.to_section()), params)

    def test_section_missing_key(self):
        section = get_preset('cyclic').to_section()
        del section['c12']
        with self.assertRaises(InvalidParameters):
            EcologyParams.from_section(section)

    def test_relabelled_moves_types(self):
        params = get_preset('speedup')
        swapped = params.relabelled((0, 2, 1))
        self.assertEqual(swapped.beta[1], params.beta[2])
        self.assertEqual(swapped.comp[1][2], params.comp[2][1])
        self.assertEqual(swapped.comp[0][1], params.comp[0][2])


class TestFitness(unittest.TestCase):
    """Invasion fitnesses of the shipped parameter sets"""

    def test_diagonal_is_zero(self):
        for name, params in PRESETS.items():
            summary = summarize(params)
            for i in range(3):
                self.assertEqual(summary.S[i][i], 0.0, name)

    def test_single_sweep(self):
        summary = summarize(get_preset('single_sweep'))
        self.assertAlmostEqual(summary.nbar[0], 1.5)
        self.assertAlmostEqual(summary.fitness(1, 0), 1.0)
        self.assertAlmostEqual(summary.fitness(0, 1), -1.0)
        self.assertAlmostEqual(summary.fitness(1, 2), 0.0)

    def test_uniform_competition_is_transitive(self):
        params = EcologyParams(beta=(1.0, 2.0, 3.0), delta=(0.0, 0.0, 0.0),
                               comp=((0.7,) * 3,) * 3, carrying_capacity=100)
        summary = summarize(params)
        for i in range(3):
            for j in range(3):
                self.assertAlmostEqual(summary.S[i][j], params.rho[i] - params.rho[j])
        self.assertFalse(is_cyclic(params))

    def test_speedup_values(self):
        named = summarize(get_preset('speedup')).named()
        self.assertAlmostEqual(named['s10'], 0.888889, places=5)
        self.assertAlmostEqual(named['s20'], 1.0 / 3.0, places=6)
        self.assertAlmostEqual(named['s01'], -1.478261, places=5)
        self.assertAlmostEqual(named['s21'], 1.130435, places=5)
        self.assertAlmostEqual(named['s12'], -0.857143, places=5)
        self.assertNotIn('s201', named)

    def test_bacterial_cycle(self):
        summary = summarize(get_preset('bacterial_cycle'))
        named = summary.named()
        # derived from C22 = 1.75; the printed -0.0143 drops a digit
        self.assertAlmostEqual(named['s12'], -0.142857, places=5)
        self.assertIsNone(cyclic_pattern_violation(summary))
        self.assertTrue(permanence_check(summary))

    def test_relabelling_permutes_fitnesses(self):
        params = get_preset('annihilation')
        summary = summarize(params)
        swapped = summarize(params.relabelled((0, 2, 1)))
        self.assertAlmostEqual(swapped.S[1][0], summary.S[2][0])
        self.assertAlmostEqual(swapped.S[2][1], summary.S[1][2])
        self.assertAlmostEqual(swapped.S[0][2], summary.S[0][1])

    def test_invasion_fitness_same_type(self):
        self.assertEqual(invasion_fitness(get_preset('cyclic'), 2, 2), 0.0)


class TestEquilibria(unittest.TestCase):
    """Dimorphic equilibria and trimorphic fitnesses"""

    def test_degenerate_pair(self):
        params = get_preset('single_sweep')
        with self.assertRaises(Degenerate):
            coexistence_equilibrium(params, 0, 1)
        summary = summarize(params)
        self.assertEqual(summary.nbar_pair[(0, 1)], Infeasible(Infeasible.DEGENERATE))
        self.assertIs(summary.S_tri[(2, (0, 1))], ABSENT)
        with self.assertRaises(PairInfeasible):
            summary.tri(2, 0, 1)

    def test_coexisting_pair(self):
        # both invade each other
        params = EcologyParams(beta=(1.0, 1.0, 1.0), delta=(0.0, 0.0, 0.0),
                               comp=((1.0, 0.5, 1.0), (0.5, 1.0, 1.0), (1.0, 1.0, 1.0)),
                               carrying_capacity=100)
        n0, n1 = coexistence_equilibrium(params, 0, 1)
        self.assertAlmostEqual(n0, 2.0 / 3.0)
        self.assertAlmostEqual(n1, 2.0 / 3.0)
        summary = summarize(params)
        self.assertAlmostEqual(summary.tri(2, 0, 1), 1.0 - 4.0 / 3.0)
        self.assertEqual(summary.pair(1, 0), (n1, n0))

    def test_infeasible_pair(self):
        summary = summarize(get_preset('speedup'))
        self.assertFalse(summary.pair_feasible(0, 1))
        self.assertEqual(summary.nbar_pair[(0, 1)].reason, Infeasible.NONPOSITIVE)

    def test_to_dict_fields(self):
        data = summarize(get_preset('cyclic')).to_dict()
        self.assertEqual(set(data), {'rho', 'nbar', 'nbar_pair', 'S', 'S_tri'})
        self.assertEqual(data['nbar'], [1.0, 1.0, 1.0])


class TestDominance(unittest.TestCase):
    """Pairwise order, cycles and the cycle constructions"""

    def test_pairwise_order(self):
        params = get_preset('cyclic')
        self.assertEqual(pairwise_order(params, 0, 1).relation, Relation.PRECEDES)
        self.assertEqual(pairwise_order(params, 1, 0).relation, Relation.FOLLOWS)
        self.assertEqual(str(pairwise_order(params, 0, 1)), '0≺1')

    def test_cyclic_pattern(self):
        self.assertTrue(is_cyclic(get_preset('cyclic')))
        self.assertIsNone(cyclic_pattern_violation(summarize(get_preset('cyclic'))))
        self.assertEqual(cyclic_pattern_violation(summarize(get_preset('speedup'))), 's20 < 0')

    def test_transitivity_regimes(self):
        self.assertEqual(transitivity_regime(1.05, 1.1), TransitivityRegime.FORCED_TRANSITIVE)
        self.assertEqual(transitivity_regime(1.02, 1.5), TransitivityRegime.WEAKLY_TRANSITIVE)
        self.assertEqual(transitivity_regime(0.5, 1.5), TransitivityRegime.CYCLE_CONSTRUCTIBLE)
        with self.assertRaises(ValueError):
            transitivity_regime(1.5, 0.5)

    def test_rps_construction(self):
        params = build_rps_parameters(0.5, 1.5, eta=0.1)
        self.assertTrue(is_cyclic(params))
        summary = summarize(params)
        self.assertAlmostEqual(summary.fitness(0, 1), -0.14)
        self.assertAlmostEqual(summary.fitness(2, 1), 0.3)

    def test_rps_construction_bounds(self):
        with self.assertRaises(InvalidEta):
            build_rps_parameters(1.2, 1.5, eta=0.1)
        with self.assertRaises(InvalidEta):
            build_rps_parameters(0.5, 1.5, eta=1.0)

    def test_vl_construction(self):
        params = build_vl_rps_parameters(0.25)
        self.assertTrue(is_cyclic(params))
        self.assertTrue(verify_vl_certificate(params.comp, (1.0, 1.0, 1.0)))
        with self.assertRaises(InvalidEta):
            build_vl_rps_parameters(0.5)


if __name__ == '__main__':
    unittest.main()
