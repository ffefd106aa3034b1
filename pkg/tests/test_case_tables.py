#!/usr/bin/env python3
"""
Test loading and matching the outcome trees
"""
import os
import sys
import tempfile
import unittest

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.case_tables import CLASSIFY, CaseTable, case_table, guard_holds
from src.ecology import summarize
from src.exceptions import InvalidSpecFile, UnhandledCase
from src.presets import get_preset


def _values(preset):
    params = get_preset(preset)
    return dict(summarize(params).named(), alpha=params.alpha)


MINIMAL = {
    'symbols': ['s01', 's10', 'alpha'],
    'tables': {
        'demo': {
            'definitions': {'x': 'alpha - 1/s10'},
            'cases': [
                {'label': 'A', 'guard': ['s01 > 0'], 'final_state': 'pair01', 'duration': '1/s10', 'reach': [1]},
                {'label': 'B', 'guard': ['s01 < 0', 'x > 0'], 'duration': 'x',
                 'outcomes': [{'guard': ['s10 > 2'], 'final_state': 'axis1'}], 'fallback': 'classify'},
            ],
        },
    },
}


class TestShippedTables(unittest.TestCase):

    def test_tables_present(self):
        self.assertIn('first_leads', case_table.tables)
        self.assertIn('late_second', case_table.tables)
        self.assertEqual([row.label for row in case_table.rows('late_second')][:3], ['A', 'B', 'C'])

    def test_speedup_leaf(self):
        match = case_table.match('first_leads', _values('speedup'))
        self.assertEqual(match.row.label, 'E')
        self.assertEqual(match.final_state, 'axis2')
        self.assertAlmostEqual(match.duration, 1.825321, places=5)
        self.assertEqual(match.row.reach, (1, 2))

    def test_annihilation_leaf(self):
        match = case_table.match('late_second', _values('annihilation'))
        self.assertEqual(match.row.label, 'F')
        self.assertEqual(match.sub_row, 1)
        self.assertEqual(match.final_state, 'axis0')
        self.assertAlmostEqual(match.duration, 3.289716, places=5)

    def test_cyclic_leaf(self):
        match = case_table.match('late_second', _values('cyclic'))
        self.assertEqual(match.row.label, 'I')
        self.assertEqual(match.final_state, 'rps_cycles')
        self.assertIsNone(match.duration)
        self.assertIsNone(match.printed_duration)

    def test_unknown_table(self):
        with self.assertRaises(UnhandledCase):
            case_table.match('nowhere', _values('speedup'))


class TestLateSecondLeaves(unittest.TestCase):
    """Rows guarded by s01 < 0, where s201 is undefined"""

    def _match(self, **values):
        self.assertNotIn('s201', values)
        return case_table.match('late_second', values)

    def test_row_c(self):
        # x = 2 - 1 + 1 = 2 > 1/|s01|
        match = self._match(s01=-1.0, s10=1.0, s21=1.0, s12=0.5, s02=-1.0, s20=1.0, alpha=2.0)
        self.assertEqual((match.row.label, match.final_state), ('C', 'pair12'))
        self.assertAlmostEqual(match.duration, 3.0)
        self.assertAlmostEqual(match.printed_duration, 3.0)

    def test_row_e(self):
        match = self._match(s01=-1.0, s10=1.0, s21=1.0, s12=-0.5, s02=-1.0, s20=1.0, alpha=2.0)
        self.assertEqual((match.row.label, match.final_state), ('E', 'axis2'))
        self.assertAlmostEqual(match.printed_duration, 3.0)

    def test_row_j(self):
        # x = 0.5 < 1/|s01|
        match = self._match(s01=-1.0, s10=1.0, s21=1.0, s12=-0.5, s02=-1.0, s20=1.0, alpha=0.5)
        self.assertEqual((match.row.label, match.final_state), ('J', 'axis2'))
        self.assertAlmostEqual(match.duration, 1.5)
        self.assertAlmostEqual(match.printed_duration, 1.5)

    def test_row_k(self):
        match = self._match(s01=-1.0, s10=1.0, s21=1.0, s12=0.5, s02=-1.0, s20=1.0, s012=-1.0,
                            alpha=0.5)
        self.assertEqual((match.row.label, match.final_state), ('K', 'pair12'))
        self.assertAlmostEqual(match.printed_duration, 1.5)


class TestFirstLeadsPrintedDurations(unittest.TestCase):
    """Published forms evaluated by hand with s10 = 1, s20 = 0.5, alpha = 0.5 (g = 0.25)"""

    BASE = {'s10': 1.0, 's20': 0.5, 's01': -1.0, 'alpha': 0.5}

    def _match(self, **values):
        return case_table.match('first_leads', dict(self.BASE, **values))

    def test_row_c(self):
        match = self._match(s21=0.25, s12=0.5, s02=-1.0)
        self.assertEqual(match.row.label, 'C')
        self.assertAlmostEqual(match.printed_duration, 1.0 + 4.0 * 0.5)
        self.assertAlmostEqual(match.duration, 1.0 + 0.75 / 0.25)

    def test_row_d(self):
        match = self._match(s21=1.0, s12=0.5, s02=-1.0, s012=2.0, s102=1.0)
        self.assertEqual((match.row.label, match.final_state), ('D', 'coexist012'))
        self.assertAlmostEqual(match.printed_duration, 1.0 + 1.5 * 0.5)
        self.assertAlmostEqual(match.duration, 1.0 + 1.5 * 0.75)

    def test_row_f(self):
        match = self._match(s21=1.0, s12=-1.0, s02=0.25)
        self.assertEqual((match.row.label, match.final_state), ('F', 'pair02'))
        self.assertAlmostEqual(match.printed_duration, 1.0 + 5.0 * 0.5)

    def test_row_g(self):
        match = self._match(s21=1.0, s12=-0.25, s02=0.25, s102=0.5)
        self.assertEqual((match.row.label, match.final_state), ('G', 'coexist012'))
        self.assertAlmostEqual(match.printed_duration, 1.0 + (1.0 + 4.0 + 2.0) * 0.5)
        self.assertAlmostEqual(match.duration, 1.0 + 5.0 * 0.75 + 2.0 * 0.75)

    def test_row_h(self):
        match = self._match(s21=1.0, s12=-0.25, s02=0.25, s102=-0.5)
        self.assertEqual((match.row.label, match.final_state), ('H', 'pair02'))
        self.assertAlmostEqual(match.printed_duration, 1.0 + 5.0 * 0.5)

    def test_row_j(self):
        match = self._match(s21=1.0, s12=0.5, s02=-1.0, s012=-1.0)
        self.assertEqual(match.row.label, 'J')
        self.assertAlmostEqual(match.printed_duration, 1.0 + 0.5)
        self.assertAlmostEqual(match.duration, 1.0 + 0.75)


class TestCustomTables(unittest.TestCase):

    def setUp(self):
        self.table = CaseTable(MINIMAL)

    def test_definitions_and_outcomes(self):
        match = self.table.match('demo', {'s01': -1.0, 's10': 3.0, 'alpha': 1.0})
        self.assertEqual(match.row.label, 'B')
        self.assertEqual(match.final_state, 'axis1')
        self.assertAlmostEqual(match.duration, 1.0 - 1.0 / 3.0)

    def test_fallback_to_classification(self):
        match = self.table.match('demo', {'s01': -1.0, 's10': 1.5, 'alpha': 1.0})
        self.assertEqual(match.final_state, CLASSIFY)

    def test_no_match(self):
        with self.assertRaises(UnhandledCase):
            self.table.match('demo', {'s01': -1.0, 's10': 1.0, 'alpha': 0.5})

    def test_undefined_symbol_fails_guard(self):
        guard = self.table.rows('demo')[0].guard
        self.assertFalse(guard_holds(guard, {'s10': 1.0}))
        self.assertTrue(guard_holds(guard, {'s01': 0.5}))

    def test_equality_fails_strict_guard(self):
        with self.assertRaises(UnhandledCase):
            self.table.match('demo', {'s01': 0.0, 's10': 1.0, 'alpha': 2.0})

    def test_printed_duration_with_undefined_fitness(self):
        data = {'symbols': ['s01', 's10', 's201'], 'tables': {'t': {'cases': [
            {'label': 'A', 'guard': ['s01 < 0'], 'final_state': 'axis1', 'duration': '1/s10',
             'printed_duration': '1/s201'}]}}}
        match = CaseTable(data).match('t', {'s01': -1.0, 's10': 2.0})
        self.assertAlmostEqual(match.duration, 0.5)
        self.assertIsNone(match.printed_duration)

    def test_rejects_unknown_state(self):
        data = {'symbols': ['s01'], 'tables': {'t': {'cases': [
            {'label': 'A', 'guard': ['s01 > 0'], 'final_state': 'nowhere', 'duration': '1'}]}}}
        with self.assertRaises(InvalidSpecFile):
            CaseTable(data)

    def test_rejects_bad_expression(self):
        data = {'symbols': ['s01'], 'tables': {'t': {'cases': [
            {'label': 'A', 'guard': ['s01 >'], 'final_state': 'axis0', 'duration': '1'}]}}}
        with self.assertRaises(InvalidSpecFile):
            CaseTable(data)

    def test_rejects_missing_sections(self):
        with self.assertRaises(InvalidSpecFile):
            CaseTable({'tables': {}})

    def test_load_errors(self):
        with self.assertRaises(InvalidSpecFile):
            CaseTable.load('/nonexistent/case_tables.yaml')
        with tempfile.NamedTemporaryFile('w', suffix='.yaml', delete=False) as f:
            f.write('')
        try:
            with self.assertRaises(InvalidSpecFile):
                CaseTable.load(f.name)
        finally:
            os.unlink(f.name)


if __name__ == '__main__':
    unittest.main()
