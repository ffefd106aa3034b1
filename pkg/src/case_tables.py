"""
Loader and evaluator for the declarative outcome trees in data/case_tables.yaml.

Expressions are parsed once with sympy and compiled with lambdify; guards
are evaluated left to right against a name -> value map of fitnesses.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp
import yaml

from .config import Config
from .exceptions import InvalidSpecFile, UnhandledCase

logger = logging.getLogger(__name__)

FINAL_STATES = ('origin', 'axis0', 'axis1', 'axis2', 'pair01', 'pair02', 'pair12',
                'interior', 'coexist012', 'rps_cycles')
CLASSIFY = 'classify'


class CompiledExpression:
    """A sympy expression with a fast numeric evaluator"""

    def __init__(self, text: str, expr: sp.Basic, symbols: Sequence[sp.Symbol]):
        self.text = text
        self.expr = expr
        self.names = tuple(sorted(str(s) for s in expr.free_symbols))
        args = [s for s in symbols if str(s) in self.names]
        self._func = sp.lambdify(args, expr, modules='math')
        self._arg_names = tuple(str(s) for s in args)

    def defined(self, values: Mapping[str, float]) -> bool:
        return all(name in values for name in self._arg_names)

    def __call__(self, values: Mapping[str, float]):
        return self._func(*(values[name] for name in self._arg_names))

    def __repr__(self):
        return f'CompiledExpression({self.text!r})'


@dataclass
class SubRow:
    guard: List[CompiledExpression]
    final_state: str
    zeeman: Tuple[int, ...] = ()
    duration: Optional[CompiledExpression] = None
    cycling: bool = False


@dataclass
class CaseRow:
    label: str
    guard: List[CompiledExpression]
    duration: CompiledExpression
    reach: Tuple[int, ...]
    final_state: Optional[str] = None
    zeeman: Tuple[int, ...] = ()
    printed_duration: Optional[CompiledExpression] = None
    outcomes: List[SubRow] = field(default_factory=list)
    fallback: Optional[str] = None


@dataclass
class CaseMatch:
    """The leaf a parameter point falls into"""
    table: str
    row: CaseRow
    final_state: str
    zeeman: Tuple[int, ...]
    duration: Optional[float]
    printed_duration: Optional[float]
    sub_row: Optional[int] = None


def guard_holds(guard: Sequence[CompiledExpression], values: Mapping[str, float]) -> bool:
    """Conjunction of strict conditions; an undefined symbol makes it false"""
    for condition in guard:
        if not condition.defined(values):
            return False
        try:
            if not bool(condition(values)):
                return False
        except ZeroDivisionError:
            return False
    return True


class CaseTable:
    """All outcome trees of one data file"""

    def __init__(self, data: Mapping[str, Any], source: str = '<memory>'):
        self.source = source
        try:
            self.version = int(data.get('version', 1))
            names = data['symbols']
            tables = data['tables']
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise InvalidSpecFile(f'{source}: malformed case table ({e})')
        self.symbols = [sp.Symbol(name, real=True) for name in names]
        self.tables: Dict[str, List[CaseRow]] = {}
        self.descriptions: Dict[str, str] = {}
        for name, table in tables.items():
            self.tables[name] = self._build_table(name, table)
            self.descriptions[name] = table.get('description', '')
        logger.debug(f'Loaded case tables {sorted(self.tables)} from {source}')

    @classmethod
    def load(cls, path: str) -> 'CaseTable':
        if not os.path.exists(path):
            raise InvalidSpecFile(f'Case table not found: {path}')
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise InvalidSpecFile(f'Error parsing case table {path}: {e}') from e
        if data is None:
            raise InvalidSpecFile(f'Case table {path} is empty')
        return cls(data, source=path)

    @classmethod
    def load_default(cls) -> 'CaseTable':
        return cls.load(Config.get_case_table_path())

    def _build_table(self, name: str, table: Mapping[str, Any]) -> List[CaseRow]:
        namespace: Dict[str, Any] = {str(s): s for s in self.symbols}
        namespace['Abs'] = sp.Abs
        for key, text in (table.get('definitions') or {}).items():
            namespace[key] = sp.sympify(str(text), locals=namespace)
        for key, text in (table.get('conditions') or {}).items():
            namespace[key] = sp.sympify(str(text), locals=namespace)

        def compile_(text) -> CompiledExpression:
            try:
                expr = sp.sympify(str(text), locals=namespace)
            except (sp.SympifyError, SyntaxError, TypeError) as e:
                raise InvalidSpecFile(f'{self.source}: cannot parse {text!r} in table {name}: {e}')
            return CompiledExpression(str(text), expr, self.symbols)

        rows = []
        for entry in table.get('cases', []):
            label = entry['label']
            final_state = entry.get('final_state')
            outcomes = []
            for sub in entry.get('outcomes', []) or []:
                self._check_state(name, label, sub['final_state'])
                has_duration = 'duration' in sub
                outcomes.append(SubRow(
                    guard=[compile_(g) for g in sub['guard']],
                    final_state=sub['final_state'],
                    zeeman=tuple(sub.get('zeeman', ())),
                    duration=compile_(sub['duration']) if has_duration and sub['duration'] is not None else None,
                    cycling=has_duration and sub['duration'] is None,
                ))
            if final_state is None and not outcomes:
                raise InvalidSpecFile(f'{self.source}: case {name}/{label} has neither final_state nor outcomes')
            if final_state is not None:
                self._check_state(name, label, final_state)
            printed = entry.get('printed_duration')
            rows.append(CaseRow(
                label=label,
                guard=[compile_(g) for g in entry['guard']],
                duration=compile_(entry['duration']),
                reach=tuple(entry.get('reach', ())),
                final_state=final_state,
                zeeman=tuple(entry.get('zeeman', ())),
                printed_duration=compile_(printed) if printed is not None else None,
                outcomes=outcomes,
                fallback=entry.get('fallback'),
            ))
        return rows

    def _check_state(self, table: str, label: str, state: str) -> None:
        if state not in FINAL_STATES:
            raise InvalidSpecFile(f'{self.source}: case {table}/{label} has unknown final state {state!r}')

    def rows(self, table: str) -> List[CaseRow]:
        try:
            return self.tables[table]
        except KeyError:
            raise UnhandledCase(f'No case table named {table!r}')

    def match(self, table: str, values: Mapping[str, float]) -> CaseMatch:
        """
        First case whose guard holds, resolved to a final state.

        The final state is CLASSIFY when an unmatched sub-row defers to the
        deterministic classification.

        Raises:
            UnhandledCase: If no case (or no sub-row without fallback) matches
        """
        for row in self.rows(table):
            if not guard_holds(row.guard, values):
                continue
            duration = _evaluate(row.duration, values)
            printed = None
            if row.printed_duration is not None and row.printed_duration.defined(values):
                printed = _evaluate(row.printed_duration, values)
            if not row.outcomes:
                return CaseMatch(table, row, row.final_state, row.zeeman, duration, printed)
            for index, sub in enumerate(row.outcomes):
                if guard_holds(sub.guard, values):
                    sub_duration = duration
                    if sub.cycling:
                        sub_duration = None
                    elif sub.duration is not None:
                        sub_duration = _evaluate(sub.duration, values)
                    return CaseMatch(table, row, sub.final_state, sub.zeeman, sub_duration,
                                     None if sub.cycling else printed, sub_row=index)
            if row.fallback == CLASSIFY:
                return CaseMatch(table, row, CLASSIFY, (), duration, printed)
            raise UnhandledCase(f'Case {table}/{row.label} matched but none of its outcomes did')
        raise UnhandledCase(f'No case of {table} matches the sign pattern')


def _evaluate(expression: CompiledExpression, values: Mapping[str, float]) -> float:
    if not expression.defined(values):
        raise UnhandledCase(f'{expression.text} needs an undefined fitness')
    return float(expression(values))


case_table = CaseTable.load_default()
