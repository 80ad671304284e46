"""The temporal correlation polytope: arrow-of-time constraints and its
deterministic extreme points.

Arrow-of-time (AoT) constraints say that the marginal distribution of the
first ``k`` outcomes cannot depend on setting choices made after step
``k``. The vertices of the resulting polytope are deterministic strategies
assigning an outcome to every setting prefix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .simulator import (
    CorrelationTable,
    GuardExceeded,
    Scenario,
    Witness,
    decode_index,
    encode_sequence,
)

ENUMERATION_GUARD = 10**7


@dataclass(frozen=True)
class AoTConstraint:
    """One prefix-marginal equality between two future-setting completions.

    The constraint states that the probability of seeing ``outcome_prefix``
    under ``setting_prefix`` is the same whether the remaining settings are
    ``completion_a`` or ``completion_b``; its coefficient vector is +1 on
    the first group of table cells and -1 on the second.
    """

    prefix_len: int
    setting_prefix: tuple[int, ...]
    outcome_prefix: tuple[int, ...]
    completion_a: tuple[int, ...]
    completion_b: tuple[int, ...]
    independent: bool = False

    def cells(self, scenario: Scenario) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        """The (+1, -1) table cells of the coefficient vector."""
        tail = scenario.length - self.prefix_len
        x_a = encode_sequence(self.setting_prefix + self.completion_a, scenario.settings)
        x_b = encode_sequence(self.setting_prefix + self.completion_b, scenario.settings)
        plus, minus = [], []
        for suffix in itertools.product(range(scenario.outcomes), repeat=tail):
            a_idx = encode_sequence(self.outcome_prefix + tuple(suffix), scenario.outcomes)
            plus.append((x_a, a_idx))
            minus.append((x_b, a_idx))
        return plus, minus

    def evaluate(self, table: CorrelationTable) -> float:
        plus, minus = self.cells(table.scenario)
        return float(
            sum(table.probs[i, j] for i, j in plus)
            - sum(table.probs[i, j] for i, j in minus)
        )


def _integer_row_reduce(basis: list[list[int]], row: list[int]) -> list[int] | None:
    """Reduce ``row`` against a pivot basis using fraction-free elimination.

    Returns the reduced row (gcd-normalized) if it is independent of the
    basis, else None. The basis rows are kept in leading-pivot form; exact
    integer arithmetic avoids any tolerance question for these +-1 systems.
    """
    for pivot_row in basis:
        lead = next(k for k, v in enumerate(pivot_row) if v != 0)
        if row[lead] != 0:
            pv, rv = pivot_row[lead], row[lead]
            row = [pv * r - rv * p for r, p in zip(row, pivot_row)]
    if all(v == 0 for v in row):
        return None
    g = 0
    for v in row:
        g = math.gcd(g, abs(v))
    return [v // g for v in row]


def aot_constraints(scenario: Scenario) -> list[AoTConstraint]:
    """All prefix-marginal AoT equalities, with a maximal linearly
    independent subset flagged.

    Independence is counted modulo normalization (every setting sequence's
    outcomes summing to one), matching the number of equality constraints
    that cut the normalized table space down to the AoT polytope.
    """
    m, d, length = scenario.settings, scenario.outcomes, scenario.length
    ncols = scenario.num_setting_sequences * scenario.num_outcome_sequences

    def vector(plus: Sequence[tuple[int, int]], minus: Sequence[tuple[int, int]]) -> list[int]:
        row = [0] * ncols
        for i, j in plus:
            row[i * scenario.num_outcome_sequences + j] += 1
        for i, j in minus:
            row[i * scenario.num_outcome_sequences + j] -= 1
        return row

    basis: list[list[int]] = []
    for x_idx in range(scenario.num_setting_sequences):
        cells = [(x_idx, j) for j in range(scenario.num_outcome_sequences)]
        reduced = _integer_row_reduce(basis, vector(cells, []))
        if reduced is not None:
            basis.append(reduced)

    constraints: list[AoTConstraint] = []
    for k in range(1, length):
        for x_prefix in itertools.product(range(m), repeat=k):
            for a_prefix in itertools.product(range(d), repeat=k):
                completions = list(itertools.product(range(m), repeat=length - k))
                for comp_a, comp_b in itertools.combinations(completions, 2):
                    con = AoTConstraint(
                        prefix_len=k,
                        setting_prefix=x_prefix,
                        outcome_prefix=a_prefix,
                        completion_a=comp_a,
                        completion_b=comp_b,
                    )
                    plus, minus = con.cells(scenario)
                    reduced = _integer_row_reduce(basis, vector(plus, minus))
                    if reduced is not None:
                        basis.append(reduced)
                        con = AoTConstraint(
                            con.prefix_len,
                            con.setting_prefix,
                            con.outcome_prefix,
                            con.completion_a,
                            con.completion_b,
                            independent=True,
                        )
                    constraints.append(con)
    return constraints


def independent_constraint_count(scenario: Scenario) -> int:
    return sum(1 for con in aot_constraints(scenario) if con.independent)


def check_aot(table: CorrelationTable, tol: float = 1e-10) -> list[tuple[AoTConstraint, float]]:
    """Violated AoT constraints with their magnitudes; empty iff the table
    satisfies every constraint to within ``tol``."""
    violations = []
    for con in aot_constraints(table.scenario):
        value = con.evaluate(table)
        if abs(value) > tol:
            violations.append((con, value))
    return violations


# ---------------------------------------------------------------------------
# Deterministic strategies (extreme points)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeterministicStrategy:
    """An outcome assignment for every setting prefix.

    ``moves[t][i]`` is the outcome at step ``t+1`` when the settings so far
    encode to ``i``. Only settings enter: under determinism, past outcomes
    are themselves functions of past settings, so outcome-dependent
    strategies add nothing.
    """

    scenario: Scenario
    moves: tuple[tuple[int, ...], ...]

    def outcome_sequence(self, settings: Sequence[int]) -> tuple[int, ...]:
        out = []
        for t in range(len(settings)):
            prefix = encode_sequence(settings[: t + 1], self.scenario.settings)
            out.append(self.moves[t][prefix])
        return tuple(out)


def num_deterministic_strategies(scenario: Scenario) -> int:
    exponent = sum(scenario.settings**t for t in range(1, scenario.length + 1))
    return scenario.outcomes**exponent


def enumerate_deterministic_strategies(scenario: Scenario) -> Iterator[DeterministicStrategy]:
    """Yield every deterministic strategy exactly once, lexicographically
    (earlier steps and earlier setting prefixes vary slowest)."""
    if num_deterministic_strategies(scenario) > ENUMERATION_GUARD:
        raise GuardExceeded(
            f"{num_deterministic_strategies(scenario)} strategies exceed the guard"
        )
    per_step = [scenario.settings**t for t in range(1, scenario.length + 1)]
    tables = [
        itertools.product(range(scenario.outcomes), repeat=n_prefixes)
        for n_prefixes in per_step
    ]
    for combo in itertools.product(*tables):
        yield DeterministicStrategy(scenario=scenario, moves=tuple(combo))


def strategy_to_table(strategy: DeterministicStrategy) -> CorrelationTable:
    """The 0/1 correlation table of a strategy; satisfies AoT exactly."""
    sc = strategy.scenario
    probs = np.zeros((sc.num_setting_sequences, sc.num_outcome_sequences))
    for x_idx in range(sc.num_setting_sequences):
        x_seq = decode_index(x_idx, sc.settings, sc.length)
        a_seq = strategy.outcome_sequence(x_seq)
        probs[x_idx, encode_sequence(a_seq, sc.outcomes)] = 1.0
    return CorrelationTable(scenario=sc, probs=probs)


def algebraic_max(witness: Witness) -> tuple[float, list[DeterministicStrategy]]:
    """Exact maximum of a witness over all deterministic strategies,
    together with every maximizer (lexicographic order)."""
    best = -math.inf
    maximizers: list[DeterministicStrategy] = []
    m = witness.scenario.settings
    term_checks = [
        (
            tuple(
                (t, encode_sequence(settings[: t + 1], m), outcomes[t])
                for t in range(witness.scenario.length)
            ),
            coeff,
        )
        for settings, outcomes, coeff in witness.terms
    ]
    for strategy in enumerate_deterministic_strategies(witness.scenario):
        moves = strategy.moves
        value = 0.0
        for checks, coeff in term_checks:
            if all(moves[t][prefix] == outcome for t, prefix, outcome in checks):
                value += coeff
        if value > best + 1e-12:
            best = value
            maximizers = [strategy]
        elif abs(value - best) <= 1e-12:
            maximizers.append(strategy)
    return best, maximizers
