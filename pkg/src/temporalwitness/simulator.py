"""Exact sequential-measurement correlation tables and witness functionals.

Tables are dense arrays indexed by integer encodings of setting and outcome
sequences (first time step = most significant digit), which is simplest and
exact for the short sequences this library targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .protocols import BRIGHT, OUTCOME_LABELS, Protocol
from .qcore import apply_map

TABLE_GUARD = 10**7

# History of completed steps, as (setting, true outcome index) pairs.
History = tuple[tuple[int, int], ...]
DetectionResolver = Callable[[History, int, int], str]


class GuardExceeded(RuntimeError):
    """A requested enumeration or table would exceed the size guard."""


def encode_sequence(seq: Sequence[int], base: int) -> int:
    idx = 0
    for digit in seq:
        if not 0 <= digit < base:
            raise ValueError(f"digit {digit} out of range for base {base}")
        idx = idx * base + digit
    return idx


def decode_index(idx: int, base: int, length: int) -> tuple[int, ...]:
    digits = []
    for _ in range(length):
        idx, rem = divmod(idx, base)
        digits.append(rem)
    if idx:
        raise ValueError("index out of range for the given base and length")
    return tuple(reversed(digits))


@dataclass(frozen=True)
class Scenario:
    """Sequence length, number of settings and number of outcomes per step."""

    length: int
    settings: int
    outcomes: int

    def __post_init__(self) -> None:
        if self.length < 1 or self.settings < 1 or self.outcomes < 2:
            raise ValueError("need length >= 1, settings >= 1, outcomes >= 2")
        if self.num_setting_sequences * self.num_outcome_sequences > TABLE_GUARD:
            raise GuardExceeded(
                f"table of {self.num_setting_sequences} x "
                f"{self.num_outcome_sequences} entries exceeds the guard"
            )

    @property
    def num_setting_sequences(self) -> int:
        return self.settings**self.length

    @property
    def num_outcome_sequences(self) -> int:
        return self.outcomes**self.length


def format_setting_sequence(seq: Sequence[int]) -> str:
    return "".join(str(x) for x in seq)


def parse_setting_sequence(text: str, scenario: Scenario) -> tuple[int, ...]:
    seq = tuple(int(ch) for ch in text)
    if len(seq) != scenario.length or any(not 0 <= x < scenario.settings for x in seq):
        raise ValueError(f"bad setting sequence {text!r} for {scenario}")
    return seq


def format_outcome_sequence(seq: Sequence[int], scenario: Scenario) -> str:
    if scenario.outcomes == 2:
        return "".join(OUTCOME_LABELS[a] for a in seq)
    return "".join(str(a) for a in seq)


def parse_outcome_sequence(text: str, scenario: Scenario) -> tuple[int, ...]:
    if scenario.outcomes == 2:
        try:
            seq = tuple(OUTCOME_LABELS.index(ch) for ch in text)
        except ValueError:
            raise ValueError(f"bad outcome sequence {text!r}") from None
    else:
        seq = tuple(int(ch) for ch in text)
    if len(seq) != scenario.length or any(not 0 <= a < scenario.outcomes for a in seq):
        raise ValueError(f"bad outcome sequence {text!r} for {scenario}")
    return seq


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """Probabilities ``p(outcome sequence | setting sequence)``.

    ``probs[i, j]`` is the probability of the outcome sequence encoded by
    ``j`` given the setting sequence encoded by ``i``. Rows are normalized;
    entries within tolerance of [0, 1] are clamped onto it.
    """

    scenario: Scenario
    probs: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.scenario.num_setting_sequences, self.scenario.num_outcome_sequences)
        arr = np.asarray(self.probs, dtype=float)
        if arr.shape != expected:
            raise ValueError(f"probs must have shape {expected}, got {arr.shape}")
        if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
            raise ValueError("probabilities outside [0, 1] beyond tolerance")
        row_sums = arr.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-9:
            raise ValueError("each setting sequence's outcome probabilities must sum to 1")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def prob(self, settings: Sequence[int], outcomes: Sequence[int]) -> float:
        i = encode_sequence(settings, self.scenario.settings)
        j = encode_sequence(outcomes, self.scenario.outcomes)
        return float(self.probs[i, j])


@dataclass(frozen=True, eq=False)
class Witness:
    """A linear functional on correlation tables: a sum of selected entries.

    ``qubit_bound`` is the maximum over all sequences of two-outcome qubit
    instruments (with arbitrary transformations between steps);
    ``algebraic_max`` is the maximum over the whole temporal polytope.
    """

    id: str
    scenario: Scenario
    terms: tuple[tuple[tuple[int, ...], tuple[int, ...], float], ...]
    qubit_bound: float | None = None
    algebraic_max: float | None = None

    def __post_init__(self) -> None:
        for settings, outcomes, _coeff in self.terms:
            if len(settings) != self.scenario.length or len(outcomes) != self.scenario.length:
                raise ValueError("witness term length does not match the scenario")
            if any(not 0 <= x < self.scenario.settings for x in settings):
                raise ValueError("witness term uses an unknown setting")
            if any(not 0 <= a < self.scenario.outcomes for a in outcomes):
                raise ValueError("witness term uses an unknown outcome")

    @property
    def setting_sequences(self) -> tuple[tuple[int, ...], ...]:
        """The distinct setting sequences appearing in the terms, in order."""
        seen: dict[tuple[int, ...], None] = {}
        for settings, _, _ in self.terms:
            seen.setdefault(settings)
        return tuple(seen)


def _witness_from_strings(wid: str, term_strings: Sequence[str],
                          qubit_bound: float, algebraic_max: float) -> Witness:
    length = len(term_strings[0].split("|")[0])
    scenario = Scenario(length=length, settings=2, outcomes=2)
    terms = []
    for spec in term_strings:
        outcome_part, _, setting_part = spec.partition("|")
        terms.append(
            (
                parse_setting_sequence(setting_part, scenario),
                parse_outcome_sequence(outcome_part, scenario),
                1.0,
            )
        )
    return Witness(
        id=wid,
        scenario=scenario,
        terms=tuple(terms),
        qubit_bound=qubit_bound,
        algebraic_max=algebraic_max,
    )


# Registry of the built-in witnesses. Qubit bounds: 3 for the first two,
# about 3.186 for the other two length-2 quantities, about 5.226 for the
# three-step quantity; the algebraic maxima are 4 and 8.
WITNESSES: dict[str, Witness] = {
    "B1": _witness_from_strings("B1", ("++|00", "++|11", "+-|01", "+-|10"), 3.0, 4.0),
    "B2": _witness_from_strings("B2", ("+-|00", "+-|11", "++|01", "++|10"), 3.0, 4.0),
    "B3": _witness_from_strings("B3", ("+-|00", "++|11", "+-|01", "+-|10"), 3.186, 4.0),
    "B4": _witness_from_strings("B4", ("+-|00", "+-|11", "+-|01", "++|10"), 3.186, 4.0),
    "T": _witness_from_strings(
        "T",
        ("+++|000", "++-|001", "+--|010", "+-+|011",
         "+-+|100", "+--|101", "++-|110", "+++|111"),
        5.226,
        8.0,
    ),
}


def get_witness(witness_id: str) -> Witness:
    try:
        return WITNESSES[witness_id]
    except KeyError:
        raise KeyError(f"unknown witness {witness_id!r}") from None


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def sequence_probabilities(protocol: Protocol, length: int) -> CorrelationTable:
    """Exact table of ``p(a_1..a_L | x_1..x_L)`` for a protocol.

    Each entry is the trace of the corresponding composition of instrument
    branches applied to the initial state; rows are normalized because the
    instruments are trace-preserving.
    """
    m = protocol.num_settings
    d = len(protocol.outcomes)
    scenario = Scenario(length=length, settings=m, outcomes=d)
    probs = np.zeros((scenario.num_setting_sequences, scenario.num_outcome_sequences))
    labels = protocol.outcomes

    def descend(depth: int, x_idx: int, a_idx: int, rho: np.ndarray) -> None:
        if depth == length:
            probs[x_idx, a_idx] = float(rho.trace().real)
            return
        for x in range(m):
            instr = protocol.instruments[x]
            for a, label in enumerate(labels):
                branch = apply_map(instr.maps[label], rho)
                if branch.trace().real > 1e-15:
                    descend(depth + 1, x_idx * m + x, a_idx * d + a, branch)
        return

    descend(0, 0, 0, np.asarray(protocol.initial_state.mat))
    return CorrelationTable(scenario=scenario, probs=probs)


@dataclass(frozen=True)
class ReadoutNoise:
    """Classical readout fidelities of the binary fluorescence detection."""

    p_bright_correct: float = 0.96
    p_dark_correct: float = 0.98

    def __post_init__(self) -> None:
        for name in ("p_bright_correct", "p_dark_correct"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name}={val} outside [0, 1]")

    def record_prob(self, kind: str, flipped: bool) -> float:
        correct = self.p_bright_correct if kind == BRIGHT else self.p_dark_correct
        return 1.0 - correct if flipped else correct


def protocol_detection_resolver(protocol: Protocol) -> DetectionResolver:
    """Resolver mapping each measurement branch to its fluorescence kind,
    derived from the protocol's pulse provenance."""
    kinds = protocol.detection_kinds
    if kinds is None:
        raise ValueError("protocol carries no detection-kind information")
    labels = protocol.outcomes

    def resolver(history: History, setting: int, outcome: int) -> str:
        return kinds[(setting, labels[outcome])]

    return resolver


def apply_readout_noise(
    table: CorrelationTable,
    resolver: DetectionResolver,
    noise: ReadoutNoise,
) -> CorrelationTable:
    """Mix a table through per-step binary readout confusion.

    The quantum branch follows the true outcome; only the recorded symbol
    flips, with an error rate set by the branch's detection kind. The
    result stays normalized because each confusion column sums to one.
    """
    scenario = table.scenario
    if scenario.outcomes != 2:
        raise ValueError("readout noise is defined for binary outcomes only")
    length, m, d = scenario.length, scenario.settings, scenario.outcomes
    noisy = np.zeros_like(table.probs)
    for x_idx in range(scenario.num_setting_sequences):
        x_seq = decode_index(x_idx, m, length)
        for a_idx in range(scenario.num_outcome_sequences):
            p = table.probs[x_idx, a_idx]
            if p == 0.0:
                continue
            a_seq = decode_index(a_idx, d, length)
            kinds = [
                resolver(tuple(zip(x_seq[:t], a_seq[:t])), x_seq[t], a_seq[t])
                for t in range(length)
            ]
            for r_idx in range(scenario.num_outcome_sequences):
                r_seq = decode_index(r_idx, d, length)
                factor = p
                for t in range(length):
                    factor *= noise.record_prob(kinds[t], r_seq[t] != a_seq[t])
                noisy[x_idx, r_idx] += factor
    return CorrelationTable(scenario=scenario, probs=noisy)


def evaluate_witness(witness: Witness, table: CorrelationTable) -> float:
    """The witness value: the coefficient-weighted sum of table entries."""
    if witness.scenario != table.scenario:
        raise ValueError(
            f"witness scenario {witness.scenario} does not match table {table.scenario}"
        )
    total = 0.0
    for settings, outcomes, coeff in witness.terms:
        total += coeff * table.prob(settings, outcomes)
    return total


# ---------------------------------------------------------------------------
# Table serialization
# ---------------------------------------------------------------------------

def format_correlation_table(table: CorrelationTable) -> str:
    sc = table.scenario
    lines = [
        "correlation-table v1",
        f"length: {sc.length}",
        f"settings: {sc.settings}",
        f"outcomes: {sc.outcomes}",
    ]
    for x_idx in range(sc.num_setting_sequences):
        x_txt = format_setting_sequence(decode_index(x_idx, sc.settings, sc.length))
        for a_idx in range(sc.num_outcome_sequences):
            a_txt = format_outcome_sequence(decode_index(a_idx, sc.outcomes, sc.length), sc)
            lines.append(f"{x_txt} {a_txt} {table.probs[x_idx, a_idx]:.12g}")
    return "\n".join(lines) + "\n"


def parse_correlation_table(text: str) -> CorrelationTable:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "correlation-table v1":
        raise ValueError("table file must start with 'correlation-table v1'")
    header: dict[str, int] = {}
    body_start = 1
    for ln in lines[1:]:
        key, sep, rest = ln.partition(":")
        if not sep or key.strip() not in ("length", "settings", "outcomes"):
            break
        header[key.strip()] = int(rest.strip())
        body_start += 1
    if set(header) != {"length", "settings", "outcomes"}:
        raise ValueError("table file must declare length, settings and outcomes")
    scenario = Scenario(header["length"], header["settings"], header["outcomes"])
    probs = np.zeros((scenario.num_setting_sequences, scenario.num_outcome_sequences))
    seen = np.zeros(probs.shape, dtype=bool)
    for ln in lines[body_start:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed table row: {ln!r}")
        x_seq = parse_setting_sequence(parts[0], scenario)
        a_seq = parse_outcome_sequence(parts[1], scenario)
        i = encode_sequence(x_seq, scenario.settings)
        j = encode_sequence(a_seq, scenario.outcomes)
        if seen[i, j]:
            raise ValueError(f"duplicate table row for {parts[0]} {parts[1]}")
        seen[i, j] = True
        probs[i, j] = float(parts[2])
    if not seen.all():
        raise ValueError("table file is missing rows")
    return CorrelationTable(scenario=scenario, probs=probs)
