"""Statistical certification from count data.

Confidence intervals use Hoeffding's tail inequality, which needs no
assumption on the outcome distributions. The arrow-of-time check is a
likelihood-ratio test of the factorized (setting-history conditional)
model against unconstrained per-sequence multinomials, with the degrees of
freedom given by the exact number of independent AoT constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2, norm

from . import polytope
from .simulator import (
    CorrelationTable,
    Scenario,
    Witness,
    decode_index,
    encode_sequence,
)


@dataclass(frozen=True, eq=False)
class CountsTable:
    """Shot counts per (setting sequence, outcome sequence), plus the number
    of validation-rejected shots per setting sequence.

    Rejected shots are excluded from the counts and from the per-sequence
    totals; they only enter the reported discard rate.
    """

    scenario: Scenario
    counts: np.ndarray
    discarded: np.ndarray | None = None

    def __post_init__(self) -> None:
        shape = (self.scenario.num_setting_sequences, self.scenario.num_outcome_sequences)
        arr = np.asarray(self.counts)
        if arr.shape != shape:
            raise ValueError(f"counts must have shape {shape}, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("counts must be integers")
        if arr.min() < 0:
            raise ValueError("counts must be non-negative")
        arr = arr.astype(np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        disc = self.discarded
        disc = np.zeros(shape[0], dtype=np.int64) if disc is None else np.asarray(disc)
        if disc.shape != (shape[0],) or not np.issubdtype(disc.dtype, np.integer):
            raise ValueError("discarded must be one integer per setting sequence")
        if disc.min() < 0:
            raise ValueError("discarded counts must be non-negative")
        disc = disc.astype(np.int64)
        disc.setflags(write=False)
        object.__setattr__(self, "discarded", disc)

    @property
    def repetitions(self) -> np.ndarray:
        """Recorded shots per setting sequence."""
        return self.counts.sum(axis=1)


@dataclass(frozen=True)
class ConfidenceSpec:
    """Two-sided confidence level for the Hoeffding interval."""

    confidence: float = 0.68

    def __post_init__(self) -> None:
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")


def frequencies(counts: CountsTable) -> CorrelationTable:
    """Empirical frequencies; every setting sequence needs at least one shot."""
    n = counts.repetitions
    if n.min() == 0:
        bad = decode_index(int(np.argmin(n)), counts.scenario.settings, counts.scenario.length)
        raise ValueError(f"setting sequence {bad} has zero repetitions")
    return CorrelationTable(
        scenario=counts.scenario, probs=counts.counts / n[:, None]
    )


def hoeffding_halfwidth(
    witness: Witness,
    repetitions: CountsTable | int | Mapping[tuple[int, ...], int],
    spec: ConfidenceSpec = ConfidenceSpec(),
) -> float:
    """Hoeffding half-width ``t`` of the two-sided confidence interval for a
    witness value estimated from frequencies.

    Solves ``2 exp(-2 t^2 / sum_x 1/n_x) = 1 - confidence`` in closed form,
    where the sum runs over the witness's setting sequences. Valid only for
    0/1 coefficients, for which the witness is a mean of bounded variables.
    """
    for _settings, _outcomes, coeff in witness.terms:
        if coeff not in (0.0, 1.0):
            raise ValueError(
                "Hoeffding half-width requires 0/1 witness coefficients; "
                f"got {coeff} (rescale the witness or derive a custom bound)"
            )
    inv_sum = 0.0
    for settings in witness.setting_sequences:
        n = _repetitions_for(repetitions, settings, witness.scenario)
        if n <= 0:
            raise ValueError(f"setting sequence {settings} has zero repetitions")
        inv_sum += 1.0 / (2.0 * n)
    return math.sqrt(-math.log((1.0 - spec.confidence) / 2.0) * inv_sum)


def _repetitions_for(
    repetitions: CountsTable | int | Mapping[tuple[int, ...], int],
    settings: tuple[int, ...],
    scenario: Scenario,
) -> int:
    if isinstance(repetitions, CountsTable):
        return int(repetitions.repetitions[encode_sequence(settings, scenario.settings)])
    if isinstance(repetitions, int):
        return repetitions
    return int(repetitions[settings])


@dataclass(frozen=True)
class QutritFraction:
    """Minimal frequency of higher-dimensional use explaining a value.

    ``below_bound`` marks values under the qubit bound, whose fraction
    clamps to zero.
    """

    fraction: float
    below_bound: bool


def qutrit_fraction(value: float, qubit_bound: float, algebraic_max: float) -> QutritFraction:
    """Affine interpolation ``(value - C) / (A - C)`` between the qubit
    bound ``C`` and the algebraic maximum ``A``, clamped to [0, 1]."""
    if algebraic_max <= qubit_bound:
        raise ValueError("algebraic maximum must exceed the qubit bound")
    raw = (value - qubit_bound) / (algebraic_max - qubit_bound)
    return QutritFraction(fraction=min(1.0, max(0.0, raw)), below_bound=raw < 0.0)


# ---------------------------------------------------------------------------
# Arrow-of-time likelihood-ratio test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AotTestResult:
    statistic: float
    dof: int
    p_value: float
    sigma_equivalent: float


def _prefix_counts(counts: CountsTable) -> tuple[list[dict], list[dict]]:
    """Pooled context counts for the factorized model's conditionals.

    At depth ``t``, the conditional for the step-``t`` outcome is estimated
    in the context of the settings chosen up to and including step ``t``
    and the outcomes seen before it, pooling over everything later; this
    pooling is the exact maximum-likelihood fit of the AoT model. Returns
    ``(numerators, denominators)`` keyed by those two prefix shapes.
    """
    sc = counts.scenario
    num: list[dict[tuple, int]] = [dict() for _ in range(sc.length + 1)]
    den: list[dict[tuple, int]] = [dict() for _ in range(sc.length + 1)]
    for x_idx in range(sc.num_setting_sequences):
        x_seq = decode_index(x_idx, sc.settings, sc.length)
        for a_idx in range(sc.num_outcome_sequences):
            n = int(counts.counts[x_idx, a_idx])
            if n == 0:
                continue
            a_seq = decode_index(a_idx, sc.outcomes, sc.length)
            for t in range(1, sc.length + 1):
                key = (x_seq[:t], a_seq[:t])
                num[t][key] = num[t].get(key, 0) + n
                ctx = (x_seq[:t], a_seq[: t - 1])
                den[t][ctx] = den[t].get(ctx, 0) + n
    return num, den


def null_model_table(counts: CountsTable) -> CorrelationTable:
    """The AoT-factorized maximum-likelihood table for the observed counts.

    Conditionals whose context never occurred in the data are unidentified
    (the likelihood does not depend on them); they are completed uniformly
    so the table is a proper distribution.
    """
    sc = counts.scenario
    num, den = _prefix_counts(counts)
    probs = np.zeros((sc.num_setting_sequences, sc.num_outcome_sequences))
    for x_idx in range(sc.num_setting_sequences):
        x_seq = decode_index(x_idx, sc.settings, sc.length)
        for a_idx in range(sc.num_outcome_sequences):
            a_seq = decode_index(a_idx, sc.outcomes, sc.length)
            prob = 1.0
            for t in range(1, sc.length + 1):
                context = den[t].get((x_seq[:t], a_seq[: t - 1]), 0)
                if context == 0:
                    prob /= sc.outcomes
                else:
                    prob *= num[t].get((x_seq[:t], a_seq[:t]), 0) / context
            probs[x_idx, a_idx] = prob
    return CorrelationTable(scenario=sc, probs=probs)


def _aot_statistic(counts: CountsTable) -> float:
    sc = counts.scenario
    n_per_seq = counts.repetitions
    log_alt = 0.0
    for x_idx in range(sc.num_setting_sequences):
        n_x = n_per_seq[x_idx]
        for a_idx in range(sc.num_outcome_sequences):
            k = int(counts.counts[x_idx, a_idx])
            if k:
                log_alt += k * math.log(k / n_x)
    num, den = _prefix_counts(counts)
    log_null = 0.0
    for t in range(1, sc.length + 1):
        for (x_prefix, a_prefix), pooled in num[t].items():
            context = den[t][(x_prefix, a_prefix[:-1])]
            log_null += pooled * math.log(pooled / context)
    return max(0.0, 2.0 * (log_alt - log_null))


def aot_lr_test(counts: CountsTable) -> AotTestResult:
    """Wilks likelihood-ratio test of the AoT constraints.

    The statistic compares unconstrained per-sequence multinomial fits with
    the pooled factorized fit; its null distribution is chi-square with as
    many degrees of freedom as there are independent AoT constraints. The
    sigma equivalent is the two-sided standard-normal quantile of the
    p-value.
    """
    if counts.repetitions.min() == 0:
        raise ValueError("every setting sequence needs at least one shot")
    dof = polytope.independent_constraint_count(counts.scenario)
    if dof == 0:
        raise ValueError("scenario has no AoT constraints to test")
    statistic = _aot_statistic(counts)
    p_value = float(chi2.sf(statistic, dof))
    return AotTestResult(
        statistic=statistic,
        dof=dof,
        p_value=p_value,
        sigma_equivalent=_sigma_equivalent(p_value),
    )


def _sigma_equivalent(p_value: float) -> float:
    if p_value <= 0.0:
        return math.inf
    return float(norm.isf(min(1.0, p_value) / 2.0))


@dataclass(frozen=True)
class AotMonteCarloResult:
    """LR test with a Monte Carlo calibration of the p-value under the
    fitted null model."""

    asymptotic: AotTestResult
    replications: int
    seed: int
    p_value: float
    sigma_equivalent: float


def aot_lr_test_montecarlo(
    counts: CountsTable, replications: int, seed: int
) -> AotMonteCarloResult:
    asymptotic = aot_lr_test(counts)
    if replications < 1:
        raise ValueError("need at least one replication")
    null_table = null_model_table(counts)
    rng = np.random.default_rng(seed)
    n_per_seq = counts.repetitions
    exceed = 0
    for _ in range(replications):
        sampled = sample_counts(null_table, n_per_seq, rng)
        if _aot_statistic(sampled) >= asymptotic.statistic - 1e-12:
            exceed += 1
    p_value = (1 + exceed) / (replications + 1)
    return AotMonteCarloResult(
        asymptotic=asymptotic,
        replications=replications,
        seed=seed,
        p_value=p_value,
        sigma_equivalent=_sigma_equivalent(p_value),
    )


def sample_counts(
    table: CorrelationTable,
    repetitions: int | Sequence[int] | np.ndarray,
    rng: np.random.Generator | int,
    discarded: Sequence[int] | None = None,
) -> CountsTable:
    """Draw multinomial shot counts from a correlation table, one draw per
    setting sequence."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    sc = table.scenario
    reps = np.broadcast_to(
        np.asarray(repetitions, dtype=np.int64), (sc.num_setting_sequences,)
    )
    counts = np.zeros((sc.num_setting_sequences, sc.num_outcome_sequences), dtype=np.int64)
    for x_idx in range(sc.num_setting_sequences):
        row = table.probs[x_idx]
        counts[x_idx] = rng.multinomial(int(reps[x_idx]), row / row.sum())
    disc = None if discarded is None else np.asarray(discarded, dtype=np.int64)
    return CountsTable(scenario=sc, counts=counts, discarded=disc)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificationReport:
    """Everything needed to state a dimension verdict from counts.

    ``certified`` holds exactly when the lower confidence end
    ``value - halfwidth`` exceeds the qubit bound.
    """

    witness_id: str
    value: float
    halfwidth: float
    confidence: float
    qubit_bound: float
    algebraic_max: float
    violation_ratio: float
    fraction: float
    fraction_halfwidth: float
    below_bound: bool
    certified: bool
    total_shots: int
    total_discarded: int

    @property
    def discard_rate(self) -> float:
        attempted = self.total_shots + self.total_discarded
        return self.total_discarded / attempted if attempted else 0.0


def certify(
    witness: Witness,
    counts: CountsTable,
    spec: ConfidenceSpec = ConfidenceSpec(),
) -> CertificationReport:
    """Assemble the full certification report for a witness and counts."""
    if witness.qubit_bound is None or witness.algebraic_max is None:
        raise ValueError(f"witness {witness.id!r} carries no dimension bounds")
    if witness.scenario != counts.scenario:
        raise ValueError("witness and counts scenarios do not match")
    table = frequencies(counts)
    value = 0.0
    for settings, outcomes, coeff in witness.terms:
        value += coeff * table.prob(settings, outcomes)
    halfwidth = hoeffding_halfwidth(witness, counts, spec)
    frac = qutrit_fraction(value, witness.qubit_bound, witness.algebraic_max)
    span = witness.algebraic_max - witness.qubit_bound
    return CertificationReport(
        witness_id=witness.id,
        value=value,
        halfwidth=halfwidth,
        confidence=spec.confidence,
        qubit_bound=witness.qubit_bound,
        algebraic_max=witness.algebraic_max,
        violation_ratio=value / witness.qubit_bound,
        fraction=frac.fraction,
        fraction_halfwidth=halfwidth / span,
        below_bound=frac.below_bound,
        certified=value - halfwidth > witness.qubit_bound,
        total_shots=int(counts.repetitions.sum()),
        total_discarded=int(counts.discarded.sum()),
    )
