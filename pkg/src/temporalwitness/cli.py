"""Command-line interface: simulate protocols, compute bounds, enumerate
the polytope, and certify dimension from count files.

Exit codes: 0 on success, 2 on invalid input, 3 when a size guard trips.
Every command is deterministic given its inputs and seed; machine-readable
reports embed both.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, bounds, polytope, protocols, simulator, stats
from .simulator import (
    CorrelationTable,
    GuardExceeded,
    Scenario,
    decode_index,
    encode_sequence,
    format_outcome_sequence,
    format_setting_sequence,
    parse_outcome_sequence,
    parse_setting_sequence,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GUARD = 3


# ---------------------------------------------------------------------------
# Counts files
# ---------------------------------------------------------------------------

def format_counts_file(
    counts: stats.CountsTable, witness_id: str | None = None
) -> str:
    sc = counts.scenario
    lines = [
        "counts v1",
        f"length: {sc.length}",
        f"settings: {sc.settings}",
        f"outcomes: {sc.outcomes}",
    ]
    if witness_id is not None:
        lines.append(f"witness: {witness_id}")
    for x_idx in range(sc.num_setting_sequences):
        x_seq = decode_index(x_idx, sc.settings, sc.length)
        lines.append("")
        lines.append(f"sequence: {format_setting_sequence(x_seq)}")
        lines.append(f"n: {int(counts.repetitions[x_idx])}")
        lines.append(f"discarded: {int(counts.discarded[x_idx])}")
        for a_idx in range(sc.num_outcome_sequences):
            a_seq = decode_index(a_idx, sc.outcomes, sc.length)
            lines.append(
                f"{format_outcome_sequence(a_seq, sc)} {int(counts.counts[x_idx, a_idx])}"
            )
    return "\n".join(lines) + "\n"


def parse_counts_file(text: str) -> tuple[stats.CountsTable, str | None]:
    """Parse a counts file; returns the table and the optional witness id.

    The format is strict: unknown keys are rejected, every setting sequence
    must appear exactly once, and each record's outcome counts must sum to
    its declared ``n``.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "counts v1":
        raise ValueError("counts file must start with 'counts v1'")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("sequence:"):
        key, sep, rest = lines[pos].partition(":")
        key = key.strip()
        if not sep or key not in ("length", "settings", "outcomes", "witness"):
            raise ValueError(f"unknown counts-file key {key!r}")
        header[key] = rest.strip()
        pos += 1
    try:
        scenario = Scenario(
            int(header["length"]), int(header["settings"]), int(header["outcomes"])
        )
    except KeyError as exc:
        raise ValueError(f"counts file is missing the {exc.args[0]!r} header") from None
    witness_id = header.get("witness")

    counts = np.zeros(
        (scenario.num_setting_sequences, scenario.num_outcome_sequences), dtype=np.int64
    )
    discarded = np.zeros(scenario.num_setting_sequences, dtype=np.int64)
    seen: set[int] = set()
    while pos < len(lines):
        key, sep, rest = lines[pos].partition(":")
        if key.strip() != "sequence" or not sep:
            raise ValueError(f"expected a 'sequence:' record, got {lines[pos]!r}")
        x_seq = parse_setting_sequence(rest.strip(), scenario)
        x_idx = encode_sequence(x_seq, scenario.settings)
        if x_idx in seen:
            raise ValueError(f"duplicate record for sequence {rest.strip()!r}")
        seen.add(x_idx)
        pos += 1
        declared_n: int | None = None
        while pos < len(lines) and not lines[pos].startswith("sequence:"):
            ln = lines[pos]
            key, sep, rest = ln.partition(":")
            if sep and key.strip() == "n":
                declared_n = int(rest.strip())
            elif sep and key.strip() == "discarded":
                discarded[x_idx] = int(rest.strip())
            else:
                parts = ln.split()
                if len(parts) != 2:
                    raise ValueError(f"malformed counts line {ln!r}")
                a_seq = parse_outcome_sequence(parts[0], scenario)
                counts[x_idx, encode_sequence(a_seq, scenario.outcomes)] = int(parts[1])
            pos += 1
        if declared_n is None:
            raise ValueError(f"record {format_setting_sequence(x_seq)!r} is missing 'n'")
        if counts[x_idx].sum() != declared_n:
            raise ValueError(
                f"counts for sequence {format_setting_sequence(x_seq)!r} sum to "
                f"{int(counts[x_idx].sum())}, expected n={declared_n}"
            )
    if len(seen) != scenario.num_setting_sequences:
        raise ValueError("counts file does not cover every setting sequence")
    return stats.CountsTable(scenario=scenario, counts=counts, discarded=discarded), witness_id


# ---------------------------------------------------------------------------
# Report documents
# ---------------------------------------------------------------------------

def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _emit(args: argparse.Namespace, text_lines: list[str], machine: dict) -> None:
    if args.format == "machine":
        machine = {"tool": "temporalwitness", "version": __version__, **machine}
        print(json.dumps(machine, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _table_rows(table: CorrelationTable) -> list[dict]:
    sc = table.scenario
    rows = []
    for x_idx in range(sc.num_setting_sequences):
        x_txt = format_setting_sequence(decode_index(x_idx, sc.settings, sc.length))
        for a_idx in range(sc.num_outcome_sequences):
            a_txt = format_outcome_sequence(decode_index(a_idx, sc.outcomes, sc.length), sc)
            rows.append(
                {"settings": x_txt, "outcomes": a_txt, "p": table.probs[x_idx, a_idx]}
            )
    return rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_simulate(args: argparse.Namespace) -> int:
    witness = simulator.get_witness(args.witness) if args.witness else None
    if args.protocol is not None:
        spec = protocols.parse_protocol_spec(Path(args.protocol).read_text())
        protocol = spec.build()
    else:
        if witness is None:
            raise ValueError("give a witness id or a --protocol file")
        protocol = protocols.optimal_protocol(witness.id)
    length = args.length or (witness.scenario.length if witness else None)
    if length is None:
        raise ValueError("--length is required when no witness sets it")
    table = simulator.sequence_probabilities(protocol, length)
    if args.noise is not None:
        noise = simulator.ReadoutNoise(*args.noise)
        resolver = simulator.protocol_detection_resolver(protocol)
        table = simulator.apply_readout_noise(table, resolver, noise)
    value = simulator.evaluate_witness(witness, table) if witness else None

    text = [simulator.format_correlation_table(table).rstrip("\n")]
    machine: dict = {"command": "simulate", "length": length, "rows": _table_rows(table)}
    if args.noise is not None:
        machine["noise"] = {"bright": args.noise[0], "dark": args.noise[1]}
    if value is not None:
        text.append(f"witness {witness.id} value: {value:.6f}")
        machine["witness"] = witness.id
        machine["value"] = value
    _emit(args, text, machine)
    return EXIT_OK


def _cmd_bound(args: argparse.Namespace) -> int:
    witness = simulator.get_witness(args.witness)
    if args.method == "closed":
        if witness.id != "T":
            raise ValueError("the closed form covers only the three-step witness T")
        result = bounds.optimize_tee_bound(grid_resolution=args.grid_resolution)
    else:
        result = bounds.optimize_qubit_bound(
            witness,
            restarts=args.restarts,
            seed=args.seed,
            grid_resolution=max(4, min(args.grid_resolution, 10)),
        )
    text = [
        f"witness: {witness.id}",
        f"method: {result.method}",
        f"qubit bound: {result.value:.6f}",
        f"evaluations: {result.evaluations}",
    ]
    if result.params is not None:
        text.append(
            f"argmax: p={result.params.p:.4f} q={result.params.q:.4f} "
            f"cos_gamma={result.params.cos_gamma:.4f}"
        )
    if result.effect_params is not None:
        a0, b0, a1, b1, cg = result.effect_params
        text.append(
            f"effects: a0={a0:.4f} b0={b0:.4f} a1={a1:.4f} b1={b1:.4f} cos_gamma={cg:.4f}"
        )
    if result.seed is not None:
        text.append(f"seed: {result.seed}")
    machine = {
        "command": "bound",
        "witness": witness.id,
        "method": result.method,
        "value": result.value,
        "evaluations": result.evaluations,
        "restarts": result.restarts,
        "seed": result.seed,
        "effect_params": result.effect_params,
        "params": asdict(result.params) if result.params else None,
    }
    _emit(args, text, machine)
    return EXIT_OK


def _format_strategy(strategy: polytope.DeterministicStrategy) -> str:
    sc = strategy.scenario
    parts = []
    for t, table in enumerate(strategy.moves):
        assignments = []
        for prefix_idx, outcome in enumerate(table):
            prefix = decode_index(prefix_idx, sc.settings, t + 1)
            assignments.append(
                f"{format_setting_sequence(prefix)}->"
                f"{format_outcome_sequence((outcome,), Scenario(1, sc.settings, sc.outcomes))}"
            )
        parts.append(f"f{t + 1}: " + " ".join(assignments))
    return "; ".join(parts)


def _cmd_polytope(args: argparse.Namespace) -> int:
    if args.witness is not None:
        witness = simulator.get_witness(args.witness)
        scenario = witness.scenario
    elif args.scenario is not None:
        witness = None
        scenario = Scenario(*args.scenario)
    else:
        raise ValueError("give a witness id or --scenario LENGTH SETTINGS OUTCOMES")
    n_strategies = polytope.num_deterministic_strategies(scenario)
    n_independent = polytope.independent_constraint_count(scenario)
    text = [
        f"scenario: length={scenario.length} settings={scenario.settings} "
        f"outcomes={scenario.outcomes}",
        f"deterministic strategies: {n_strategies}",
        f"independent AoT constraints: {n_independent}",
    ]
    machine = {
        "command": "polytope",
        "scenario": asdict(scenario),
        "strategies": n_strategies,
        "independent_constraints": n_independent,
    }
    if witness is not None:
        value, maximizers = polytope.algebraic_max(witness)
        text += [
            f"witness: {witness.id}",
            f"algebraic max: {value:g}",
            f"maximizers: {len(maximizers)}",
            f"first maximizer: {_format_strategy(maximizers[0])}",
        ]
        machine.update(
            witness=witness.id,
            algebraic_max=value,
            num_maximizers=len(maximizers),
            first_maximizer=[list(moves) for moves in maximizers[0].moves],
        )
    _emit(args, text, machine)
    return EXIT_OK


def _load_counts(args: argparse.Namespace) -> tuple[stats.CountsTable, str | None, str]:
    raw = Path(args.counts_file).read_text()
    counts, witness_id = parse_counts_file(raw)
    return counts, witness_id, _digest(raw)


def _cmd_certify(args: argparse.Namespace) -> int:
    counts, witness_id, digest = _load_counts(args)
    if args.witness:
        witness_id = args.witness
    if witness_id is None:
        raise ValueError("counts file names no witness; pass --witness")
    witness = simulator.get_witness(witness_id)
    report = stats.certify(witness, counts, stats.ConfidenceSpec(args.confidence))
    verdict = "dimension >= 3 certified" if report.certified else "not certified"
    text = [
        f"witness: {report.witness_id}",
        f"value: {report.value:.4f} +- {report.halfwidth:.4f} "
        f"({report.confidence:.0%} confidence)",
        f"qubit bound: {report.qubit_bound:g}",
        f"algebraic max: {report.algebraic_max:g}",
        f"violation ratio: {report.violation_ratio:.4f}",
        f"qutrit fraction: {report.fraction:.4f} +- {report.fraction_halfwidth:.4f}",
        f"shots: {report.total_shots} (discarded {report.total_discarded}, "
        f"rate {report.discard_rate:.4f})",
        f"verdict: {verdict}",
    ]
    machine = {
        "command": "certify",
        "input_sha256": digest,
        **asdict(report),
        "discard_rate": report.discard_rate,
        "verdict": verdict,
    }
    _emit(args, text, machine)
    return EXIT_OK


def _cmd_aot_test(args: argparse.Namespace) -> int:
    counts, _witness_id, digest = _load_counts(args)
    result = stats.aot_lr_test(counts)
    text = [
        f"statistic: {result.statistic:.6f}",
        f"dof: {result.dof}",
        f"p-value: {result.p_value:.6g}",
        f"sigma equivalent: {result.sigma_equivalent:.3f}",
    ]
    machine = {"command": "aot-test", "input_sha256": digest, **asdict(result)}
    if args.montecarlo:
        mc = stats.aot_lr_test_montecarlo(counts, args.montecarlo, args.seed)
        text += [
            f"monte-carlo p-value: {mc.p_value:.6g} "
            f"({mc.replications} replications, seed {mc.seed})",
            f"monte-carlo sigma equivalent: {mc.sigma_equivalent:.3f}",
        ]
        machine["montecarlo"] = {
            "replications": mc.replications,
            "seed": mc.seed,
            "p_value": mc.p_value,
            "sigma_equivalent": mc.sigma_equivalent,
        }
    _emit(args, text, machine)
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    witness = simulator.get_witness(args.witness)
    protocol = protocols.optimal_protocol(witness.id)
    table = simulator.sequence_probabilities(protocol, witness.scenario.length)
    if args.noise is not None:
        table = simulator.apply_readout_noise(
            table,
            simulator.protocol_detection_resolver(protocol),
            simulator.ReadoutNoise(*args.noise),
        )
    counts = stats.sample_counts(table, args.shots, args.seed)
    document = format_counts_file(counts, witness_id=witness.id)
    if args.output:
        Path(args.output).write_text(document)
        print(f"wrote {args.output}")
    else:
        print(document, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temporal-witness",
        description="Dimension certification from temporal correlations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--format", choices=("text", "machine"), default="text",
            help="text (default) or a machine-readable JSON report",
        )

    p = sub.add_parser("simulate", help="exact correlation table of a protocol")
    p.add_argument("witness", nargs="?", help="registry witness id (B1..B4, T)")
    p.add_argument("--protocol", help="protocol specification file")
    p.add_argument("--length", type=int, help="sequence length")
    p.add_argument(
        "--noise", nargs=2, type=float, metavar=("BRIGHT", "DARK"),
        help="readout fidelities for bright and dark detection",
    )
    add_format(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bound", help="qubit upper bound of a witness")
    p.add_argument("witness")
    p.add_argument("--method", choices=("closed", "generic"), default="generic")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=bounds.DEFAULT_SEED)
    p.add_argument(
        "--grid-resolution", type=int, default=40,
        help="grid points per axis (the 5-axis generic search caps this at 10)",
    )
    add_format(p)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("polytope", help="algebraic maximum and AoT structure")
    p.add_argument("witness", nargs="?")
    p.add_argument(
        "--scenario", nargs=3, type=int, metavar=("LENGTH", "SETTINGS", "OUTCOMES")
    )
    add_format(p)
    p.set_defaults(func=_cmd_polytope)

    p = sub.add_parser("certify", help="dimension certification from a counts file")
    p.add_argument("counts_file")
    p.add_argument("--witness", help="override the witness named in the file")
    p.add_argument("--confidence", type=float, default=0.68)
    add_format(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("aot-test", help="likelihood-ratio arrow-of-time test")
    p.add_argument("counts_file")
    p.add_argument(
        "--montecarlo", type=int, metavar="N",
        help="calibrate the p-value with N null-model replications",
    )
    p.add_argument("--seed", type=int, default=bounds.DEFAULT_SEED)
    add_format(p)
    p.set_defaults(func=_cmd_aot_test)

    p = sub.add_parser("sample", help="draw synthetic counts from a simulated table")
    p.add_argument("witness")
    p.add_argument("--shots", type=int, required=True, help="repetitions per sequence")
    p.add_argument("--seed", type=int, default=bounds.DEFAULT_SEED)
    p.add_argument(
        "--noise", nargs=2, type=float, metavar=("BRIGHT", "DARK"),
        help="apply readout noise before sampling",
    )
    p.add_argument("--output", help="write the counts file here instead of stdout")
    p.set_defaults(func=_cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
