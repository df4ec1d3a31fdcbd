"""Command-line front end.

Every subcommand builds a JSON report ``{schema_version, command, inputs,
results, timing_ms}``.  Exit codes: 0 success, 2 protocol abort, 3
correctness failure, 64 usage error, 65 bad input file.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from qpsi import hqpsi, nqpsi
from qpsi.adversary import EveStrategy, curious_calvin_inference, run_attack_trials
from qpsi.errors import ElementNotInUniverse
from qpsi.harness import (
    Completed,
    ForcedInputs,
    Hop,
    SessionConfig,
    SetPolicy,
    classical_oracle,
    export_transcript,
    run_monte_carlo,
    run_session,
)
from qpsi.hqpsi import CompareMode, UniversalSet
from qpsi.qubit import (
    GATE_TOL,
    HADAMARD,
    IDENTITY,
    apply,
    canonical_state,
    h_power,
    h_power_spectral,
    hadamard_eigensystem,
    inner,
    parse_labels,
)
from qpsi.rng import SeededRng

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_ABORTED = 2
EXIT_FAILED = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "command", "inputs", "results", "timing_ms"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["run", "demo-example", "verify-gates", "vuln-nqpsi", "attack", "monte-carlo"]},
        "inputs": {"type": "object"},
        "results": {"type": "object"},
        "timing_ms": {"type": "integer", "minimum": 0},
    },
}

CONFIG_KEYS = (
    "universe", "set_a", "set_b", "decoys_per_hop", "compare_mode",
    "max_retries", "exponent_bound", "seed",
)

# worked example: sets, Calvin's preparation and Alice/Bob randomness
EXAMPLE_UNIVERSE = (2, 5, 7, 9, 13, 17, 20, 35)
EXAMPLE_SET_A = frozenset({5, 7, 17, 20})
EXAMPLE_SET_B = frozenset({7, 13, 17, 35})
EXAMPLE_PREP = "101+00-++01+-0-1"
EXAMPLE_R_A = (3, 6, 4, 2, 4, 1, 9, 7, 3, 6, 4, 2, 4, 1, 9, 7)
EXAMPLE_R_B = (7, 9, 8, 5, 4, 2, 3, 6, 7, 9, 8, 5, 4, 2, 3, 6)
EXAMPLE_FLAGS_A = (1, 1, 0, 0, 1, 0, 0, 1)
EXAMPLE_EQUAL_FIRST = [1, 3, 4, 6]
EXAMPLE_UNEQUAL_SECOND = [10, 11, 14]
EXAMPLE_ANNOUNCED = [3, 6]
EXAMPLE_INTERSECTION = [7, 17]


class UsageError(Exception):
    pass


class InputFileError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- input parsing ------------------------------------------------------------------

def parse_int_list(text: str, what: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated integers, got {text!r}") from None


def _looks_like_csv(text: str) -> bool:
    return all(ch.isdigit() or ch in ", -;" for ch in text.strip())


def read_universe(value: str) -> tuple[int, ...]:
    """Comma-separated integers, or a path to a one-element-per-line file."""
    if _looks_like_csv(value) and not Path(value).is_file():
        items = parse_int_list(value, "--universe")
    else:
        path = Path(value)
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise InputFileError(f"cannot read universe file {value}: {exc}") from None
        items = []
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                items.append(int(line))
            except ValueError:
                raise InputFileError(f"{value}:{lineno}: not an integer: {line!r}") from None
        if not items:
            raise InputFileError(f"{value}: universe file is empty")
        if len(set(items)) != len(items) or any(x < 0 for x in items):
            raise InputFileError(f"{value}: universe must hold distinct non-negative integers")
    return tuple(items)


def load_config_file(path: str) -> dict:
    """JSON object or flat ``key=value`` lines using SessionConfig field names."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFileError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InputFileError(f"{path}: JSON config must be an object")
    except json.JSONDecodeError:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InputFileError(f"{path}:{lineno}: expected key=value")
            data[key.strip()] = value.strip()
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise InputFileError(f"{path}: unknown keys {sorted(unknown)}")
    out = {}
    try:
        for key, value in data.items():
            if key in ("universe", "set_a", "set_b"):
                if isinstance(value, str):
                    value = parse_int_list(value, key)
                out[key] = [int(x) for x in value]
            elif key == "compare_mode":
                out[key] = str(value)
            else:
                out[key] = int(value)
    except (UsageError, ValueError, TypeError) as exc:
        raise InputFileError(f"{path}: bad value: {exc}") from None
    return out


def resolve_seed(flag_value) -> int:
    if flag_value is not None:
        seed = flag_value
    else:
        env = os.environ.get("QPSI_SEED")
        if env is None or not env.strip():
            return 0
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"QPSI_SEED must be an integer, got {env!r}") from None
    if not 0 <= seed < 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    return seed


# -- reports ------------------------------------------------------------------------

def make_report(command: str, inputs: dict, results: dict, timing_ms: int = 0) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "results": results,
        "timing_ms": int(timing_ms),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _table(headers, rows) -> str:
    cols = [list(map(str, c)) for c in zip(headers, *rows)] if rows else [[h] for h in headers]
    widths = [max(len(x) for x in col) for col in cols]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    rule = "  ".join("-" * w for w in widths)
    lines = [fmt.format(*map(str, headers)), rule]
    lines += [fmt.format(*map(str, r)) for r in rows]
    return "\n".join(lines)


def _fmt_set(values) -> str:
    return "{" + ",".join(str(x) for x in sorted(values)) + "}"


def _three_sigma(p: float, n: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / n) if n else 0.0


# -- subcommands ----------------------------------------------------------------------

def _session_config(args) -> SessionConfig:
    base = load_config_file(args.config) if args.config else {}
    if args.universe is not None:
        base["universe"] = list(read_universe(args.universe))
    if args.set_a is not None:
        base["set_a"] = parse_int_list(args.set_a, "--set-a")
    if args.set_b is not None:
        base["set_b"] = parse_int_list(args.set_b, "--set-b")
    if args.decoys is not None:
        base["decoys_per_hop"] = args.decoys
    if args.retries is not None:
        base["max_retries"] = args.retries
    if args.exponent_bound is not None:
        base["exponent_bound"] = args.exponent_bound
    if args.mode is not None:
        base["compare_mode"] = "exact" if args.mode == "exact" else f"sampled:{args.reps}"
    elif args.reps != 1 and "compare_mode" not in base:
        base["compare_mode"] = f"sampled:{args.reps}"
    if args.seed is not None or "seed" not in base:
        base["seed"] = resolve_seed(args.seed)
    if "universe" not in base:
        raise UsageError("--universe is required (flag or config file)")
    base.setdefault("set_a", [])
    base.setdefault("set_b", [])
    try:
        return SessionConfig(**base)
    except ElementNotInUniverse as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args):
    cfg = _session_config(args)
    eve = None
    if args.eve:
        try:
            eve = {Hop.parse(args.eve_hop): EveStrategy.parse(args.eve)}
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    outcome = run_session(cfg, eve=eve)
    transcript = export_transcript(cfg, outcome, verbose=args.verbose_transcript)
    results = {"outcome": transcript["outcome"], "transcript": transcript}
    if isinstance(outcome, Completed):
        results["intersection"] = sorted(outcome.intersection)
        code = EXIT_OK
    else:
        results["intersection"] = None
        code = EXIT_ABORTED
    summary = [
        f"status        {transcript['outcome']['status']}",
        f"intersection  {_fmt_set(outcome.intersection) if isinstance(outcome, Completed) else '-'}",
        f"attempts      {outcome.attempts}",
        f"messages      {len(transcript['steps'])}",
        f"session_id    {transcript['session_id']}",
    ]
    if not isinstance(outcome, Completed):
        summary.append(f"aborted at    step {outcome.step}: {outcome.reason}")
    inputs = cfg.to_dict()
    if eve:
        inputs["eve"] = {hop.value: strategy.name for hop, strategy in eve.items()}
    return make_report("run", inputs, results), "\n".join(summary), code


def example_forced() -> ForcedInputs:
    return ForcedInputs(tuple(parse_labels(EXAMPLE_PREP)), EXAMPLE_R_A, EXAMPLE_R_B, EXAMPLE_FLAGS_A)


def run_worked_example():
    cfg = SessionConfig(EXAMPLE_UNIVERSE, EXAMPLE_SET_A, EXAMPLE_SET_B,
                        decoys_per_hop=0, compare_mode=CompareMode.exact(), max_retries=0)
    return cfg, run_session(cfg, forced=example_forced())


def cmd_demo_example(args):
    cfg, outcome = run_worked_example()
    n = len(EXAMPLE_UNIVERSE)
    u = UniversalSet(EXAMPLE_UNIVERSE)
    code_a = hqpsi.encode_set(u, EXAMPLE_SET_A)
    code_b = hqpsi.encode_set(u, EXAMPLE_SET_B)
    flags_b = hqpsi.derive_flag_B(EXAMPLE_FLAGS_A)
    exps_a = hqpsi.party_exponents(code_a, EXAMPLE_R_A, EXAMPLE_FLAGS_A)
    exps_b = hqpsi.party_exponents(code_b, EXAMPLE_R_B, flags_b)
    labels = parse_labels(EXAMPLE_PREP)
    if not isinstance(outcome, Completed):
        results = {"error": "worked example aborted", "outcome": outcome.reason}
        return make_report("demo-example", {}, results), "worked example aborted", EXIT_FAILED

    verdicts = outcome.calvin_verdicts
    rows = []
    positions = []
    for i in range(2 * n):
        total = exps_a[i] + exps_b[i]
        rows.append([i + 1, labels[i].value, exps_a[i].numerator, exps_b[i].numerator,
                     total.numerator, "=" if verdicts[i] else "!="])
        positions.append({
            "position": i + 1,
            "prep": labels[i].value,
            "alice_numerator": exps_a[i].numerator,
            "bob_numerator": exps_b[i].numerator,
            "equal": verdicts[i],
        })
    equal_first = [i + 1 for i in range(n) if verdicts[i]]
    unequal_second = [i + 1 for i in range(n, 2 * n) if not verdicts[i]]
    announced = outcome.announcement.sorted()
    intersection = sorted(outcome.intersection)
    inference = curious_calvin_inference(verdicts[:n], outcome.announcement)
    checks = {
        "equal_first_register": equal_first == EXAMPLE_EQUAL_FIRST,
        "unequal_second_register": unequal_second == EXAMPLE_UNEQUAL_SECOND,
        "announcement": announced == EXAMPLE_ANNOUNCED,
        "intersection": intersection == EXAMPLE_INTERSECTION,
    }
    results = {
        "code_a": list(code_a),
        "code_b": list(code_b),
        "flags_a": list(EXAMPLE_FLAGS_A),
        "flags_b": list(flags_b),
        "positions": positions,
        "equal_first_register": equal_first,
        "unequal_second_register": unequal_second,
        "announcement": announced,
        "intersection": intersection,
        "calvin_inference": {str(i): k.value for i, k in sorted(inference.knowledge.items())},
        "checks": checks,
        "matches_reference": all(checks.values()),
    }
    text = _table(["pos", "P_C", "alice k", "bob k", "sum k", "P''?P"], rows)
    text += (f"\n\nfirst register equal at    {equal_first}"
             f"\nsecond register unequal at {unequal_second}"
             f"\nannounced positions        {announced}"
             f"\nS_in                       {_fmt_set(intersection)}"
             f"\nmatches reference values   {'yes' if results['matches_reference'] else 'NO'}")
    inputs = {
        "universe": list(EXAMPLE_UNIVERSE),
        "set_a": sorted(EXAMPLE_SET_A),
        "set_b": sorted(EXAMPLE_SET_B),
        "prep": EXAMPLE_PREP,
        "r_a": list(EXAMPLE_R_A),
        "r_b": list(EXAMPLE_R_B),
        "flags_a": list(EXAMPLE_FLAGS_A),
    }
    return make_report("demo-example", inputs, results), text, EXIT_OK if all(checks.values()) else EXIT_FAILED


def gate_residuals() -> dict:
    v_plus, v_minus = hadamard_eigensystem()
    h = HADAMARD.as_array()
    vp, vm = v_plus.as_array(), v_minus.as_array()
    parity_vs_spectral = max(
        h_power_spectral(k).distance(h_power(k)) for k in range(-12, 13)
    )
    return {
        "H^(4/3)-I": h_power_spectral(4).distance(IDENTITY),
        "H^(5/3)-H": h_power_spectral(5).distance(HADAMARD),
        "H^2-I": h_power_spectral(6).distance(IDENTITY),
        "H*H-I": (HADAMARD @ HADAMARD).distance(IDENTITY),
        "spectral(H)-H": h_power_spectral(3).distance(HADAMARD),
        "H v+ - v+": float(np.linalg.norm(h @ vp - vp)),
        "H v- + v-": float(np.linalg.norm(h @ vm + vm)),
        "<v+|v->": abs(inner(v_plus, v_minus)),
        "|v+|-1": abs(float(np.linalg.norm(vp)) - 1.0),
        "|v-|-1": abs(float(np.linalg.norm(vm)) - 1.0),
        "spectral-vs-parity": parity_vs_spectral,
    }


def gate_composition_rows() -> list[dict]:
    """Composed first-register operator for each pair of code bits."""
    rows = []
    for case, (ca, cb) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)], start=1):
        total = (ca + 2) + (cb + 2)
        gate = h_power_spectral(total)
        expect = IDENTITY if ca == cb else HADAMARD
        second = sorted({(ha * ca + (ha ^ 1) * cb + 4) % 2 for ha in (0, 1)})
        rows.append({
            "case": case,
            "c_a": ca,
            "c_b": cb,
            "first_register": "I" if ca == cb else "H",
            "first_register_residual": gate.distance(expect),
            "second_register_outcomes": ["I" if s == 0 else "H" for s in second],
        })
    return rows


def cmd_verify_gates(args):
    residuals = gate_residuals()
    ok = all(v <= GATE_TOL for v in residuals.values())
    principal = h_power_spectral(4, branch="principal").distance(IDENTITY)
    rows = gate_composition_rows()
    ok = ok and all(r["first_register_residual"] <= GATE_TOL for r in rows)
    results = {
        "tolerance": GATE_TOL,
        "residuals": residuals,
        "parity_shortcut_identical": residuals["spectral-vs-parity"] <= GATE_TOL,
        "principal_branch_H^(4/3)-I": principal,
        "compositions": rows,
        "passed": ok,
    }
    text = _table(["identity", "residual"], [[k, f"{v:.3e}"] for k, v in residuals.items()])
    text += "\n\n" + _table(
        ["case", "c_A", "c_B", "i<=n", "n<i<=2n"],
        [[r["case"], r["c_a"], r["c_b"], r["first_register"], "/".join(r["second_register_outcomes"])]
         for r in rows],
    )
    text += f"\n\nprincipal branch |H^(4/3)-I| = {principal:.3e} (not used)"
    text += f"\nall residuals <= {GATE_TOL:g}: {'yes' if ok else 'NO'}"
    return make_report("verify-gates", {"tolerance": GATE_TOL}, results), text, EXIT_OK if ok else EXIT_FAILED


def nqpsi_instance(S_A, S_B, universe, rng) -> dict:
    u = UniversalSet(tuple(universe))
    verdict, _ = nqpsi.nqpsi_run(S_A, S_B, u, rng)
    c_a = hqpsi.encode_set(u, S_A)
    c_b = hqpsi.encode_set(u, S_B)
    alice = nqpsi.leakage_attack(verdict, c_a, u)
    bob = nqpsi.leakage_attack(verdict, c_b, u)
    s_a, s_b = frozenset(S_A), frozenset(S_B)
    return {
        "universe": list(u.elements),
        "set_a": sorted(s_a),
        "set_b": sorted(s_b),
        "signs": [s.value for s in verdict.signs],
        "alice_infers": sorted(alice),
        "bob_infers": sorted(bob),
        "alice_correct": alice == s_b - s_a,
        "bob_correct": bob == s_a - s_b,
    }


def cmd_vuln_nqpsi(args):
    seed = resolve_seed(args.seed)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    rng = SeededRng(seed)
    example = nqpsi_instance(EXAMPLE_SET_A, EXAMPLE_SET_B, EXAMPLE_UNIVERSE, rng.child("example"))
    policy = SetPolicy(max_n=16)
    exact = 0
    failures = []
    for t in range(args.trials):
        trng = rng.child("trial", t)
        universe, a, b = policy.sample(trng.child("sets"))
        inst = nqpsi_instance(a, b, universe, trng.child("run"))
        if inst["alice_correct"] and inst["bob_correct"]:
            exact += 1
        else:
            failures.append(inst)
    ok = example["alice_correct"] and example["bob_correct"] and not failures
    results = {
        "example": example,
        "trials": args.trials,
        "exact_inferences": exact,
        "failures": failures,
        "privacy_broken": ok,
    }
    c_a = hqpsi.encode_set(UniversalSet(EXAMPLE_UNIVERSE), EXAMPLE_SET_A)
    c_b = hqpsi.encode_set(UniversalSet(EXAMPLE_UNIVERSE), EXAMPLE_SET_B)
    rows = [[x, a, b, "p_C" if s == "+" else "-p_C"]
            for x, a, b, s in zip(EXAMPLE_UNIVERSE, c_a, c_b, example["signs"])]
    text = _table(["x_i", "c_A", "c_B", "p_C'"], rows)
    text += (f"\n\nAlice infers S_B - S_A = {_fmt_set(example['alice_infers'])}"
             f"\nBob infers   S_A - S_B = {_fmt_set(example['bob_infers'])}"
             f"\nrandom trials with exact inference: {exact}/{args.trials}")
    return make_report("vuln-nqpsi", {"seed": seed, "trials": args.trials}, results), text, \
        EXIT_OK if ok else EXIT_FAILED


def cmd_attack(args):
    seed = resolve_seed(args.seed)
    try:
        hop = Hop.parse(args.hop)
    except ValueError:
        raise UsageError(f"unknown hop {args.hop!r}; use calvin-alice, alice-bob or bob-calvin") from None
    try:
        strategy = EveStrategy.parse(args.strategy)
        if args.fraction is not None:
            strategy = replace(strategy, intercept_fraction=args.fraction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.decoys < 0:
        raise UsageError("--decoys must be >= 0")
    cfg = SessionConfig(EXAMPLE_UNIVERSE, EXAMPLE_SET_A, EXAMPLE_SET_B,
                        decoys_per_hop=args.decoys, max_retries=0, seed=seed)
    report = run_attack_trials(cfg, strategy, hop, args.trials, SeededRng(seed), workers=args.workers)
    results = report.to_dict()
    band = _three_sigma(report.theoretical_rate, report.trials)
    results["three_sigma"] = band
    results["within_three_sigma"] = abs(report.empirical_rate - report.theoretical_rate) <= band
    inputs = {"hop": hop.value, "strategy": strategy.name, "decoys": args.decoys,
              "trials": args.trials, "seed": seed, "fraction": strategy.intercept_fraction}
    text = _table(
        ["hop", "strategy", "l", "trials", "detected", "empirical", "theory", "95% CI"],
        [[hop.value, strategy.name, args.decoys, report.trials, report.detections,
          f"{report.empirical_rate:.4f}", f"{report.theoretical_rate:.4f}",
          f"[{report.ci_low:.4f}, {report.ci_high:.4f}]"]],
    )
    return make_report("attack", inputs, results), text, EXIT_OK


def cmd_monte_carlo(args):
    seed = resolve_seed(args.seed)
    if args.trials < 1 or args.max_n < 1 or args.reps < 1 or args.decoys < 0:
        raise UsageError("--trials, --max-n and --reps must be >= 1; --decoys >= 0")
    mode = CompareMode.exact() if args.mode == "exact" else CompareMode.sampled(args.reps)
    policy = SetPolicy(max_n=args.max_n, element_bound=max(1000, args.max_n))
    base = SessionConfig((0,), (), (), decoys_per_hop=args.decoys, compare_mode=mode)
    summary = run_monte_carlo(base, args.trials, policy, SeededRng(seed), workers=args.workers)
    results = summary.to_dict(timing=args.timing)
    code = EXIT_OK
    if mode.kind == "exact":
        code = EXIT_OK if summary.matches == summary.trials else EXIT_FAILED
    else:
        predicted = 2.0 ** -args.reps
        m = summary.intersection_elements
        rate = summary.false_negatives / m if m else 0.0
        band = _three_sigma(predicted, m)
        results["sampled"] = {
            "predicted_false_negative_rate": predicted,
            "false_negative_rate": rate,
            "three_sigma": band,
            "within_three_sigma": abs(rate - predicted) <= band,
            "agree_false_positives": summary.agree_false_positives,
        }
    inputs = {"trials": args.trials, "max_n": args.max_n, "mode": str(mode),
              "decoys": args.decoys, "seed": seed}
    text = (f"trials       {summary.trials}\nmatches      {summary.matches}/{summary.trials}"
            f"\naborted      {summary.aborted}\nmismatches   {len(summary.mismatches)}")
    if mode.kind == "sampled":
        s = results["sampled"]
        text += (f"\nfalse-negative rate {s['false_negative_rate']:.5f} "
                 f"(predicted {s['predicted_false_negative_rate']:.5f} +/- {s['three_sigma']:.5f})"
                 f"\nfalse positives where c_A=c_B: {summary.agree_false_positives}")
    for m in summary.mismatches[:5] if mode.kind == "exact" else []:
        text += f"\n  mismatch trial {m['trial']} seed {m['seed']}"
    return make_report("monte-carlo", inputs, results, summary.elapsed_s * 1000 if args.timing else 0), \
        text, code


COMMANDS = {
    "run": cmd_run,
    "demo-example": cmd_demo_example,
    "verify-gates": cmd_verify_gates,
    "vuln-nqpsi": cmd_vuln_nqpsi,
    "attack": cmd_attack,
    "monte-carlo": cmd_monte_carlo,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the JSON report here (human table goes to stdout)")
    common.add_argument("--format", choices=["json", "table"], default="json",
                        help="stdout format when --out is not given")
    common.add_argument("--timing", action="store_true", help="fill timing_ms (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="qpsi", description="H-gate quantum private set intersection simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="run one protocol session")
    p.add_argument("--config", help="JSON or key=value file with SessionConfig fields")
    p.add_argument("--universe", help="comma-separated integers or a one-per-line file")
    p.add_argument("--set-a")
    p.add_argument("--set-b")
    p.add_argument("--decoys", type=int)
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--retries", type=int)
    p.add_argument("--exponent-bound", type=int)
    p.add_argument("--verbose-transcript", action="store_true", help="embed full payloads")
    p.add_argument("--eve", help="put an eavesdropper strategy on --eve-hop")
    p.add_argument("--eve-hop", default="calvin-alice")

    sub.add_parser("demo-example", parents=[common], help="replay the reference worked example")
    sub.add_parser("verify-gates", parents=[common], help="check fractional H identities")

    p = sub.add_parser("vuln-nqpsi", parents=[common], help="demonstrate the QFT protocol leak")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("attack", parents=[common], help="intercept-resend detection statistics")
    p.add_argument("--hop", default="calvin-alice")
    p.add_argument("--strategy", default="intercept")
    p.add_argument("--fraction", type=float)
    p.add_argument("--decoys", type=int, default=hqpsi.DEFAULT_DECOYS)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("monte-carlo", parents=[common], help="oracle-equivalence trials")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-n", type=int, default=16)
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--decoys", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    stdout = sys.stdout
    try:
        args = build_parser().parse_args(argv)
        started = time.perf_counter()
        report, text, code = COMMANDS[args.command](args)
        if args.timing and not report["timing_ms"]:
            report["timing_ms"] = int((time.perf_counter() - started) * 1000)
    except UsageError as exc:
        print(f"qpsi: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputFileError as exc:
        print(f"qpsi: input error: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    body = dumps_report(report)
    if args.out:
        Path(args.out).write_text(body)
        stdout.write(text + "\n")
    elif args.format == "table":
        stdout.write(text + "\n")
    else:
        stdout.write(body)
    return code


if __name__ == "__main__":
    sys.exit(main())
