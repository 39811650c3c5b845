"""Command-line surface.

Subcommands: simulate (one path to CSV), converge (coupled strong-error
report), audit (assumption validation plus positivity audit), validate
(assumption report only).  All inputs come from a JSON config file;
--seed/--out/--format/--threads override the config.  Output files are
written atomically and are byte-identical for fixed inputs and seed,
regardless of thread count.

Exit codes: 0 success, 1 runtime/experiment failure, 2 configuration
error, 3 assumption-validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .analysis import coupled_strong_error, positivity_audit
from .coefficients import (
    initial_path_from_dict,
    scalar_field_from_dict,
    CoefficientField,
    validate_assumptions,
)
from .errors import (
    AssumptionValidationError,
    ConfigurationError,
    SddeError,
    UsageError,
)
from .levy import LevyComponentSpec, jump_law_from_dict, sample_jump_realization
from .scheme import Scenario, build_grid, exact_frozen_solution, path_to_csv_text, simulate

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

THREADS_ENV_VAR = "SDDE_LOGEM_THREADS"

_TOP_KEYS = {
    "scenario", "m", "coarse_m", "fine_m", "n_paths", "p", "q_list",
    "seed", "stream_index", "out", "format",
}
_SCENARIO_KEYS = {"d", "b", "T", "positivity_mode", "f", "g", "phi", "levy"}


@dataclass(frozen=True)
class RunConfig:
    """A validated scenario plus the command parameters from the config."""

    scenario: Scenario
    m: int | None = None
    coarse_m: tuple | None = None
    fine_m: int | None = None
    n_paths: int | None = None
    p: float = 2.0
    q_list: tuple = (2.0, 4.0)
    seed: int = 0
    stream_index: int = 0
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    check_oracle: bool = False


def _fail(path, message):
    raise ConfigurationError(f"{path}: {message}")


def _check_keys(doc, allowed, path):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        _fail(path, f"unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _number(doc, key, path, *, required=False, default=None, minimum=None,
            strict_min=None, integer=False):
    if key not in doc:
        if required:
            _fail(path, f"missing required key '{key}'")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        _fail(f"{path}.{key}", f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        _fail(f"{path}.{key}", "must be finite")
    if minimum is not None and value < minimum:
        _fail(f"{path}.{key}", f"must be >= {minimum}, got {value}")
    if strict_min is not None and value <= strict_min:
        _fail(f"{path}.{key}", f"must be > {strict_min}, got {value}")
    return int(value) if integer else float(value)


def _entry_grid(doc, key, d, path, builder):
    grid = doc.get(key)
    if not isinstance(grid, list) or len(grid) != d or any(
        not isinstance(row, list) or len(row) != d for row in grid
    ):
        _fail(f"{path}.{key}", f"expected a {d}x{d} array of descriptor objects")
    out = []
    for i, row in enumerate(grid):
        built = []
        for j, cell in enumerate(row):
            try:
                built.append(builder(cell))
            except ConfigurationError as exc:
                _fail(f"{path}.{key}[{i}][{j}]", str(exc))
        out.append(tuple(built))
    return tuple(out)


def _scenario_from_dict(doc, path="scenario"):
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    _check_keys(doc, _SCENARIO_KEYS, path)
    d = _number(doc, "d", path, required=True, integer=True, minimum=1)
    b = _number(doc, "b", path, required=True, strict_min=0.0)
    T = _number(doc, "T", path, required=True, strict_min=0.0)
    positivity = doc.get("positivity_mode", False)
    if not isinstance(positivity, bool):
        _fail(f"{path}.positivity_mode", f"expected a boolean, got {positivity!r}")

    f_entries = _entry_grid(doc, "f", d, path, scalar_field_from_dict)
    g_entries = _entry_grid(doc, "g", d, path, scalar_field_from_dict)

    phi_doc = doc.get("phi")
    if not isinstance(phi_doc, list) or len(phi_doc) != d:
        _fail(f"{path}.phi", f"expected an array of {d} descriptor objects")
    phi = []
    for i, cell in enumerate(phi_doc):
        try:
            phi.append(initial_path_from_dict(cell))
        except ConfigurationError as exc:
            _fail(f"{path}.phi[{i}]", str(exc))

    levy_doc = doc.get("levy")
    if not isinstance(levy_doc, list) or len(levy_doc) != d:
        _fail(f"{path}.levy", f"expected an array of {d} component specs")
    levy = []
    for j, cell in enumerate(levy_doc):
        if not isinstance(cell, dict):
            _fail(f"{path}.levy[{j}]", "expected an object with 'rate' and 'law'")
        _check_keys(cell, {"rate", "law"}, f"{path}.levy[{j}]")
        rate = _number(cell, "rate", f"{path}.levy[{j}]", required=True, minimum=0.0)
        try:
            law = jump_law_from_dict(cell.get("law"))
            levy.append(LevyComponentSpec(rate=rate, law=law))
        except ConfigurationError as exc:
            _fail(f"{path}.levy[{j}].law", str(exc))

    try:
        field = CoefficientField(d=d, f_entries=f_entries, g_entries=g_entries)
        return Scenario(d=d, b=b, T=T, field=field, phi=tuple(phi),
                        levy=tuple(levy), positivity_mode=positivity)
    except ConfigurationError as exc:
        _fail(path, str(exc))


def parse_config(source):
    """Parse and validate a config document (a JSON path or raw JSON text)."""
    text = source
    if not isinstance(source, str) or not source.lstrip().startswith("{"):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {source!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    if "scenario" not in doc:
        _fail("config", "missing required key 'scenario'")
    scenario = _scenario_from_dict(doc["scenario"])

    m = _number(doc, "m", "config", integer=True, minimum=1)
    fine_m = _number(doc, "fine_m", "config", integer=True, minimum=1)
    n_paths = _number(doc, "n_paths", "config", integer=True, minimum=1)
    p = _number(doc, "p", "config", default=2.0, minimum=2.0)
    seed = _number(doc, "seed", "config", integer=True, minimum=0, default=0)
    stream_index = _number(doc, "stream_index", "config", integer=True, minimum=0, default=0)

    coarse = doc.get("coarse_m")
    if coarse is not None:
        if not isinstance(coarse, list) or not coarse or any(
            isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in coarse
        ):
            _fail("config.coarse_m", "expected a non-empty array of positive integers")
        coarse = tuple(coarse)

    q_list = doc.get("q_list", [2.0, 4.0])
    if not isinstance(q_list, list) or not q_list or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) or v < 1.0 for v in q_list
    ):
        _fail("config.q_list", "expected a non-empty array of numbers >= 1")

    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        _fail("config.out", f"expected a string path, got {out!r}")
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        _fail("config.format", f"expected 'csv' or 'json', got {fmt!r}")

    # the delta < 1 grid requirement is checkable as soon as m is known
    for name, value in (("m", m), ("fine_m", fine_m)):
        if value is not None and scenario.b / value >= 1.0:
            _fail(f"config.{name}",
                  f"step size b/m = {scenario.b / value:.6g} violates the delta < 1 requirement")
    if coarse is not None:
        for v in coarse:
            if scenario.b / v >= 1.0:
                _fail("config.coarse_m",
                      f"step size b/{v} = {scenario.b / v:.6g} violates the delta < 1 requirement")

    return RunConfig(
        scenario=scenario,
        m=m,
        coarse_m=coarse,
        fine_m=fine_m,
        n_paths=n_paths,
        p=p,
        q_list=tuple(float(q) for q in q_list),
        seed=seed,
        stream_index=stream_index,
        out=out,
        format=fmt,
    )


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sdde-logem-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _require(config, attr, command):
    value = getattr(config, attr)
    if value is None:
        raise ConfigurationError(f"config.{attr} is required for '{command}'")
    return value


def cmd_simulate(config):
    """Simulate one path and write it as CSV; optionally check the oracle."""
    m = _require(config, "m", "simulate")
    scenario = config.scenario
    if scenario.positivity_mode:
        report = validate_assumptions(scenario, list(config.q_list))
        if not report.passed:
            raise AssumptionValidationError(
                "assumption validation failed: " + "; ".join(report.failures()),
                failures=report.failures(),
            )
    grid = build_grid(scenario.b, scenario.T, m)
    realization = sample_jump_realization(scenario.levy, scenario.T,
                                          config.seed, config.stream_index)
    path = simulate(scenario, grid, realization)
    out = config.out or "solution_path.csv"
    _atomic_write(out, path_to_csv_text(path))
    final = np.array2string(path.S[-1], precision=10)
    print(f"wrote {out}: {path.n_nodes} nodes x {path.d} components")
    print(f"final S = {final}, min S = {path.S.min():.10g}")
    if config.check_oracle:
        reference = exact_frozen_solution(scenario, realization, grid.times)
        rel = np.abs(path.S - reference) / np.maximum(np.abs(reference), 1e-300)
        worst = float(rel.max())
        print(f"max relative deviation from the closed-form reference: {worst:.3e}")
        if worst > 1e-12:
            print("oracle check FAILED (tolerance 1e-12)", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_converge(config):
    """Run the coupled strong-error experiment and write the report."""
    coarse = _require(config, "coarse_m", "converge")
    fine_m = _require(config, "fine_m", "converge")
    n_paths = _require(config, "n_paths", "converge")
    report = coupled_strong_error(
        config.scenario,
        fine_m=fine_m,
        coarse_m_list=list(coarse),
        p=config.p,
        n_paths=n_paths,
        seed=config.seed,
        threads=config.threads,
    )
    ext = "json" if config.format == "json" else "csv"
    out = config.out or f"convergence_report.{ext}"
    if config.format == "json":
        _atomic_write(out, _json_text(report.to_json_dict()))
    else:
        _atomic_write(out, report.to_csv_text())
    if report.exact:
        print(f"wrote {out}: all errors zero (exact)")
    else:
        print(f"wrote {out}: fitted slope = {report.slope:.4f}")
    return EXIT_OK


def cmd_audit(config):
    """Validate assumptions, then audit positivity over a path batch."""
    m = _require(config, "m", "audit")
    n_paths = _require(config, "n_paths", "audit")
    scenario = config.scenario
    report = validate_assumptions(scenario, list(config.q_list))
    if not report.passed:
        for failure in report.failures():
            print(f"validation failure: {failure}", file=sys.stderr)
        return EXIT_VALIDATION
    grid = build_grid(scenario.b, scenario.T, m)
    audit = positivity_audit(scenario, grid, n_paths, config.seed, threads=config.threads)
    out = config.out or "positivity_audit.json"
    doc = audit.to_json_dict()
    doc["jump_margin"] = report.jump_margin
    _atomic_write(out, _json_text(doc))
    print(f"wrote {out}: jump margin = {report.jump_margin:.6g}")
    print(
        f"paths = {audit.n_paths}, negative entries = {audit.negative_entries}, "
        f"breached paths = {audit.breached_paths}, min value = {audit.min_value}"
    )
    if audit.negative_entries == 0 and audit.breached_paths == 0:
        return EXIT_OK
    return EXIT_RUNTIME


def cmd_validate(config):
    """Run the assumption checks and print/write the report."""
    report = validate_assumptions(config.scenario, list(config.q_list))
    doc = report.to_json_dict()
    if config.out:
        _atomic_write(config.out, _json_text(doc))
        print(f"wrote {config.out}")
    print(f"jump margin = {report.jump_margin:.6g}, rho = {report.rho:.6g}")
    if report.passed:
        print("all assumption checks passed")
        return EXIT_OK
    for failure in report.failures():
        print(f"validation failure: {failure}", file=sys.stderr)
    return EXIT_VALIDATION


_COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "audit": cmd_audit,
    "validate": cmd_validate,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sdde-logem",
        description="Positivity-preserving logarithmic Euler-Maruyama simulator "
        "for jump-driven delay systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        cmd = sub.add_parser(name, help=fn.__doc__)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=None, help="output file path")
        cmd.add_argument("--format", choices=("csv", "json"), default=None)
        cmd.add_argument("--threads", type=int, default=None,
                         help=f"worker processes (default: ${THREADS_ENV_VAR} or CPU count)")
        if name == "simulate":
            cmd.add_argument("--stream-index", type=int, default=None)
            cmd.add_argument("--check-oracle", action="store_true",
                             help="compare against the constant-coefficient closed form")
    return parser


def _resolve_threads(flag_value):
    if flag_value is not None:
        value = flag_value
    else:
        env = os.environ.get(THREADS_ENV_VAR)
        if env is not None:
            try:
                value = int(env)
            except ValueError:
                raise ConfigurationError(
                    f"{THREADS_ENV_VAR} must be an integer, got {env!r}"
                ) from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {value}")
    return value


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
        overrides = {"threads": _resolve_threads(args.threads)}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigurationError("--seed must be non-negative")
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        if args.format is not None:
            overrides["format"] = args.format
        if getattr(args, "stream_index", None) is not None:
            if args.stream_index < 0:
                raise ConfigurationError("--stream-index must be non-negative")
            overrides["stream_index"] = args.stream_index
        if getattr(args, "check_oracle", False):
            overrides["check_oracle"] = True
        config = replace(config, **overrides)
        return _COMMANDS[args.command](config)
    except (ConfigurationError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SddeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
