"""Command line interface.

Subcommands:

* ``compress``: run the full pipeline and print (or write) the JSON report.
* ``herald``: build the causaloid for a scenario and answer one query.
* ``diagram``: emit a DOT or SVG composition scene.
* ``validate``: exterior span diagnostics only.

Exit codes: 0 success, 2 scenario or schema problems, 3 numerical
failures (rank, residual, singular transform, degenerate exterior,
vanishing denominators), 4 a herald came back ill defined while
``--require-herald`` was set.
"""
from __future__ import annotations

import argparse
import json
import sys

from .backends import build_prob_table, enumerate_labels, validate_exterior_span
from .causaloid import build_causaloid
from .diagram import born_scene, emit_diagram, expansion_scene, product_scene
from .errors import (
    BackendError,
    CausaloidError,
    DegenerateExterior,
    DimensionMismatch,
    IncompleteTable,
    IoError,
    ResidualTooLarge,
    SchemaError,
    SingularTransform,
    SpanDeficient,
    TableTooLarge,
    UnknownEntry,
    UnknownExterior,
    UnknownLabel,
    UnknownProcedure,
    UnknownRegion,
    ZeroConditionCount,
    ZeroDenominator,
    ZeroDenominatorVector,
)
from .heralding import HeraldQuery, herald
from .report import report_json, run_pipeline, write_report
from .scenario import ScenarioFile, parse_scenario

__all__ = ["main"]

_SCHEMA_ERRORS = (
    SchemaError,
    IoError,
    DimensionMismatch,
    UnknownRegion,
    UnknownLabel,
    UnknownExterior,
    UnknownProcedure,
    UnknownEntry,
    IncompleteTable,
    TableTooLarge,
    BackendError,
    ZeroConditionCount,
)
_NUMERICAL_ERRORS = (
    ResidualTooLarge,
    SingularTransform,
    SpanDeficient,
    DegenerateExterior,
    ZeroDenominator,
    ZeroDenominatorVector,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_HERALD = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causaloid",
        description="compress operational scenarios and answer herald queries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="write output here instead of stdout")
        p.add_argument("--tol-rank", type=float, default=None, help="rank tolerance override")
        p.add_argument("--tol-herald", type=float, default=None, help="herald tolerance override")
        p.add_argument("--seed", type=int, default=None, help="seed recorded in the report")

    p = sub.add_parser("compress", help="run the full compression pipeline")
    common(p)
    p.add_argument(
        "--full-matrices",
        action="store_true",
        help="embed exact hex expansion matrices in the report",
    )
    p.add_argument(
        "--require-herald",
        action="store_true",
        help="exit 4 when any scenario herald is ill defined",
    )

    p = sub.add_parser("herald", help="answer one herald query")
    common(p)
    p.add_argument("--target", required=True, help="REGION:LABEL_INDEX")
    p.add_argument("--given", default="", help="comma list of REGION:LABEL_INDEX")
    p.add_argument(
        "--require-herald",
        action="store_true",
        help="exit 4 when the query is ill defined",
    )

    p = sub.add_parser("diagram", help="emit a composition scene")
    common(p)
    p.add_argument(
        "--expr",
        required=True,
        help="born:REGION, expand:REGION, or product:REGION,REGION",
    )
    p.add_argument("--format", choices=("dot", "svg"), default="dot")

    p = sub.add_parser("validate", help="exterior span diagnostics only")
    common(p)
    return parser


def _load(args) -> ScenarioFile:
    scenario = parse_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def _overrides(args) -> dict[str, float]:
    out: dict[str, float] = {}
    if args.tol_rank is not None:
        out["rank"] = args.tol_rank
    if args.tol_herald is not None:
        out["herald"] = args.tol_herald
    return out


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {out_path}: {exc}") from exc


def _cmd_compress(args) -> int:
    scenario = _load(args)
    report = run_pipeline(
        scenario, full_matrices=args.full_matrices, overrides=_overrides(args)
    )
    if args.out is not None:
        write_report(report, args.out)
    else:
        sys.stdout.write(report_json(report))
    if args.require_herald:
        for name, result in report.heralds:
            if not result.well_defined:
                sys.stderr.write(f"herald {name!r} is not well defined\n")
                return EXIT_HERALD
    return EXIT_OK


def _parse_ref(scenario: ScenarioFile, text: str, flag: str):
    region_name, sep, index = text.partition(":")
    if not sep or not index.lstrip("-").isdigit():
        raise SchemaError(f"{flag} wants REGION:LABEL_INDEX, got {text!r}")
    region = scenario.region_named(region_name)
    gamma = enumerate_labels(scenario.spec, region)
    idx = int(index)
    if not 0 <= idx < gamma.size:
        raise SchemaError(
            f"{flag}: label index {idx} out of range for {region_name} "
            f"(size {gamma.size})"
        )
    return region, gamma.labels[idx]


def _cmd_herald(args) -> int:
    scenario = _load(args)
    overrides = _overrides(args)
    tol_rank = overrides.get("rank", scenario.tol_rank)
    tol_herald = overrides.get("herald", scenario.tol_herald)

    target = _parse_ref(scenario, args.target, "--target")
    given = tuple(
        _parse_ref(scenario, part, "--given")
        for part in args.given.split(",")
        if part
    )
    query = HeraldQuery.from_labels(target, given)

    for region in scenario.regions:
        validate_exterior_span(scenario.spec, region, tol_rank=tol_rank)
    table = build_prob_table(scenario.spec, scenario.regions)
    causaloid = build_causaloid(
        table,
        composites=scenario.composites,
        tol_rank=tol_rank,
        tol_residual=scenario.tol_residual,
    )
    result = herald(causaloid, query, tol=tol_herald, table=table)

    payload = {
        "scenario": scenario.name,
        "target": args.target,
        "given": sorted(part for part in args.given.split(",") if part),
        "well_defined": result.well_defined,
        "residual": result.residual,
        "p": result.p,
    }
    if result.witness is not None:
        (hi_ext, hi_p), (lo_ext, lo_p) = result.witness
        payload["witness"] = {
            "high": {"exterior": hi_ext.describe(), "p": hi_p},
            "low": {"exterior": lo_ext.describe(), "p": lo_p},
        }
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    if args.require_herald and not result.well_defined:
        sys.stderr.write("herald query is not well defined\n")
        return EXIT_HERALD
    return EXIT_OK


def _cmd_diagram(args) -> int:
    scenario = _load(args)
    kind, sep, rest = args.expr.partition(":")
    if not sep:
        raise SchemaError(
            f"--expr wants born:R, expand:R, or product:R1,R2, got {args.expr!r}"
        )
    overrides = _overrides(args)
    tol_rank = overrides.get("rank", scenario.tol_rank)
    table = build_prob_table(scenario.spec, scenario.regions)
    causaloid = build_causaloid(
        table,
        composites=scenario.composites,
        tol_rank=tol_rank,
        tol_residual=scenario.tol_residual,
    )
    if kind == "born":
        scene = born_scene(causaloid, scenario.region_named(rest))
    elif kind == "expand":
        scene = expansion_scene(causaloid, scenario.region_named(rest))
    elif kind == "product":
        names = [part for part in rest.split(",") if part]
        if len(names) != 2:
            raise SchemaError("product wants exactly two region names")
        scene = product_scene(
            causaloid,
            scenario.region_named(names[0]),
            scenario.region_named(names[1]),
        )
    else:
        raise SchemaError(f"unknown diagram expression kind {kind!r}")
    _emit(emit_diagram(scene, args.format), args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    scenario = _load(args)
    overrides = _overrides(args)
    tol_rank = overrides.get("rank", scenario.tol_rank)
    rows = []
    for region in scenario.regions:
        check = validate_exterior_span(scenario.spec, region, tol_rank=tol_rank)
        rows.append(
            {
                "region": scenario.name_of(region),
                "locations": list(region.locations),
                "rank": check.rank,
                "extended_rank": check.extended_rank,
                "exteriors": check.n_exteriors,
                "extended_exteriors": check.n_extended_exteriors,
                "stable": check.stable,
            }
        )
    payload = {"scenario": scenario.name, "span_validation": rows}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


_COMMANDS = {
    "compress": _cmd_compress,
    "herald": _cmd_herald,
    "diagram": _cmd_diagram,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _NUMERICAL_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except _SCHEMA_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SCHEMA
    except CausaloidError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SCHEMA


if __name__ == "__main__":
    raise SystemExit(main())
