"""End to end compression pipeline and its deterministic JSON report.

``run_pipeline`` executes the full chain for one scenario: exterior span
validation per probed region, full probability table, per-region and
grouped compression, adjacency classification with mediator diagnostics,
and the requested heralds. The report payload is a plain dict that
serializes byte-identically across runs: keys are sorted, floats carry an
exact hex companion, and matrices are summarized by sha256 digest (full
hex rows only on request).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping

from . import __version__
from .backends import (
    build_prob_table,
    conditioning_span,
    validate_exterior_span,
)
from .causaloid import Causaloid, build_causaloid
from .compositional import adjacency_graph
from .errors import CausaloidError, IoError
from .heralding import HeraldResult, herald
from .operational import Region
from .scenario import ScenarioFile
from .tables import ProbTable
from .tomographic import clamp_probability

__all__ = [
    "REPORT_FORMAT_VERSION",
    "CompressionReport",
    "run_pipeline",
    "report_json",
    "write_report",
]

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class CompressionReport:
    """Pipeline products: the payload dict plus the live objects behind it."""

    scenario: ScenarioFile
    payload: dict
    table: ProbTable
    causaloid: Causaloid
    heralds: tuple[tuple[str, HeraldResult], ...]


def _matrix_digest(matrix) -> str:
    rows = [[float(v).hex() for v in row] for row in matrix]
    blob = json.dumps(rows, separators=(",", ":")).encode("ascii")
    return hashlib.sha256(blob).hexdigest()


def _matrix_hex(matrix) -> list[list[str]]:
    return [[float(v).hex() for v in row] for row in matrix]


def _float_pair(value: float) -> dict:
    return {"decimal": float(value), "hex": float(value).hex()}


def _region_name(scenario: ScenarioFile, region: Region) -> str:
    return scenario.name_of(region)


def _key_names(scenario: ScenarioFile, key) -> list:
    if isinstance(key, Region):
        return _region_name(scenario, key)  # type: ignore[return-value]
    return [_key_names(scenario, part) for part in key]


def _span_section(scenario: ScenarioFile, tol_rank: float) -> list[dict]:
    out = []
    for region in scenario.regions:
        check = validate_exterior_span(scenario.spec, region, tol_rank=tol_rank)
        out.append(
            {
                "region": _region_name(scenario, region),
                "locations": list(region.locations),
                "rank": check.rank,
                "extended_rank": check.extended_rank,
                "exteriors": check.n_exteriors,
                "extended_exteriors": check.n_extended_exteriors,
                "stable": check.stable,
            }
        )
    return out


def _elementary_section(
    scenario: ScenarioFile, causaloid: Causaloid, full_matrices: bool
) -> list[dict]:
    out = []
    for region in causaloid.regions:
        entry = causaloid.tomographic(region)
        item = {
            "region": _region_name(scenario, region),
            "locations": list(region.locations),
            "gamma_size": entry.gamma.size,
            "omega_size": entry.omega.size,
            "omega_indices": list(entry.omega.indices),
            "lambda_shape": list(entry.matrix.shape),
            "lambda_sha256": _matrix_digest(entry.matrix),
        }
        if full_matrices:
            item["lambda_hex"] = _matrix_hex(entry.matrix)
        if len(item["omega_indices"]) != item["omega_size"]:
            raise CausaloidError("omega index list lost entries")
        out.append(item)
    return out


def _composite_section(
    scenario: ScenarioFile, causaloid: Causaloid, full_matrices: bool
) -> list[dict]:
    out = []
    for key, entry in causaloid.composites:
        item = {
            "key": _key_names(scenario, key),
            "factors": [
                _region_name(scenario, r) for r in entry.composite.constituents
            ],
            "product_size": entry.product_size,
            "omega_size": entry.omega.size,
            "omega_indices": list(entry.omega.indices),
            "adjacent": entry.omega.size < entry.product_size,
            "lambda_shape": list(entry.matrix.shape),
            "lambda_sha256": _matrix_digest(entry.matrix),
        }
        if full_matrices:
            item["lambda_hex"] = _matrix_hex(entry.matrix)
        out.append(item)
    return out


def _mediators(
    scenario: ScenarioFile, pair_locations: tuple[int, ...]
) -> list[dict]:
    """Span diagnostics for every instrumented location outside the pair."""
    out = []
    for location in scenario.spec.locations():
        if location in pair_locations:
            continue
        span, full = conditioning_span(scenario.spec, location)
        out.append(
            {
                "location": location,
                "span": span,
                "full": full,
                "informationally_complete": span == full,
            }
        )
    return out


def _adjacency_section(
    scenario: ScenarioFile, table: ProbTable, tol_rank: float
) -> dict | None:
    if len(scenario.regions) < 2:
        return None
    graph = adjacency_graph(table, scenario.regions, tol=tol_rank)
    pairs = []
    for pair in graph.pairs:
        locs = pair.first.locations + pair.second.locations
        pairs.append(
            {
                "first": _region_name(scenario, pair.first),
                "second": _region_name(scenario, pair.second),
                "composite_size": pair.composite_size,
                "product_size": pair.product_size,
                "adjacent": pair.adjacent,
                "mediators": _mediators(scenario, locs),
            }
        )
    return {
        "regions": [_region_name(scenario, r) for r in graph.regions],
        "edges": [
            [
                _region_name(scenario, graph.regions[i]),
                _region_name(scenario, graph.regions[j]),
            ]
            for i, j in graph.edges
        ],
        "pairs": pairs,
    }


def _herald_section(
    scenario: ScenarioFile,
    results: tuple[tuple[str, HeraldResult], ...],
) -> list[dict]:
    out = []
    for name, result in results:
        item = {
            "name": name,
            "well_defined": result.well_defined,
            "residual": _float_pair(result.residual),
            "p": None,
            "witness": None,
        }
        if result.p is not None:
            shown = result.p
            if -1e-9 <= shown <= 1 + 1e-9:
                shown = clamp_probability(shown)
            item["p"] = {"raw": _float_pair(result.p), "display": shown}
        if result.witness is not None:
            (hi_ext, hi_p), (lo_ext, lo_p) = result.witness
            item["witness"] = {
                "high": {"exterior": hi_ext.describe(), "p": _float_pair(hi_p)},
                "low": {"exterior": lo_ext.describe(), "p": _float_pair(lo_p)},
                "spread": _float_pair(hi_p - lo_p),
            }
        out.append(item)
    return out


def run_pipeline(
    scenario: ScenarioFile,
    *,
    full_matrices: bool = False,
    overrides: Mapping[str, float] | None = None,
) -> CompressionReport:
    """Run span checks, both compression levels, adjacency, and heralds.

    ``overrides`` may replace the scenario tolerances under the keys
    ``rank``, ``residual``, and ``herald``. Errors from any stage
    propagate unchanged; nothing in the report is emitted on failure.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - {"rank", "residual", "herald"}
    if unknown:
        raise ValueError(f"unknown tolerance overrides: {sorted(unknown)}")
    tol_rank = float(overrides.get("rank", scenario.tol_rank))
    tol_residual = float(overrides.get("residual", scenario.tol_residual))
    tol_herald = float(overrides.get("herald", scenario.tol_herald))

    spans = _span_section(scenario, tol_rank)
    table = build_prob_table(scenario.spec, scenario.regions)
    table.validate()
    causaloid = build_causaloid(
        table,
        composites=scenario.composites,
        tol_rank=tol_rank,
        tol_residual=tol_residual,
    )
    herald_results = tuple(
        (spec.name, herald(causaloid, spec.query, tol=tol_herald, table=table))
        for spec in scenario.heralds
    )

    payload = {
        "format_version": REPORT_FORMAT_VERSION,
        "kind": "compression-report",
        "tool_version": __version__,
        "scenario": scenario.name,
        "seed": scenario.seed,
        "theory": {
            "kind": scenario.spec.kind,
            "chains": [
                {
                    "name": chain.name,
                    "size": chain.size,
                    "locations": list(chain.locations),
                }
                for chain in scenario.spec.chains
            ],
        },
        "tolerances": {
            "rank": _float_pair(tol_rank),
            "residual": _float_pair(tol_residual),
            "herald": _float_pair(tol_herald),
        },
        "span_validation": spans,
        "regions": _elementary_section(scenario, causaloid, full_matrices),
        "composites": _composite_section(scenario, causaloid, full_matrices),
        "adjacency": _adjacency_section(scenario, table, tol_rank),
        "heralds": _herald_section(scenario, herald_results),
    }
    return CompressionReport(
        scenario=scenario,
        payload=payload,
        table=table,
        causaloid=causaloid,
        heralds=herald_results,
    )


def report_json(report: CompressionReport) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report.payload, indent=2, sort_keys=True) + "\n"


def write_report(report: CompressionReport, path) -> None:
    text = report_json(report)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
