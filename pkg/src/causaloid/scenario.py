"""Scenario files: a strict JSON schema describing one arrangement.

A scenario names the theory (chains plus instrument families), the probed
regions, the composite groupings to compress, and the heralding queries to
run. Parsing is strict: unknown keys, undeclared references, and
out-of-range indices are schema errors that name the offending path.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from . import backends
from .backends import ClassicalSpec, QuantumSpec, TheorySpec, enumerate_labels
from .errors import IoError, SchemaError
from .heralding import HeraldQuery
from .operational import Region

__all__ = [
    "SCENARIO_FORMAT_VERSION",
    "HeraldSpec",
    "ScenarioFile",
    "parse_scenario",
    "parse_scenario_dict",
]

SCENARIO_FORMAT_VERSION = 1

_TOP_KEYS = {
    "format_version",
    "name",
    "seed",
    "theory",
    "regions",
    "composites",
    "heralds",
    "tolerances",
}
_THEORY_KEYS = {"kind", "chains", "instruments"}
_CHAIN_KEYS = {"name", "size", "locations"}
_TOL_KEYS = {"rank", "residual", "herald"}
_HERALD_KEYS = {"name", "target", "given", "procedures"}
_FAMILY_PARAMS = {
    "polariser": {"angles_deg"},
    "probe_reprepare": set(),
    "unitaries": {"names"},
    "probe_reset": set(),
    "deterministic": {"maps"},
}
_FAMILY_KINDS = {
    "polariser": "quantum",
    "probe_reprepare": "quantum",
    "unitaries": "quantum",
    "probe_reset": "classical",
    "deterministic": "classical",
}


@dataclass(frozen=True)
class HeraldSpec:
    """One named heralding query, resolved against the scenario's labels."""

    name: str
    query: HeraldQuery


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    """A parsed, validated scenario."""

    name: str
    spec: TheorySpec
    region_names: tuple[str, ...]
    regions: tuple[Region, ...]
    composites: tuple[tuple, ...]
    heralds: tuple[HeraldSpec, ...]
    tol_rank: float
    tol_residual: float
    tol_herald: float
    seed: int

    def region_named(self, name: str) -> Region:
        try:
            return self.regions[self.region_names.index(name)]
        except ValueError:
            raise SchemaError(f"region {name!r} is not declared") from None

    def name_of(self, region: Region) -> str:
        for n, r in zip(self.region_names, self.regions):
            if r == region:
                return n
        return str(region)

    def with_seed(self, seed: int) -> ScenarioFile:
        return dataclasses.replace(self, seed=int(seed))


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing required key {key!r}", path)
    return obj[key]


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", path)
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r}", path)


def _int_list(value, path: str) -> list[int]:
    if not isinstance(value, list) or not all(
        isinstance(x, int) and not isinstance(x, bool) for x in value
    ):
        raise SchemaError("expected a list of integers", path)
    return value


def _build_family(item: dict, size: int, path: str):
    family = _require(item, "family", path)
    if family not in _FAMILY_PARAMS:
        raise SchemaError(f"unknown instrument family {family!r}", path)
    _check_keys(item, {"location", "family"} | _FAMILY_PARAMS[family], path)
    location = _require(item, "location", path)
    if not isinstance(location, int) or isinstance(location, bool):
        raise SchemaError("location must be an integer", f"{path}.location")
    if family == "polariser":
        angles = _require(item, "angles_deg", path)
        if not isinstance(angles, list) or not all(
            isinstance(a, (int, float)) and not isinstance(a, bool) for a in angles
        ):
            raise SchemaError("expected a list of numbers", f"{path}.angles_deg")
        return backends.polariser_family(location, angles)
    if family == "probe_reprepare":
        return backends.probe_reprepare_family(location, size)
    if family == "unitaries":
        names = _require(item, "names", path)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise SchemaError("expected a list of names", f"{path}.names")
        return backends.unitary_family(location, size, names)
    if family == "probe_reset":
        return backends.probe_reset_family(location, size)
    maps = _require(item, "maps", path)
    if not isinstance(maps, list) or not all(isinstance(n, str) for n in maps):
        raise SchemaError("expected a list of map names", f"{path}.maps")
    return backends.deterministic_family(location, size, maps)


def _build_theory(doc: dict, path: str) -> TheorySpec:
    _check_keys(doc, _THEORY_KEYS, path)
    kind = _require(doc, "kind", path)
    if kind not in ("classical", "quantum"):
        raise SchemaError(f"kind must be classical or quantum, got {kind!r}", f"{path}.kind")
    raw_chains = _require(doc, "chains", path)
    if not isinstance(raw_chains, list) or not raw_chains:
        raise SchemaError("expected a non-empty list of chains", f"{path}.chains")
    chains = []
    loc_to_size: dict[int, int] = {}
    for i, item in enumerate(raw_chains):
        cp = f"{path}.chains[{i}]"
        _check_keys(item, _CHAIN_KEYS, cp)
        name = _require(item, "name", cp)
        size = _require(item, "size", cp)
        locations = _int_list(_require(item, "locations", cp), f"{cp}.locations")
        if not isinstance(name, str):
            raise SchemaError("chain name must be a string", f"{cp}.name")
        if not isinstance(size, int) or isinstance(size, bool) or size < 2:
            raise SchemaError("chain size must be an integer >= 2", f"{cp}.size")
        for x in locations:
            if x in loc_to_size:
                raise SchemaError(f"location {x} appears on two chains", f"{cp}.locations")
            loc_to_size[x] = size
        chains.append(backends.Chain(name, size, tuple(locations)))
    raw_instruments = _require(doc, "instruments", path)
    if not isinstance(raw_instruments, list):
        raise SchemaError("expected a list of instruments", f"{path}.instruments")
    families = []
    seen_locs: set[int] = set()
    for i, item in enumerate(raw_instruments):
        ip = f"{path}.instruments[{i}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", ip)
        family_name = item.get("family")
        if isinstance(family_name, str) and family_name in _FAMILY_KINDS:
            if _FAMILY_KINDS[family_name] != kind:
                raise SchemaError(
                    f"family {family_name!r} needs a {_FAMILY_KINDS[family_name]} theory",
                    f"{ip}.family",
                )
        loc = item.get("location")
        if loc not in loc_to_size:
            raise SchemaError(
                f"location {loc!r} is not on any declared chain", f"{ip}.location"
            )
        if loc in seen_locs:
            raise SchemaError(f"location {loc} is instrumented twice", f"{ip}.location")
        seen_locs.add(loc)
        families.append(_build_family(item, loc_to_size[loc], ip))
    missing = sorted(set(loc_to_size) - seen_locs)
    if missing:
        raise SchemaError(
            f"locations {missing} have no instrument family", f"{path}.instruments"
        )
    families.sort(key=lambda f: f.location)
    preparations = tuple(
        backends.ic_preparations(kind, c.size) for c in chains
    )
    effects = tuple(backends.ic_effects(kind, c.size) for c in chains)
    cls = ClassicalSpec if kind == "classical" else QuantumSpec
    return cls(
        chains=tuple(chains),
        instruments=tuple(families),
        preparations=preparations,
        effects=effects,
        conditioning_actions=(),
    )


def _parse_composites(raw, names: dict[str, Region], path: str) -> tuple[tuple, ...]:
    if not isinstance(raw, list):
        raise SchemaError("expected a list of groupings", path)

    def resolve(node, npath):
        if isinstance(node, str):
            if node not in names:
                raise SchemaError(f"region {node!r} is not declared", npath)
            return names[node]
        if isinstance(node, list):
            if len(node) < 2:
                raise SchemaError("a grouping needs at least two factors", npath)
            return tuple(
                resolve(child, f"{npath}[{i}]") for i, child in enumerate(node)
            )
        raise SchemaError("expected a region name or a nested grouping", npath)

    out = []
    for i, node in enumerate(raw):
        key = resolve(node, f"{path}[{i}]")
        if isinstance(key, Region):
            raise SchemaError("a grouping needs at least two factors", f"{path}[{i}]")
        out.append(key)
    return tuple(out)


def _parse_label_ref(node, names: dict[str, Region], spec: TheorySpec, path: str):
    if (
        not isinstance(node, list)
        or len(node) != 2
        or not isinstance(node[0], str)
        or not isinstance(node[1], int)
        or isinstance(node[1], bool)
    ):
        raise SchemaError("expected [region_name, label_index]", path)
    name, idx = node
    if name not in names:
        raise SchemaError(f"region {name!r} is not declared", path)
    region = names[name]
    gamma = enumerate_labels(spec, region)
    if not 0 <= idx < gamma.size:
        raise SchemaError(
            f"label index {idx} out of range for {name!r} (size {gamma.size})", path
        )
    return region, gamma.labels[idx]


def _parse_heralds(raw, names, spec, path: str) -> tuple[HeraldSpec, ...]:
    if not isinstance(raw, list):
        raise SchemaError("expected a list of herald queries", path)
    out = []
    for i, item in enumerate(raw):
        hp = f"{path}[{i}]"
        _check_keys(item, _HERALD_KEYS, hp)
        name = _require(item, "name", hp)
        if not isinstance(name, str) or not name:
            raise SchemaError("herald name must be a non-empty string", f"{hp}.name")
        target = _parse_label_ref(
            _require(item, "target", hp), names, spec, f"{hp}.target"
        )
        raw_given = item.get("given", [])
        if not isinstance(raw_given, list):
            raise SchemaError("expected a list of label references", f"{hp}.given")
        given = tuple(
            _parse_label_ref(node, names, spec, f"{hp}.given[{j}]")
            for j, node in enumerate(raw_given)
        )
        raw_procs = item.get("procedures")
        try:
            if raw_procs is None:
                query = HeraldQuery.from_labels(target, given)
            else:
                if not isinstance(raw_procs, dict):
                    raise SchemaError("expected an object", f"{hp}.procedures")
                procedures = []
                for rname, action in raw_procs.items():
                    if rname not in names:
                        raise SchemaError(
                            f"region {rname!r} is not declared", f"{hp}.procedures"
                        )
                    actions = _int_list(action, f"{hp}.procedures.{rname}")
                    procedures.append((names[rname], tuple(actions)))
                query = HeraldQuery(
                    target=target, conditions=given, procedures=tuple(procedures)
                )
        except ValueError as exc:
            raise SchemaError(str(exc), hp) from exc
        out.append(HeraldSpec(name, query))
    return tuple(out)


def parse_scenario_dict(doc: dict, source: str = "<dict>") -> ScenarioFile:
    """Validate a scenario document and build its theory objects."""
    _check_keys(doc, _TOP_KEYS, "$")
    version = _require(doc, "format_version", "$")
    if version != SCENARIO_FORMAT_VERSION:
        raise SchemaError(
            f"unsupported format_version {version!r}", "$.format_version"
        )
    name = _require(doc, "name", "$")
    if not isinstance(name, str) or not name:
        raise SchemaError("name must be a non-empty string", "$.name")
    spec = _build_theory(_require(doc, "theory", "$"), "$.theory")
    raw_regions = _require(doc, "regions", "$")
    if not isinstance(raw_regions, dict) or not raw_regions:
        raise SchemaError("expected a non-empty object of regions", "$.regions")
    instrumented = set(spec.locations())
    names: dict[str, Region] = {}
    used: set[int] = set()
    for rname, locs in raw_regions.items():
        rp = f"$.regions.{rname}"
        locations = _int_list(locs, rp)
        for x in locations:
            if x not in instrumented:
                raise SchemaError(f"location {x} is not declared", rp)
            if x in used:
                raise SchemaError(f"location {x} is in two regions", rp)
            used.add(x)
        names[rname] = Region(tuple(locations))
    composites = _parse_composites(doc.get("composites", []), names, "$.composites")
    heralds = _parse_heralds(doc.get("heralds", []), names, spec, "$.heralds")
    tols = doc.get("tolerances", {})
    _check_keys(tols, _TOL_KEYS, "$.tolerances")
    for key, value in tols.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise SchemaError("tolerance must be a positive number", f"$.tolerances.{key}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("seed must be an integer", "$.seed")
    return ScenarioFile(
        name=name,
        spec=spec,
        region_names=tuple(names),
        regions=tuple(names.values()),
        composites=composites,
        heralds=heralds,
        tol_rank=float(tols.get("rank", 1e-9)),
        tol_residual=float(tols.get("residual", 1e-8)),
        tol_herald=float(tols.get("herald", 1e-8)),
        seed=seed,
    )


def parse_scenario(path: str) -> ScenarioFile:
    """Read and validate one scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"not valid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}"
        ) from exc
    if not isinstance(doc, dict):
        raise SchemaError("the top level must be an object", path)
    return parse_scenario_dict(doc, source=path)
