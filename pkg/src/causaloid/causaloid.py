"""The causaloid registry: every region's expansion data in one object.

The registry holds one tomographic entry per probed region and one
compositional entry per requested grouping, plus deduction rules that let
some groupings be stored as stubs instead of full matrices. Everything
downstream (products, joint evaluation, heralding) reads from here.
"""
from __future__ import annotations

import itertools
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .compositional import (
    CompositeRegion,
    CompositionalLambda,
    compute_compositional_lambda,
    fiducial_rows_matrix,
    find_composite_omega,
)
from .errors import (
    ContextMismatch,
    IoError,
    MissingEntry,
    RuleInapplicable,
    SchemaError,
    SingularTransform,
    UnknownRegion,
)
from .operational import Region
from .tables import GammaSet, Label, ProbTable
from .tomographic import (
    DEFAULT_RANK_TOL,
    DEFAULT_RESIDUAL_TOL,
    OmegaSet,
    RVector,
    StateVector,
    TomographicLambda,
    born_rule,
    build_measurement_matrix,
    compute_tomographic_lambda,
    find_fiducial_set,
    r_vector,
)

__all__ = [
    "Key",
    "DeducedEntry",
    "MetaRule",
    "RULE_REGISTRY",
    "Causaloid",
    "build_causaloid",
    "change_omega_basis",
    "causaloid_product",
    "joint_r_vector",
    "evaluate_joint",
    "meta_compress",
    "expand",
    "causaloid_to_dict",
    "causaloid_from_dict",
    "save_causaloid",
    "load_causaloid",
]

# a registry key is a Region (first-level entry) or a tuple of keys
# (grouping whose factors are the child keys, in canonical order)
Key = "Region | tuple"

MAX_BASIS_CONDITION = 1e12
FORMAT_VERSION = 1


def key_union(key) -> Region:
    if isinstance(key, Region):
        return key
    locs: list[int] = []
    for child in key:
        locs.extend(key_union(child).locations)
    return Region(tuple(sorted(locs)))


def normalize_key(spec) -> "Region | tuple":
    """Canonical nested-tuple form: factors sorted by least location."""
    if isinstance(spec, Region):
        return spec
    children = tuple(normalize_key(c) for c in spec)
    if len(children) < 2:
        raise ValueError("a grouping needs at least two factors")
    ordered = tuple(sorted(children, key=lambda k: key_union(k).locations))
    seen: set[int] = set()
    for c in ordered:
        u = set(key_union(c).locations)
        if seen & u:
            raise ValueError("grouping factors must be pairwise disjoint")
        seen |= u
    return ordered


def key_to_str(key) -> str:
    if isinstance(key, Region):
        return str(key)
    return "(" + " x ".join(key_to_str(c) for c in key) + ")"


@dataclass(frozen=True)
class DeducedEntry:
    """A dropped composite entry: factors plus the rule that restores it."""

    key: tuple
    rule: str
    factor_omegas: tuple[OmegaSet, ...]

    def __post_init__(self):
        if not isinstance(self.key, tuple):
            raise ValueError("stubs describe grouped entries only")
        if self.rule not in RULE_REGISTRY:
            raise RuleInapplicable(
                f"rule {self.rule!r} is not registered "
                f"(entry {key_to_str(self.key)})"
            )


@dataclass(frozen=True)
class MetaRule:
    """One third-level deduction rule.

    ``drops`` decides whether a stored entry may be replaced by a stub;
    ``deduce`` rebuilds the entry from the stub's factor fiducial sets.
    """

    identifier: str
    drops: Callable[[CompositionalLambda], bool]
    deduce: Callable[[DeducedEntry], CompositionalLambda]


def _retain_all_drops(entry: CompositionalLambda) -> bool:
    return False


def _retain_all_deduce(stub: DeducedEntry) -> CompositionalLambda:
    raise RuleInapplicable(
        f"the retain-all rule deduces nothing (entry {key_to_str(stub.key)})"
    )


def _tensor_drops(entry: CompositionalLambda) -> bool:
    # full product row set: the expansion is forced to the identity
    return entry.omega.size == entry.omega.parent_size


def _tensor_deduce(stub: DeducedEntry) -> CompositionalLambda:
    dims = tuple(o.size for o in stub.factor_omegas)
    n = 1
    for d in dims:
        n *= d
    regions = tuple(o.region for o in stub.factor_omegas)
    omega = OmegaSet(
        region=key_union(stub.key),
        indices=tuple(range(n)),
        parent_size=n,
        row_kind="omega-product",
        factors=regions,
        dims=dims,
    )
    return CompositionalLambda(
        composite=CompositeRegion(regions),
        factor_omegas=stub.factor_omegas,
        omega=omega,
        matrix=np.eye(n),
    )


RULE_REGISTRY: dict[str, MetaRule] = {
    "retain-all": MetaRule("retain-all", _retain_all_drops, _retain_all_deduce),
    "tensor-factorization": MetaRule(
        "tensor-factorization", _tensor_drops, _tensor_deduce
    ),
}


@dataclass(frozen=True, eq=False)
class Causaloid:
    """Immutable registry of expansion entries for one scenario."""

    regions: tuple[Region, ...]
    elementary: tuple[TomographicLambda, ...]
    composites: tuple[tuple[tuple, CompositionalLambda], ...] = ()
    deduced: tuple[DeducedEntry, ...] = ()
    rules: tuple[str, ...] = ()

    def __post_init__(self):
        if list(self.regions) != sorted(self.regions, key=lambda r: r.locations):
            raise ValueError("regions must be in canonical order")
        seen: set[int] = set()
        for r in self.regions:
            if seen & set(r.locations):
                raise ValueError("regions must be pairwise disjoint")
            seen |= set(r.locations)
        if tuple(e.region for e in self.elementary) != self.regions:
            raise ValueError("one first-level entry per region, in order")
        for name in self.rules:
            if name not in RULE_REGISTRY:
                raise RuleInapplicable(f"rule {name!r} is not registered")
        keys = [k for k, _ in self.composites] + [d.key for d in self.deduced]
        if len(set(keys)) != len(keys):
            raise ValueError("registry keys must be unique")
        known = set(self.regions) | set(keys)
        for key in keys:
            for child in key:
                if child not in known:
                    raise MissingEntry(
                        f"factor {key_to_str(child)} of {key_to_str(key)} "
                        "has no registry entry"
                    )
        for key, entry in self.composites:
            expect = tuple(self.omega_of(child) for child in key)
            if entry.factor_omegas != expect:
                raise ContextMismatch(
                    f"entry {key_to_str(key)} disagrees with its factors' "
                    "fiducial sets"
                )
        for stub in self.deduced:
            expect = tuple(self.omega_of(child) for child in stub.key)
            if stub.factor_omegas != expect:
                raise ContextMismatch(
                    f"stub {key_to_str(stub.key)} disagrees with its factors' "
                    "fiducial sets"
                )

    # -- lookups ---------------------------------------------------------

    def tomographic(self, region: Region) -> TomographicLambda:
        try:
            return self.elementary[self.regions.index(region)]
        except ValueError:
            raise UnknownRegion(f"no first-level entry for {region}") from None

    def entry(self, key):
        """Resolve a key to its entry, materializing stubs on demand."""
        if isinstance(key, Region):
            return self.tomographic(key)
        for k, entry in self.composites:
            if k == key:
                return entry
        for stub in self.deduced:
            if stub.key == key:
                return self._materialize(stub)
        raise MissingEntry(f"no registry entry for {key_to_str(key)}")

    def omega_of(self, key) -> OmegaSet:
        if isinstance(key, Region):
            return self.tomographic(key).omega
        return self.entry(key).omega

    def keys(self) -> tuple:
        return tuple(self.regions) + tuple(k for k, _ in self.composites) + tuple(
            d.key for d in self.deduced
        )

    def product_entry(self, contexts: Sequence[OmegaSet]) -> CompositionalLambda:
        """The grouped entry whose factor fiducial sets are ``contexts``."""
        contexts = tuple(contexts)
        for _, entry in self.composites:
            if entry.factor_omegas == contexts:
                return entry
        for stub in self.deduced:
            if stub.factor_omegas == contexts:
                return self._materialize(stub)
        names = ", ".join(str(o.region) for o in contexts)
        raise MissingEntry(
            f"no stored entry or rule covers the grouping ({names})"
        )

    def _materialize(self, stub: DeducedEntry) -> CompositionalLambda:
        cache = getattr(self, "_cached_stub_entries", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_cached_stub_entries", cache)
        if stub.key not in cache:
            cache[stub.key] = RULE_REGISTRY[stub.rule].deduce(stub)
        return cache[stub.key]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _leaf_rows(
    causaloid_regions: tuple[Region, ...],
    entries: dict,
    key,
) -> tuple[tuple[Region, ...], list[tuple[int, ...]]]:
    """Per fiducial element of ``key``: one gamma row index per leaf region."""
    entry = entries[key]
    if isinstance(key, Region):
        return (key,), [(i,) for i in entry.omega.indices]
    parts = [_leaf_rows(causaloid_regions, entries, child) for child in key]
    dims = [entries[child].omega.size for child in key]
    regions = tuple(itertools.chain(*(p[0] for p in parts)))
    rows = []
    for flat in entry.omega.indices:
        rem, pos = flat, []
        for d in reversed(dims):
            rem, q = divmod(rem, d)
            pos.append(q)
        pos.reverse()
        rows.append(
            tuple(itertools.chain(*(parts[i][1][pos[i]] for i in range(len(key)))))
        )
    return regions, rows


def build_causaloid(
    table: ProbTable,
    composites: Sequence[Sequence] | None = None,
    *,
    tol_rank: float = DEFAULT_RANK_TOL,
    tol_residual: float = DEFAULT_RESIDUAL_TOL,
) -> Causaloid:
    """Compress every region of a table and the requested groupings.

    ``composites`` lists groupings as sequences of regions, with nesting
    allowed: an inner sequence refers to a grouping listed earlier. When
    omitted, all region pairs are built. Entries are built in the order
    given, so inner groupings must come first.
    """
    regions = tuple(sorted(table.regions, key=lambda r: r.locations))
    elementary = []
    for r in regions:
        m = build_measurement_matrix(table, r)
        omega = find_fiducial_set(m, tol_rank)
        elementary.append(compute_tomographic_lambda(m, omega, tol_residual))
    entries: dict = {r: e for r, e in zip(regions, elementary)}

    if composites is None:
        composites = list(itertools.combinations(regions, 2))
    built: list[tuple[tuple, CompositionalLambda]] = []
    for spec in composites:
        key = normalize_key(tuple(spec))
        if not isinstance(key, tuple):
            raise ValueError("a grouping needs at least two factors")
        if key in entries:
            continue
        for child in key:
            if child not in entries:
                raise MissingEntry(
                    f"factor {key_to_str(child)} of {key_to_str(key)} "
                    "must be built first"
                )
        factor_omegas = tuple(entries[child].omega for child in key)
        parts = [_leaf_rows(regions, entries, child) for child in key]
        leaves = tuple(itertools.chain(*(p[0] for p in parts)))
        dims = tuple(o.size for o in factor_omegas)
        row_keys = []
        assignment_rows = []
        for combo in itertools.product(*(range(d) for d in dims)):
            row_keys.append(combo)
            assignment_rows.append(
                tuple(itertools.chain(*(parts[i][1][pos] for i, pos in enumerate(combo))))
            )
        matrix = fiducial_rows_matrix(
            table,
            leaves,
            np.array(assignment_rows, dtype=int),
            row_keys=tuple(row_keys),
            factors=tuple(key_union(child) for child in key),
            dims=dims,
        )
        omega = find_composite_omega(matrix, tol_rank)
        entry = compute_compositional_lambda(matrix, omega, factor_omegas, tol_residual)
        entries[key] = entry
        built.append((key, entry))
    return Causaloid(
        regions=regions,
        elementary=tuple(elementary),
        composites=tuple(built),
    )


# ---------------------------------------------------------------------------
# basis change
# ---------------------------------------------------------------------------

def change_omega_basis(entry, new_omega: OmegaSet):
    """Re-express an entry over a different fiducial choice.

    The restriction of the current matrix to the new fiducial rows must be
    invertible; the new matrix is the old one times that inverse.
    """
    old = entry.omega
    if new_omega.size != old.size:
        raise ContextMismatch("the new fiducial set must have the same size")
    if (
        new_omega.row_kind != old.row_kind
        or new_omega.parent_size != old.parent_size
        or new_omega.region != old.region
        or new_omega.factors != old.factors
        or new_omega.dims != old.dims
    ):
        raise ContextMismatch("the new fiducial set indexes a different row set")
    rows = list(new_omega.indices)
    t = entry.matrix[rows]
    cond = float(np.linalg.cond(t))
    if not np.isfinite(cond) or cond > MAX_BASIS_CONDITION:
        raise SingularTransform(
            f"restriction to the new fiducial rows has condition {cond:.3e}"
        )
    lam = entry.matrix @ np.linalg.inv(t)
    lam[rows] = np.eye(len(rows))
    if isinstance(entry, TomographicLambda):
        return TomographicLambda(gamma=entry.gamma, omega=new_omega, matrix=lam)
    return CompositionalLambda(
        composite=entry.composite,
        factor_omegas=entry.factor_omegas,
        omega=new_omega,
        matrix=lam,
    )


# ---------------------------------------------------------------------------
# products and joint evaluation
# ---------------------------------------------------------------------------

def causaloid_product(r1: RVector, r2: RVector, causaloid: Causaloid) -> RVector:
    """Compose two measurement vectors through the stored expansion.

    Component k of the result sums r1[l1] r2[l2] times the expansion entry
    at row (l1, l2), column k. When the composite row set is the full
    product this is exactly the outer product.
    """
    try:
        entry = causaloid.product_entry((r1.context, r2.context))
        w = np.multiply.outer(r1.components, r2.components)
    except MissingEntry:
        entry = causaloid.product_entry((r2.context, r1.context))
        w = np.multiply.outer(r2.components, r1.components)
    comps = w.reshape(-1) @ entry.matrix
    return RVector(context=entry.omega, components=comps)


def joint_r_vector(causaloid: Causaloid, labels: Sequence[Label]) -> RVector:
    """The joint measurement vector of one label per scenario region."""
    if len(labels) != len(causaloid.regions):
        raise ContextMismatch("one label per scenario region is required")
    factors = [
        r_vector(lab, causaloid.tomographic(r))
        for r, lab in zip(causaloid.regions, labels)
    ]
    if len(factors) == 1:
        return factors[0]
    entry = causaloid.product_entry(tuple(f.context for f in factors))
    w = factors[0].components
    for f in factors[1:]:
        w = np.multiply.outer(w, f.components)
    comps = w.reshape(-1) @ entry.matrix
    return RVector(context=entry.omega, components=comps)


def evaluate_joint(
    causaloid: Causaloid, labels: Sequence[Label], state: StateVector
) -> float:
    """Joint probability of one label per region against a joint state."""
    r = joint_r_vector(causaloid, labels)
    return born_rule(r, state)


# ---------------------------------------------------------------------------
# meta compression
# ---------------------------------------------------------------------------

def meta_compress(causaloid: Causaloid, rules: Sequence[str]) -> Causaloid:
    """Replace rule-covered entries by stubs; keep everything else."""
    rules = tuple(rules)
    for name in rules:
        if name not in RULE_REGISTRY:
            raise RuleInapplicable(f"rule {name!r} is not registered")
    kept: list[tuple[tuple, CompositionalLambda]] = []
    stubs = list(causaloid.deduced)
    for key, entry in causaloid.composites:
        dropped = False
        for name in rules:
            if RULE_REGISTRY[name].drops(entry):
                stubs.append(DeducedEntry(key, name, entry.factor_omegas))
                dropped = True
                break
        if not dropped:
            kept.append((key, entry))
    return Causaloid(
        regions=causaloid.regions,
        elementary=causaloid.elementary,
        composites=tuple(kept),
        deduced=tuple(stubs),
        rules=rules,
    )


def expand(causaloid: Causaloid) -> Causaloid:
    """Materialize every stub back into a stored entry."""
    restored = list(causaloid.composites)
    for stub in causaloid.deduced:
        restored.append((stub.key, causaloid._materialize(stub)))
    restored.sort(key=lambda pair: key_union(pair[0]).locations)
    return Causaloid(
        regions=causaloid.regions,
        elementary=causaloid.elementary,
        composites=tuple(restored),
        deduced=(),
        rules=causaloid.rules,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _matrix_hex(matrix: np.ndarray) -> list[list[str]]:
    return [[float(x).hex() for x in row] for row in matrix]


def _matrix_from_hex(rows: list[list[str]]) -> np.ndarray:
    return np.array([[float.fromhex(x) for x in row] for row in rows], dtype=float)


def _omega_to_dict(o: OmegaSet) -> dict:
    out: dict = {
        "region": list(o.region.locations),
        "indices": list(o.indices),
        "parent_size": o.parent_size,
        "row_kind": o.row_kind,
    }
    if o.row_kind == "omega-product":
        out["factors"] = [list(r.locations) for r in o.factors]
        out["dims"] = list(o.dims)
    return out


def _omega_from_dict(d: dict) -> OmegaSet:
    kind = d["row_kind"]
    return OmegaSet(
        region=Region(tuple(d["region"])),
        indices=tuple(d["indices"]),
        parent_size=int(d["parent_size"]),
        row_kind=kind,
        factors=tuple(Region(tuple(f)) for f in d["factors"])
        if kind == "omega-product"
        else None,
        dims=tuple(d["dims"]) if kind == "omega-product" else None,
    )


def _key_to_json(key):
    if isinstance(key, Region):
        return list(key.locations)
    return [_key_to_json(c) for c in key]


def _key_from_json(node):
    if all(isinstance(x, int) for x in node):
        return Region(tuple(node))
    return tuple(_key_from_json(c) for c in node)


def causaloid_to_dict(causaloid: Causaloid) -> dict:
    elementary = []
    for entry in causaloid.elementary:
        elementary.append(
            {
                "region": list(entry.region.locations),
                "labels": [
                    [list(a), list(s)] for a, s in entry.gamma.labels
                ],
                "omega": _omega_to_dict(entry.omega),
                "matrix_hex": _matrix_hex(entry.matrix),
            }
        )
    composites = []
    for key, entry in causaloid.composites:
        composites.append(
            {
                "key": _key_to_json(key),
                "factor_omegas": [_omega_to_dict(o) for o in entry.factor_omegas],
                "omega": _omega_to_dict(entry.omega),
                "matrix_hex": _matrix_hex(entry.matrix),
            }
        )
    deduced = []
    for stub in causaloid.deduced:
        deduced.append(
            {
                "key": _key_to_json(stub.key),
                "rule": stub.rule,
                "factor_omegas": [_omega_to_dict(o) for o in stub.factor_omegas],
            }
        )
    return {
        "format_version": FORMAT_VERSION,
        "kind": "causaloid",
        "regions": [list(r.locations) for r in causaloid.regions],
        "elementary": elementary,
        "composites": composites,
        "deduced": deduced,
        "rules": list(causaloid.rules),
    }


def causaloid_from_dict(doc: dict) -> Causaloid:
    try:
        if doc.get("kind") != "causaloid":
            raise SchemaError("document kind is not 'causaloid'")
        if doc.get("format_version") != FORMAT_VERSION:
            raise SchemaError(
                f"unsupported format_version {doc.get('format_version')!r}"
            )
        regions = tuple(Region(tuple(r)) for r in doc["regions"])
        elementary = []
        for item in doc["elementary"]:
            gamma = GammaSet(
                Region(tuple(item["region"])),
                tuple((tuple(a), tuple(s)) for a, s in item["labels"]),
            )
            elementary.append(
                TomographicLambda(
                    gamma=gamma,
                    omega=_omega_from_dict(item["omega"]),
                    matrix=_matrix_from_hex(item["matrix_hex"]),
                )
            )
        composites = []
        for item in doc["composites"]:
            factor_omegas = tuple(
                _omega_from_dict(o) for o in item["factor_omegas"]
            )
            entry = CompositionalLambda(
                composite=CompositeRegion(tuple(o.region for o in factor_omegas)),
                factor_omegas=factor_omegas,
                omega=_omega_from_dict(item["omega"]),
                matrix=_matrix_from_hex(item["matrix_hex"]),
            )
            composites.append((_key_from_json(item["key"]), entry))
        deduced = tuple(
            DeducedEntry(
                key=_key_from_json(item["key"]),
                rule=item["rule"],
                factor_omegas=tuple(
                    _omega_from_dict(o) for o in item["factor_omegas"]
                ),
            )
            for item in doc.get("deduced", [])
        )
        return Causaloid(
            regions=regions,
            elementary=tuple(elementary),
            composites=tuple(composites),
            deduced=deduced,
            rules=tuple(doc.get("rules", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed causaloid document: {exc}") from exc


def save_causaloid(causaloid: Causaloid, path: str) -> None:
    text = json.dumps(causaloid_to_dict(causaloid), indent=2, sort_keys=True)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_causaloid(path: str) -> Causaloid:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    return causaloid_from_dict(doc)
