"""Prediction heralding: is a requested conditional exterior-independent?

A conditional probability deserves a single number only when the joint
measurement vector of the asked event is parallel to the summed vector of
its conditioning context. The parallelism defect is tested by projection
residual, which stays meaningful when components vanish. Queries that
fail the test get a concrete witness: two exterior configurations whose
direct conditionals disagree.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .causaloid import Causaloid
from .errors import (
    UnknownExterior,
    UnknownProcedure,
    UnknownLabel,
    ZeroDenominator,
    ZeroDenominatorVector,
)
from .operational import Region
from .tables import ExteriorConfiguration, Label, ProbTable
from .tomographic import fold_to_exterior, r_vector

__all__ = [
    "DEFAULT_HERALD_TOL",
    "HeraldQuery",
    "HeraldResult",
    "consistent_labels",
    "herald",
    "conditional_from_table",
    "conditional_sweep",
]

DEFAULT_HERALD_TOL = 1e-8
# conditionals below this joint weight are treated as division by zero
MIN_DENOMINATOR = 1e-12


@dataclass(frozen=True)
class HeraldQuery:
    """One conditional-probability request.

    The target fixes the asked label of one region; conditions fix labels
    of further regions; procedures pin the action assignment of every
    named region and must agree with the labels' action parts.
    """

    target: tuple[Region, Label]
    conditions: tuple[tuple[Region, Label], ...]
    procedures: tuple[tuple[Region, tuple[int, ...]], ...]

    def __post_init__(self):
        named = [self.target[0]] + [r for r, _ in self.conditions]
        seen: set[int] = set()
        for r in named:
            if seen & set(r.locations):
                raise ValueError("query regions must be pairwise disjoint")
            seen |= set(r.locations)
        procs = dict(self.procedures)
        if len(procs) != len(self.procedures):
            raise ValueError("one procedure per region is required")
        if set(procs) != set(named):
            raise ValueError("procedures must cover exactly the named regions")
        for region, (actions, _) in (self.target,) + self.conditions:
            if procs[region] != actions:
                raise ValueError(
                    f"label of {region} disagrees with its declared procedure"
                )

    @classmethod
    def from_labels(
        cls,
        target: tuple[Region, Label],
        conditions: Sequence[tuple[Region, Label]] = (),
    ) -> "HeraldQuery":
        conditions = tuple(conditions)
        procedures = tuple(
            (r, lab[0]) for r, lab in (target,) + conditions
        )
        return cls(target=target, conditions=conditions, procedures=procedures)

    @property
    def named_regions(self) -> tuple[Region, ...]:
        return tuple(
            sorted(
                [self.target[0]] + [r for r, _ in self.conditions],
                key=lambda r: r.locations,
            )
        )


@dataclass(frozen=True)
class HeraldResult:
    """Outcome of one heralding test.

    ``residual`` is the relative parallelism defect |u - p v| / |v|; ``p``
    is the raw ratio u.v / v.v, present only when the test passes.
    ``witness`` carries two exterior configurations with maximally
    disagreeing direct conditionals when the test fails and a table was
    supplied.
    """

    well_defined: bool
    p: float | None
    residual: float
    witness: (
        tuple[
            tuple[ExteriorConfiguration, float],
            tuple[ExteriorConfiguration, float],
        ]
        | None
    )

    def __post_init__(self):
        if self.well_defined and self.p is None:
            raise ValueError("a passing test must carry its probability")
        if not self.well_defined and self.p is not None:
            raise ValueError("a failing test carries no single probability")


def consistent_labels(
    causaloid: Causaloid, region: Region, actions: tuple[int, ...]
) -> tuple[Label, ...]:
    """All labels of a region that share one action assignment."""
    gamma = causaloid.tomographic(region).gamma
    try:
        hits = gamma.labels_for_action(actions)
    except UnknownLabel:
        raise UnknownProcedure(
            f"no label of {region} has action part {actions}"
        ) from None
    return tuple(gamma.labels[i] for i in hits)


def herald(
    causaloid: Causaloid,
    query: HeraldQuery,
    tol: float = DEFAULT_HERALD_TOL,
    table: ProbTable | None = None,
) -> HeraldResult:
    """Test whether the queried conditional is exterior-independent.

    Builds u as the joint vector of target plus conditions and v as the
    same joint with the target summed over all outcome-consistent labels.
    The conditional is declared well-defined iff u lies within tol of the
    ray through v, in units of |v|.
    """
    named = query.named_regions
    target_region, target_label = query.target
    fixed = dict(query.conditions)

    summed = consistent_labels(causaloid, target_region, target_label[0])
    u_parts = []
    v_parts = []
    for region in named:
        lam = causaloid.tomographic(region)
        if region == target_region:
            u_parts.append(r_vector(target_label, lam).components)
            acc = np.zeros(lam.omega.size)
            for lab in summed:
                acc = acc + r_vector(lab, lam).components
            v_parts.append(acc)
        else:
            comps = r_vector(fixed[region], lam).components
            u_parts.append(comps)
            v_parts.append(comps)

    if len(named) == 1:
        u, v = u_parts[0], v_parts[0]
    else:
        contexts = tuple(causaloid.tomographic(r).omega for r in named)
        entry = causaloid.product_entry(contexts)
        u = _chain_outer(u_parts) @ entry.matrix
        v = _chain_outer(v_parts) @ entry.matrix

    v_norm = float(np.linalg.norm(v))
    if v_norm <= tol:
        raise ZeroDenominatorVector(
            "the conditioning context sums to a vanishing vector; "
            "no normalizable conditional exists"
        )
    p_raw = float(u @ v) / float(v @ v)
    residual = float(np.linalg.norm(u - p_raw * v)) / v_norm
    if residual <= tol:
        return HeraldResult(
            well_defined=True, p=p_raw, residual=residual, witness=None
        )
    witness = None
    if table is not None:
        witness = _max_disagreement(table, query)
    return HeraldResult(
        well_defined=False, p=None, residual=residual, witness=witness
    )


def _chain_outer(parts: Sequence[np.ndarray]) -> np.ndarray:
    w = parts[0]
    for p in parts[1:]:
        w = np.multiply.outer(w, p)
    return w.reshape(-1)


def _folded_query_view(
    table: ProbTable, query: HeraldQuery
) -> tuple[np.ndarray, tuple[ExteriorConfiguration, ...], tuple[int, ...], int, tuple[int, ...]]:
    """Fold the table down to the query's regions, in canonical order.

    Returns the folded values, folded exteriors, the fixed label index per
    region axis, the target axis, and the consistent target row indices.
    """
    named = query.named_regions
    vals, exteriors = fold_to_exterior(table, named)
    fixed = dict(query.conditions)
    fixed[query.target[0]] = query.target[1]
    sel = []
    for r in named:
        gamma = table.gammas[table.region_axis(r)]
        sel.append(gamma.index_of(fixed[r]))
    t_axis = named.index(query.target[0])
    t_gamma = table.gammas[table.region_axis(query.target[0])]
    summed = t_gamma.labels_for_action(query.target[1][0])
    return vals, exteriors, tuple(sel), t_axis, summed


def conditional_from_table(
    table: ProbTable, query: HeraldQuery, exterior_index: int
) -> float:
    """The direct conditional at one folded exterior configuration.

    Numerator: joint weight of all named labels. Denominator: the same
    with the target summed over outcome-consistent labels. This is the
    diagnostic route used to exhibit exterior-dependence.
    """
    vals, exteriors, sel, t_axis, summed = _folded_query_view(table, query)
    if not 0 <= exterior_index < len(exteriors):
        raise UnknownExterior(f"exterior index {exterior_index} out of range")
    num = float(vals[sel][exterior_index])
    den = 0.0
    for row in summed:
        alt = list(sel)
        alt[t_axis] = row
        den += float(vals[tuple(alt)][exterior_index])
    if den <= MIN_DENOMINATOR:
        raise ZeroDenominator(
            f"conditioning event has probability {den:.3e} at exterior "
            f"{exterior_index}"
        )
    return num / den


def conditional_sweep(
    table: ProbTable, query: HeraldQuery
) -> tuple[tuple[ExteriorConfiguration, float | None], ...]:
    """The direct conditional at every folded exterior; None where undefined."""
    vals, exteriors, sel, t_axis, summed = _folded_query_view(table, query)
    num = vals[sel]
    den = np.zeros_like(num)
    for row in summed:
        alt = list(sel)
        alt[t_axis] = row
        den = den + vals[tuple(alt)]
    out: list[tuple[ExteriorConfiguration, float | None]] = []
    for j, ext in enumerate(exteriors):
        if den[j] <= MIN_DENOMINATOR:
            out.append((ext, None))
        else:
            out.append((ext, float(num[j] / den[j])))
    return tuple(out)


def _max_disagreement(table: ProbTable, query: HeraldQuery):
    values = [
        (ext, p) for ext, p in conditional_sweep(table, query) if p is not None
    ]
    if len(values) < 2:
        return None
    hi = max(values, key=lambda pair: pair[1])
    lo = min(values, key=lambda pair: pair[1])
    if hi[1] == lo[1]:
        return None
    return (hi, lo)
