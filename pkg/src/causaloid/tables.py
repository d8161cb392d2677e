"""Label sets, exterior configurations, and probability tables.

A measurement label pairs the action part and the outcome part of what
happened inside a region, one component per location. Everything outside
the probed regions (preparations, terminal effects, conditioning at
unprobed locations) is folded into an exterior-configuration axis; the
rank structure of a table over that axis is what the compression layers
consume.
"""
from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import UnknownExterior, UnknownLabel, UnknownRegion
from .operational import Region

__all__ = [
    "Label",
    "GammaSet",
    "ExteriorConfiguration",
    "ProbTable",
    "MeasurementMatrix",
    "greedy_independent_rows",
]

# (action per location, outcome per location), aligned with the region's
# sorted location tuple
Label = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass(frozen=True)
class GammaSet:
    """The ordered measurement labels of one region."""

    region: Region
    labels: tuple[Label, ...]

    def __post_init__(self):
        k = len(self.region)
        for actions, outcomes in self.labels:
            if len(actions) != k or len(outcomes) != k:
                raise ValueError("label component count must match the region size")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        if list(self.labels) != sorted(self.labels):
            raise ValueError("labels must be sorted by (action tuple, outcome tuple)")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index_of(self, label: Label) -> int:
        try:
            return self._lookup()[label]
        except KeyError:
            raise UnknownLabel(f"label {label} is not in the label set of {self.region}") from None

    def _lookup(self) -> dict[Label, int]:
        cache = getattr(self, "_cached_lookup", None)
        if cache is None:
            cache = {lab: i for i, lab in enumerate(self.labels)}
            object.__setattr__(self, "_cached_lookup", cache)
        return cache

    def action_tuples(self) -> tuple[tuple[int, ...], ...]:
        seen: dict[tuple[int, ...], None] = {}
        for actions, _ in self.labels:
            seen.setdefault(actions, None)
        return tuple(seen)

    def labels_for_action(self, actions: tuple[int, ...]) -> tuple[int, ...]:
        """Indices of the labels sharing one action assignment."""
        hits = tuple(i for i, (a, _) in enumerate(self.labels) if a == actions)
        if not hits:
            raise UnknownLabel(f"no label of {self.region} has action part {actions}")
        return hits


@dataclass(frozen=True)
class ExteriorConfiguration:
    """One choice of everything outside the probed regions.

    ``preparations`` and ``effects`` hold one index per chain (in chain
    order); ``conditioning`` fixes an (action, outcome) card at each
    unprobed location. ``complete`` records whether every chain's terminal
    effect for this configuration is a complete one.
    """

    preparations: tuple[int, ...]
    effects: tuple[int, ...]
    conditioning: tuple[tuple[int, tuple[int, int]], ...]
    complete: bool

    def __post_init__(self):
        locs = [x for x, _ in self.conditioning]
        if locs != sorted(locs) or len(set(locs)) != len(locs):
            raise ValueError("conditioning must be sorted by location and duplicate-free")

    def describe(self) -> dict:
        out: dict = {
            "preparations": list(self.preparations),
            "effects": list(self.effects),
        }
        if self.conditioning:
            out["conditioning"] = {str(x): [a, s] for x, (a, s) in self.conditioning}
        return out


@dataclass(frozen=True, eq=False)
class ProbTable:
    """Joint outcome probabilities over region labels and exteriors.

    ``values`` has one axis per region (in ``regions`` order) plus a final
    exterior axis. Entries are joint probabilities of all region outcomes
    and all exterior outcome parts, given the actions.
    """

    regions: tuple[Region, ...]
    gammas: tuple[GammaSet, ...]
    exteriors: tuple[ExteriorConfiguration, ...]
    values: np.ndarray

    def __post_init__(self):
        expected = tuple(g.size for g in self.gammas) + (len(self.exteriors),)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        for r, g in zip(self.regions, self.gammas):
            if g.region != r:
                raise ValueError("gamma sets must align with the region list")
        self.values.setflags(write=False)

    @property
    def n_entries(self) -> int:
        return int(self.values.size)

    def region_axis(self, region: Region) -> int:
        try:
            return self.regions.index(region)
        except ValueError:
            raise UnknownRegion(f"table has no region {region}") from None

    def value(self, labels: Sequence[Label], exterior_index: int) -> float:
        if len(labels) != len(self.regions):
            raise UnknownLabel("one label per table region is required")
        if not 0 <= exterior_index < len(self.exteriors):
            raise UnknownExterior(f"exterior index {exterior_index} out of range")
        idx = tuple(g.index_of(lab) for g, lab in zip(self.gammas, labels))
        return float(self.values[idx + (exterior_index,)])

    def validate(self, tol: float = 1e-10) -> None:
        """Check probability bounds and per-procedure outcome sums."""
        v = self.values
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise ValueError("table entries must lie in [0, 1]")
        # For each exterior and each joint action choice the outcome sum is a
        # sub-probability; with complete terminal effects and no conditioning
        # outcomes in the exterior it must be exactly 1.
        groups = [
            [g.labels_for_action(a) for a in g.action_tuples()] for g in self.gammas
        ]
        for combo in itertools.product(*groups):
            block = v[np.ix_(*combo)] if combo else v
            sums = block.sum(axis=tuple(range(len(self.regions))))
            if sums.max() > 1 + tol:
                raise ValueError("outcome sums exceed 1 for a fixed procedure")
            for j, ext in enumerate(self.exteriors):
                if ext.complete and not ext.conditioning and abs(sums[j] - 1) > tol:
                    raise ValueError(
                        "complete terminal effects must give unit outcome sums"
                    )


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Rows of joint probabilities, one per row key, over the exterior axis.

    ``row_kind`` is "gamma" when rows are the labels of one region and
    "omega-product" when rows are multi-indices over per-factor fiducial
    sets (the last factor's index varying fastest).
    """

    row_kind: str
    row_keys: tuple
    exteriors: tuple[ExteriorConfiguration, ...]
    values: np.ndarray
    region: Region | None = None
    factors: tuple[Region, ...] | None = None
    dims: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.row_kind not in ("gamma", "omega-product"):
            raise ValueError(f"unknown row kind {self.row_kind!r}")
        if self.values.shape != (len(self.row_keys), len(self.exteriors)):
            raise ValueError("matrix shape must match row keys x exteriors")
        if self.row_kind == "omega-product":
            if self.dims is None or self.factors is None:
                raise ValueError("omega-product matrices need dims and factors")
            expected = 1
            for d in self.dims:
                expected *= d
            if expected != len(self.row_keys):
                raise ValueError("dims do not multiply out to the row count")
        self.values.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)


def greedy_independent_rows(values: np.ndarray, tol: float) -> tuple[int, ...]:
    """Lowest-index maximal set of linearly independent rows.

    Scans rows in order and keeps a row when its residual after projection
    onto the span of the rows already kept exceeds ``tol * max(1, |row|)``.
    Two projection passes keep the retained basis orthonormal to workable
    precision.
    """
    rows = np.asarray(values, dtype=float)
    if rows.ndim != 2:
        raise ValueError("expected a 2-d array of rows")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    chosen: list[int] = []
    basis = np.zeros((0, rows.shape[1]))
    for i in range(rows.shape[0]):
        v = rows[i]
        r = v - basis.T @ (basis @ v)
        r -= basis.T @ (basis @ r)
        norm = float(np.linalg.norm(r))
        if norm > tol * max(1.0, float(np.linalg.norm(v))):
            chosen.append(i)
            basis = np.vstack([basis, r / norm])
    return tuple(chosen)
