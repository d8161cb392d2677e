"""First-level compression: fiducial label sets and expansion matrices.

A region's full probability list is linearly determined by the entries at
a fiducial subset of labels. The matrix that carries the fiducial list
back out to the full list is the region's expansion matrix; its rows are
the r-vectors of the labels and its columns are indexed by the fiducial
set. States are the fiducial probability lists themselves, one per
exterior configuration, and the generalized Born rule is their pairing
with r-vectors.
"""
from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContextMismatch,
    IncompleteTable,
    ResidualTooLarge,
    UnknownExterior,
)
from .operational import Region
from .tables import (
    ExteriorConfiguration,
    GammaSet,
    Label,
    MeasurementMatrix,
    ProbTable,
    greedy_independent_rows,
)

__all__ = [
    "OmegaSet",
    "TomographicLambda",
    "RVector",
    "StateVector",
    "fold_to_exterior",
    "build_measurement_matrix",
    "find_fiducial_set",
    "compute_tomographic_lambda",
    "r_vector",
    "state_vector",
    "born_rule",
    "clamp_probability",
]

DEFAULT_RANK_TOL = 1e-9
DEFAULT_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class OmegaSet:
    """A fiducial index subset of some ordered parent row set.

    ``row_kind`` is "gamma" when the parent rows are the labels of one
    region, and "omega-product" when they are multi-indices over factor
    fiducial sets (last factor fastest, lexicographic).
    """

    region: Region
    indices: tuple[int, ...]
    parent_size: int
    row_kind: str = "gamma"
    factors: tuple[Region, ...] | None = None
    dims: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.row_kind not in ("gamma", "omega-product"):
            raise ValueError(f"unknown row kind {self.row_kind!r}")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("fiducial indices must be strictly increasing")
        if self.indices and not (0 <= self.indices[0] and self.indices[-1] < self.parent_size):
            raise ValueError("fiducial indices out of parent range")
        if self.row_kind == "omega-product":
            if self.factors is None or self.dims is None:
                raise ValueError("product-kind sets need factors and dims")
            if len(self.factors) != len(self.dims):
                raise ValueError("one dim per factor is required")
            n = 1
            for d in self.dims:
                n *= d
            if n != self.parent_size:
                raise ValueError("dims do not multiply out to the parent size")
        elif self.factors is not None or self.dims is not None:
            raise ValueError("gamma-kind sets carry no factors or dims")

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class TomographicLambda:
    """Expansion matrix of one region: full rows from fiducial columns.

    Row alpha holds the r-vector of label alpha; rows at fiducial indices
    are standard basis vectors.
    """

    gamma: GammaSet
    omega: OmegaSet
    matrix: np.ndarray

    def __post_init__(self):
        if self.omega.row_kind != "gamma":
            raise ValueError("tomographic entries compress a gamma row set")
        if self.omega.region != self.gamma.region:
            raise ValueError("fiducial set and label set disagree on the region")
        if self.omega.parent_size != self.gamma.size:
            raise ValueError("fiducial parent size must equal the label count")
        if self.matrix.shape != (self.gamma.size, self.omega.size):
            raise ValueError(
                f"matrix shape {self.matrix.shape} != "
                f"{(self.gamma.size, self.omega.size)}"
            )
        eye = np.eye(self.omega.size)
        if not np.allclose(self.matrix[list(self.omega.indices)], eye, atol=1e-9):
            raise ValueError("fiducial rows must form the identity")
        self.matrix.setflags(write=False)

    @property
    def region(self) -> Region:
        return self.gamma.region


@dataclass(frozen=True, eq=False)
class RVector:
    """Measurement vector of one label, expressed over a fiducial context."""

    context: OmegaSet
    components: np.ndarray

    def __post_init__(self):
        if self.components.shape != (self.context.size,):
            raise ValueError("component count must match the context size")
        self.components.setflags(write=False)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Fiducial probability list of one exterior configuration."""

    context: OmegaSet
    components: np.ndarray

    def __post_init__(self):
        if self.components.shape != (self.context.size,):
            raise ValueError("component count must match the context size")
        if self.components.size:
            lo = float(self.components.min())
            hi = float(self.components.max())
            # direct table entries; only float dust may stick out
            if lo < -1e-10 or hi > 1 + 1e-10:
                raise ValueError("state components must lie in [0, 1]")
        self.components.setflags(write=False)


def fold_to_exterior(
    table: ProbTable, keep: Sequence[Region]
) -> tuple[np.ndarray, tuple[ExteriorConfiguration, ...]]:
    """Regroup a table so only ``keep`` regions stay on label axes.

    Every other region's label axis is folded into the exterior axis as
    extra conditioning, one (action, outcome) card per location. The kept
    axes appear in ``keep`` order; column order is row-major over the
    folded regions (table order) with the original exterior fastest.
    """
    keep = tuple(keep)
    keep_axes = [table.region_axis(r) for r in keep]
    if len(set(keep_axes)) != len(keep_axes):
        raise IncompleteTable("kept regions must be distinct")
    other_axes = [i for i in range(len(table.regions)) if i not in keep_axes]
    if not other_axes:
        perm = keep_axes + [len(table.regions)]
        vals = np.transpose(table.values, perm)
        return np.ascontiguousarray(vals), table.exteriors

    perm = keep_axes + other_axes + [len(table.regions)]
    vals = np.transpose(table.values, perm)
    keep_shape = vals.shape[: len(keep_axes)]
    vals = np.ascontiguousarray(vals).reshape(keep_shape + (-1,))

    folded: list[ExteriorConfiguration] = []
    other_gammas = [table.gammas[i] for i in other_axes]
    other_regions = [table.regions[i] for i in other_axes]
    for combo in itertools.product(*(g.labels for g in other_gammas)):
        extra: list[tuple[int, tuple[int, int]]] = []
        for region, (actions, outcomes) in zip(other_regions, combo):
            extra.extend(
                (x, (a, s))
                for x, a, s in zip(region.locations, actions, outcomes)
            )
        for ext in table.exteriors:
            cond = tuple(sorted(ext.conditioning + tuple(extra)))
            folded.append(
                ExteriorConfiguration(
                    ext.preparations, ext.effects, cond, ext.complete
                )
            )
    return vals, tuple(folded)


def build_measurement_matrix(table: ProbTable, region: Region) -> MeasurementMatrix:
    """Tabulate one region's label probabilities across all exteriors."""
    if region not in table.regions:
        raise IncompleteTable(
            f"table covers {', '.join(str(r) for r in table.regions)} "
            f"but not {region}"
        )
    vals, exteriors = fold_to_exterior(table, [region])
    gamma = table.gammas[table.region_axis(region)]
    return MeasurementMatrix(
        row_kind="gamma",
        row_keys=gamma.labels,
        exteriors=exteriors,
        values=vals,
        region=region,
    )


def find_fiducial_set(matrix: MeasurementMatrix, tol: float = DEFAULT_RANK_TOL) -> OmegaSet:
    """Greedy lowest-index-first choice of independent rows.

    The result is the lexicographically least maximal independent subset
    under the fixed row order, so repeated runs agree byte for byte.
    """
    if matrix.n_rows == 0:
        raise ValueError("cannot compress an empty matrix")
    chosen = greedy_independent_rows(matrix.values, tol)
    region = matrix.region
    if region is None:
        raise ValueError("measurement matrix carries no region")
    return OmegaSet(
        region=region,
        indices=chosen,
        parent_size=matrix.n_rows,
        row_kind=matrix.row_kind,
        factors=matrix.factors,
        dims=matrix.dims,
    )


def solve_expansion(
    values: np.ndarray, indices: Sequence[int], tol: float
) -> np.ndarray:
    """Express every row of ``values`` over the rows at ``indices``.

    Solved against the fiducial rows by orthogonal decomposition (least
    squares), never by inverting a submatrix. Rows at the fiducial
    indices are pinned to exact standard basis vectors; every row must
    reconstruct within ``tol * max(1, |row|)``.
    """
    idx = list(indices)
    fid = values[idx]
    coeff, *_ = np.linalg.lstsq(fid.T, values.T, rcond=None)
    lam = coeff.T
    lam[idx] = np.eye(len(idx))
    resid = np.linalg.norm(lam @ fid - values, axis=1)
    bounds = tol * np.maximum(1.0, np.linalg.norm(values, axis=1))
    bad = np.nonzero(resid > bounds)[0]
    if bad.size:
        worst = int(bad[np.argmax(resid[bad])])
        raise ResidualTooLarge(
            f"row {worst} reconstructs with residual {resid[worst]:.3e} "
            f"(bound {bounds[worst]:.3e}); the fiducial set does not span"
        )
    return lam


def compute_tomographic_lambda(
    matrix: MeasurementMatrix,
    omega: OmegaSet,
    tol: float = DEFAULT_RESIDUAL_TOL,
) -> TomographicLambda:
    """Solve for the expansion matrix of one region."""
    if matrix.row_kind != "gamma":
        raise ValueError("expected a gamma-row measurement matrix")
    if omega.region != matrix.region or omega.parent_size != matrix.n_rows:
        raise ContextMismatch("fiducial set does not describe this matrix")
    lam = solve_expansion(matrix.values, omega.indices, tol)
    gamma = GammaSet(matrix.region, matrix.row_keys)
    return TomographicLambda(gamma=gamma, omega=omega, matrix=lam)


def r_vector(label: Label, lam: TomographicLambda) -> RVector:
    """The measurement vector of one label: the matching expansion row."""
    row = lam.gamma.index_of(label)
    return RVector(context=lam.omega, components=lam.matrix[row].copy())


def state_vector(
    matrix: MeasurementMatrix, omega: OmegaSet, exterior_index: int
) -> StateVector:
    """The fiducial probability list of one exterior column."""
    if omega.parent_size != matrix.n_rows or omega.row_kind != matrix.row_kind:
        raise ContextMismatch("fiducial set does not describe this matrix")
    if not 0 <= exterior_index < len(matrix.exteriors):
        raise UnknownExterior(f"exterior index {exterior_index} out of range")
    comps = matrix.values[list(omega.indices), exterior_index].copy()
    return StateVector(context=omega, components=comps)


def born_rule(r: RVector, p: StateVector) -> float:
    """Linear pairing of a measurement vector with a state.

    Returns the raw inner product; float dust outside [0, 1] is clamped
    only at display time by clamp_probability.
    """
    if r.context != p.context:
        raise ContextMismatch("measurement and state use different fiducial sets")
    return float(r.components @ p.components)


def clamp_probability(value: float, tol: float = 1e-9) -> float:
    """Display-side clamp of float dust to [0, 1]."""
    if value < -tol or value > 1 + tol:
        raise ValueError(f"value {value} is not a probability within {tol}")
    return min(max(value, 0.0), 1.0)
