"""Exact theory oracles: classical chains and quantum circuits.

Both theories compile to the same wire algebra. A chain carries a real
vector (a probability distribution, or Hermitian-basis coordinates of a
density operator); each location applies one real transfer matrix per
(action, outcome); preparations seed the vector and terminal effects read
it out. Joint probabilities are therefore exact matrix folds, and tables
over whole label sets are assembled with vectorized contractions.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .errors import (
    BackendError,
    DimensionMismatch,
    SpanDeficient,
    TableTooLarge,
    UnknownExterior,
    UnknownProcedure,
    UnknownRegion,
)
from .operational import Card, FullPack, ProcedureSpec, Region
from .tables import (
    ExteriorConfiguration,
    GammaSet,
    Label,
    ProbTable,
    greedy_independent_rows,
)

__all__ = [
    "Chain",
    "Preparation",
    "TerminalEffect",
    "InstrumentFamily",
    "TheorySpec",
    "ClassicalSpec",
    "QuantumSpec",
    "SpanValidation",
    "DEFAULT_TABLE_CAP",
    "polariser_family",
    "probe_reprepare_family",
    "unitary_family",
    "kraus_family",
    "probe_reset_family",
    "deterministic_family",
    "kernel_family",
    "ic_preparations",
    "ic_effects",
    "complete_effect",
    "enumerate_labels",
    "joint_prob",
    "build_prob_table",
    "validate_exterior_span",
    "conditioning_span",
    "full_pack",
]

DEFAULT_TABLE_CAP = 10_000_000


@dataclass(frozen=True)
class Chain:
    """One wire: an ordered run of locations sharing a system."""

    name: str
    size: int  # alphabet size or Hilbert-space dimension
    locations: tuple[int, ...]

    def __post_init__(self):
        if self.size < 2:
            raise BackendError(f"chain {self.name!r} needs size >= 2")
        if not self.locations or len(set(self.locations)) != len(self.locations):
            raise BackendError(f"chain {self.name!r} needs distinct locations")


@dataclass(frozen=True, eq=False)
class Preparation:
    name: str
    vector: np.ndarray

    def __post_init__(self):
        self.vector.setflags(write=False)


@dataclass(frozen=True, eq=False)
class TerminalEffect:
    name: str
    vector: np.ndarray
    complete: bool

    def __post_init__(self):
        self.vector.setflags(write=False)


@dataclass(frozen=True, eq=False)
class InstrumentFamily:
    """All actions available at one location.

    ``actions[a][s]`` is the transfer matrix applied when action ``a``
    produces outcome ``s``. Summed over outcomes every action must preserve
    total probability.
    """

    location: int
    action_names: tuple[str, ...]
    actions: tuple[tuple[np.ndarray, ...], ...]
    outcome_names: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.actions) != len(self.action_names):
            raise BackendError("action names must align with actions")
        if len(self.outcome_names) != len(self.actions):
            raise BackendError("outcome names must align with actions")
        for fam, names in zip(self.actions, self.outcome_names):
            if not fam or len(fam) != len(names):
                raise BackendError("every action needs named outcomes")
            for T in fam:
                T.setflags(write=False)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def n_outcomes(self, action: int) -> int:
        if not 0 <= action < len(self.actions):
            raise UnknownProcedure(
                f"location {self.location} has no action {action}"
            )
        return len(self.actions[action])

    def labels(self) -> list[tuple[int, int]]:
        return [(a, s) for a in range(len(self.actions)) for s in range(len(self.actions[a]))]

    def stacked(self) -> np.ndarray:
        """All per-label transfer matrices as one (n_labels, D, D) array."""
        cache = getattr(self, "_cached_stack", None)
        if cache is None:
            cache = np.stack([self.actions[a][s] for a, s in self.labels()])
            cache.setflags(write=False)
            object.__setattr__(self, "_cached_stack", cache)
        return cache


@dataclass(frozen=True, eq=False)
class TheorySpec:
    """A full experimental arrangement, ready for exact evaluation."""

    kind = "abstract"

    chains: tuple[Chain, ...]
    instruments: tuple[InstrumentFamily, ...]  # sorted by location
    preparations: tuple[tuple[Preparation, ...], ...]  # per chain
    effects: tuple[tuple[TerminalEffect, ...], ...]  # per chain
    conditioning_actions: tuple[tuple[int, tuple[int, ...]], ...]  # (loc, actions)
    extra_preparations: tuple[tuple[Preparation, ...], ...] = ()
    extra_effects: tuple[tuple[TerminalEffect, ...], ...] = ()

    def __post_init__(self):
        locs = [f.location for f in self.instruments]
        if locs != sorted(locs) or len(set(locs)) != len(locs):
            raise BackendError("instrument families must be sorted by unique location")
        chain_locs = [x for c in self.chains for x in c.locations]
        if sorted(chain_locs) != locs:
            raise BackendError("chains and instrument locations must agree")
        if len(self.preparations) != len(self.chains) or len(self.effects) != len(self.chains):
            raise BackendError("preparations and effects are per-chain")
        for chain, preps, effs in zip(self.chains, self.preparations, self.effects):
            d = self.vec_dim(chain)
            for p in preps:
                if p.vector.shape != (d,):
                    raise DimensionMismatch(
                        f"preparation {p.name!r} does not fit chain {chain.name!r}"
                    )
            if not preps or not effs:
                raise BackendError(f"chain {chain.name!r} needs preparations and effects")
            for e in effs:
                if e.vector.shape != (d,):
                    raise DimensionMismatch(
                        f"effect {e.name!r} does not fit chain {chain.name!r}"
                    )
        for fam in self.instruments:
            d = self.vec_dim(self.chain_of(fam.location))
            for group in fam.actions:
                for T in group:
                    if T.shape != (d, d):
                        raise DimensionMismatch(
                            f"instrument at location {fam.location} has a "
                            f"{T.shape} transfer matrix on a size-{d} wire"
                        )
            self._check_total_probability(fam)
        cond_locs = [x for x, _ in self.conditioning_actions]
        if cond_locs != sorted(cond_locs) or len(set(cond_locs)) != len(cond_locs):
            raise BackendError("conditioning restrictions must be sorted by location")
        for x, acts in self.conditioning_actions:
            fam = self.family(x)
            for a in acts:
                if not 0 <= a < fam.n_actions:
                    raise UnknownProcedure(f"conditioning action {a} unknown at location {x}")

    # -- structural helpers -------------------------------------------------

    def vec_dim(self, chain: Chain) -> int:
        return chain.size if self.kind == "classical" else chain.size * chain.size

    def total_covector(self, chain: Chain) -> np.ndarray:
        if self.kind == "classical":
            return np.ones(chain.size)
        return ops.trace_covector(chain.size)

    def chain_of(self, location: int) -> Chain:
        for c in self.chains:
            if location in c.locations:
                return c
        raise UnknownRegion(f"no chain contains location {location}")

    def chain_index(self, chain: Chain) -> int:
        return self.chains.index(chain)

    def family(self, location: int) -> InstrumentFamily:
        for f in self.instruments:
            if f.location == location:
                return f
        raise UnknownRegion(f"no instrument family at location {location}")

    def locations(self) -> tuple[int, ...]:
        return tuple(f.location for f in self.instruments)

    def allowed_conditioning(self, location: int) -> tuple[int, ...]:
        for x, acts in self.conditioning_actions:
            if x == location:
                return acts
        return tuple(range(self.family(location).n_actions))

    def _check_total_probability(self, fam: InstrumentFamily) -> None:
        chain = self.chain_of(fam.location)
        t = self.total_covector(chain)
        for a, group in enumerate(fam.actions):
            total = np.zeros_like(group[0])
            for T in group:
                if self.kind == "classical" and T.min() < -1e-12:
                    raise BackendError(
                        f"classical kernel has negative entries "
                        f"(location {fam.location}, action {a})"
                    )
                total = total + T
            if not np.allclose(t @ total, t, atol=1e-10):
                raise BackendError(
                    f"action {a} at location {fam.location} does not preserve "
                    f"total probability"
                )

    # -- sampling -----------------------------------------------------------

    def sample_cards(
        self,
        procedure: ProcedureSpec,
        rng: np.random.Generator,
        preparation_choice: Mapping[str, int] | None = None,
    ) -> tuple[Card, ...]:
        """Draw the cards of one run; outcomes sampled location by location.

        The preparation defaults to each chain's first declared one; pass
        ``preparation_choice`` (chain name -> index) to override.
        """
        choice = dict(preparation_choice or {})
        cards = []
        for ci, chain in enumerate(self.chains):
            pi = choice.get(chain.name, 0)
            if not 0 <= pi < len(self.preparations[ci]):
                raise UnknownExterior(
                    f"chain {chain.name!r} has no preparation {pi}"
                )
            v = self.preparations[ci][pi].vector.copy()
            t = self.total_covector(chain)
            for loc in chain.locations:
                fam = self.family(loc)
                a = procedure.action_at(loc)
                if not 0 <= a < fam.n_actions:
                    raise UnknownProcedure(f"location {loc} has no action {a}")
                weights = np.array([float(t @ (T @ v)) for T in fam.actions[a]])
                weights = np.clip(weights, 0.0, None)
                wsum = float(weights.sum())
                if wsum <= 0:
                    raise BackendError(
                        f"all outcomes at location {loc} have zero probability"
                    )
                s = int(rng.choice(len(weights), p=weights / wsum))
                cards.append(Card(loc, a, s))
                v = fam.actions[a][s] @ v
        return tuple(cards)


class ClassicalSpec(TheorySpec):
    kind = "classical"


class QuantumSpec(TheorySpec):
    kind = "quantum"


# ---------------------------------------------------------------------------
# instrument family constructors
# ---------------------------------------------------------------------------

def polariser_family(location: int, angles_deg: Sequence[float]) -> InstrumentFamily:
    """Two-outcome projective instruments at the given angles (dimension 2).

    Outcome 0 passes (projects onto the angle), outcome 1 absorbs.
    """
    if not angles_deg:
        raise BackendError("a polariser needs at least one angle")
    actions = []
    names = []
    for angle in angles_deg:
        P = ops.projector_at_angle(float(angle))
        Q = np.eye(2) - P
        actions.append(
            (ops.kraus_to_transfer([P], 2), ops.kraus_to_transfer([Q], 2))
        )
        names.append(f"polariser@{_fmt_angle(angle)}")
    outcome_names = tuple(("pass", "absorb") for _ in actions)
    return InstrumentFamily(location, tuple(names), tuple(actions), outcome_names)


def _fmt_angle(angle: float) -> str:
    return f"{float(angle):g}deg"


def probe_reprepare_family(location: int, dim: int) -> InstrumentFamily:
    """Informationally complete quantum family: binary probe, then reprepare.

    Action (m, j) tests the rank-1 projector P_m and emits the fixed state
    sigma_j regardless of the result; outcome 1 means the probe fired.
    The per-outcome maps are rho -> Tr[P_m rho] sigma_j and
    rho -> Tr[(I - P_m) rho] sigma_j, whose transfer matrices are rank-1.
    """
    kets = ops.ic_pure_kets(dim)
    t = ops.trace_covector(dim)
    actions = []
    names = []
    for mname, mket in kets:
        w = ops.operator_coords(ops.density_from_ket(mket), dim)
        for jname, jket in kets:
            v = ops.operator_coords(ops.density_from_ket(jket), dim)
            T_hit = np.outer(v, w)
            T_miss = np.outer(v, t - w)
            actions.append((T_miss, T_hit))
            names.append(f"probe[{mname}]>reset[{jname}]")
    outcome_names = tuple(("miss", "hit") for _ in actions)
    return InstrumentFamily(location, tuple(names), tuple(actions), outcome_names)


def unitary_family(location: int, dim: int, names: Sequence[str]) -> InstrumentFamily:
    if not names:
        raise BackendError("a unitary family needs at least one gate name")
    actions = []
    for name in names:
        U = ops.named_unitary(name, dim)
        actions.append((ops.kraus_to_transfer([U], dim),))
    outcome_names = tuple(("done",) for _ in actions)
    return InstrumentFamily(location, tuple(names), tuple(actions), outcome_names)


def kraus_family(
    location: int,
    dim: int,
    actions: Sequence[Sequence[Sequence[np.ndarray]]],
    action_names: Sequence[str] | None = None,
) -> InstrumentFamily:
    """Explicit instruments: per action, per outcome, a list of Kraus operators."""
    if not actions:
        raise BackendError("an instrument needs at least one action")
    mats = []
    for idx, outcome_kraus in enumerate(actions):
        if not outcome_kraus:
            raise BackendError(f"action {idx} needs at least one outcome")
        mats.append(
            tuple(ops.kraus_to_transfer(list(ks), dim) for ks in outcome_kraus)
        )
    names = tuple(action_names) if action_names else tuple(
        f"kraus{idx}" for idx in range(len(actions))
    )
    outcome_names = tuple(
        tuple(f"s{s}" for s in range(len(group))) for group in mats
    )
    return InstrumentFamily(location, names, tuple(mats), outcome_names)


def probe_reset_family(location: int, alphabet: int) -> InstrumentFamily:
    """Classical read-and-reset family: observe the symbol, emit a fixed one."""
    actions = []
    names = []
    for j in range(alphabet):
        group = []
        for s in range(alphabet):
            T = np.zeros((alphabet, alphabet))
            T[j, s] = 1.0
            group.append(T)
        actions.append(tuple(group))
        names.append(f"read>reset[{j}]")
    outcome_names = tuple(
        tuple(f"saw{s}" for s in range(alphabet)) for _ in actions
    )
    return InstrumentFamily(location, tuple(names), tuple(actions), outcome_names)


def deterministic_family(location: int, alphabet: int, maps: Sequence[str]) -> InstrumentFamily:
    """Single-outcome classical kernels by name: identity, cycle, reset:<j>, uniform."""
    if not maps:
        raise BackendError("a deterministic family needs at least one map")
    actions = []
    for name in maps:
        if name == "identity":
            T = ops.permutation_kernel(alphabet, 0)
        elif name == "cycle":
            T = ops.permutation_kernel(alphabet, 1)
        elif name == "uniform":
            T = ops.uniform_kernel(alphabet)
        elif name.startswith("reset:"):
            T = ops.reset_kernel(alphabet, int(name.split(":", 1)[1]))
        else:
            raise BackendError(f"unknown classical map {name!r}")
        actions.append((T,))
    outcome_names = tuple(("done",) for _ in actions)
    return InstrumentFamily(location, tuple(maps), tuple(actions), outcome_names)


def kernel_family(
    location: int,
    alphabet: int,
    actions: Sequence[Sequence[np.ndarray]],
    action_names: Sequence[str] | None = None,
) -> InstrumentFamily:
    """Explicit classical instruments: per action, per outcome, a kernel."""
    mats = []
    for group in actions:
        prepared = []
        for T in group:
            T = np.asarray(T, dtype=float)
            if T.shape != (alphabet, alphabet):
                raise DimensionMismatch(
                    f"kernel shape {T.shape} does not match alphabet {alphabet}"
                )
            prepared.append(T)
        mats.append(tuple(prepared))
    names = tuple(action_names) if action_names else tuple(
        f"kernel{idx}" for idx in range(len(mats))
    )
    outcome_names = tuple(
        tuple(f"s{s}" for s in range(len(group))) for group in mats
    )
    return InstrumentFamily(location, names, tuple(mats), outcome_names)


# ---------------------------------------------------------------------------
# preparations and effects
# ---------------------------------------------------------------------------

def ic_preparations(kind: str, size: int) -> tuple[Preparation, ...]:
    if kind == "classical":
        return tuple(
            Preparation(f"point{j}", np.eye(size)[j].copy()) for j in range(size)
        )
    return tuple(
        Preparation(name, ops.operator_coords(ops.density_from_ket(ket), size))
        for name, ket in ops.ic_pure_kets(size)
    )


def ic_effects(kind: str, size: int) -> tuple[TerminalEffect, ...]:
    if kind == "classical":
        return tuple(
            TerminalEffect(f"read{j}", np.eye(size)[j].copy(), False)
            for j in range(size)
        )
    return tuple(
        TerminalEffect(
            name, ops.operator_coords(ops.density_from_ket(ket), size), False
        )
        for name, ket in ops.ic_pure_kets(size)
    )


def complete_effect(kind: str, size: int) -> TerminalEffect:
    if kind == "classical":
        return TerminalEffect("discard", np.ones(size), True)
    return TerminalEffect(
        "discard", ops.operator_coords(np.eye(size, dtype=complex), size), True
    )


def _extra_preparations(kind: str, size: int) -> tuple[Preparation, ...]:
    if kind == "classical":
        out = [Preparation("uniform", np.full(size, 1.0 / size))]
        for j in range(size):
            for k in range(j + 1, size):
                v = np.zeros(size)
                v[j] = v[k] = 0.5
                out.append(Preparation(f"mix{j}{k}", v))
        return tuple(out)
    out = [
        Preparation(
            name, ops.operator_coords(ops.density_from_ket(ket), size)
        )
        for name, ket in ops.extra_pure_kets(size)
    ]
    out.append(
        Preparation(
            "maximally-mixed",
            ops.operator_coords(np.eye(size, dtype=complex) / size, size),
        )
    )
    return tuple(out)


def _extra_effects(kind: str, size: int) -> tuple[TerminalEffect, ...]:
    if kind == "classical":
        out = [TerminalEffect("half", np.full(size, 0.5), False)]
        for j in range(size):
            for k in range(j + 1, size):
                v = np.zeros(size)
                v[j] = v[k] = 1.0
                out.append(TerminalEffect(f"read{j}or{k}", v, False))
        return tuple(out)
    out = [
        TerminalEffect(
            name, ops.operator_coords(ops.density_from_ket(ket), size), False
        )
        for name, ket in ops.extra_pure_kets(size)
    ]
    out.append(
        TerminalEffect(
            "half",
            ops.operator_coords(np.eye(size, dtype=complex) / 2, size),
            False,
        )
    )
    return tuple(out)


# ---------------------------------------------------------------------------
# label enumeration and exact probabilities
# ---------------------------------------------------------------------------

def enumerate_labels(spec: TheorySpec, region: Region) -> GammaSet:
    """All measurement labels of a region, sorted by (action tuple, outcome tuple)."""
    per_loc = []
    for loc in region.locations:
        fam = spec.family(loc)
        per_loc.append(fam.labels())
    labels = [
        (tuple(a for a, _ in combo), tuple(s for _, s in combo))
        for combo in itertools.product(*per_loc)
    ]
    labels.sort()
    return GammaSet(region, tuple(labels))


def _exterior_axes(
    spec: TheorySpec, probed: Iterable[int]
) -> tuple[list[int], list[list[tuple[int, int]]], list[int], list[int]]:
    """Enumeration bounds for the exterior product axis."""
    probed = set(probed)
    cond_locs = sorted(x for x in spec.locations() if x not in probed)
    cond_choices = []
    for x in cond_locs:
        fam = spec.family(x)
        pairs = [
            (a, s)
            for a in spec.allowed_conditioning(x)
            for s in range(fam.n_outcomes(a))
        ]
        cond_choices.append(pairs)
    prep_counts = [len(p) for p in spec.preparations]
    eff_counts = [len(e) for e in spec.effects]
    return cond_locs, cond_choices, prep_counts, eff_counts


def enumerate_exteriors(
    spec: TheorySpec, probed: Iterable[int]
) -> tuple[ExteriorConfiguration, ...]:
    cond_locs, cond_choices, prep_counts, eff_counts = _exterior_axes(spec, probed)
    out = []
    for preps in itertools.product(*(range(n) for n in prep_counts)):
        for conds in itertools.product(*cond_choices):
            for effs in itertools.product(*(range(n) for n in eff_counts)):
                complete = all(
                    spec.effects[ci][e].complete for ci, e in enumerate(effs)
                )
                out.append(
                    ExteriorConfiguration(
                        preps,
                        effs,
                        tuple(zip(cond_locs, conds)),
                        complete,
                    )
                )
    return tuple(out)


def joint_prob(
    spec: TheorySpec,
    assignment: Mapping[Region, Label],
    exterior: ExteriorConfiguration,
) -> float:
    """Exact probability of one joint label choice under one exterior.

    Multiplicative across chains: disconnected wiring cannot correlate.
    """
    loc_card: dict[int, tuple[int, int]] = {}
    for region, (actions, outcomes) in assignment.items():
        for loc, a, s in zip(region.locations, actions, outcomes):
            if loc in loc_card:
                raise UnknownRegion(f"location {loc} assigned twice")
            loc_card[loc] = (a, s)
    conditioned = dict(exterior.conditioning)
    p = 1.0
    for ci, chain in enumerate(spec.chains):
        pi = exterior.preparations[ci]
        ei = exterior.effects[ci]
        if not 0 <= pi < len(spec.preparations[ci]):
            raise UnknownExterior(f"chain {chain.name!r} has no preparation {pi}")
        if not 0 <= ei < len(spec.effects[ci]):
            raise UnknownExterior(f"chain {chain.name!r} has no effect {ei}")
        v = spec.preparations[ci][pi].vector
        for loc in chain.locations:
            if loc in loc_card:
                a, s = loc_card.pop(loc)
            elif loc in conditioned:
                a, s = conditioned.pop(loc)
            else:
                raise UnknownRegion(
                    f"location {loc} is neither probed nor conditioned"
                )
            fam = spec.family(loc)
            if not 0 <= a < fam.n_actions:
                raise UnknownProcedure(f"location {loc} has no action {a}")
            if not 0 <= s < fam.n_outcomes(a):
                raise UnknownProcedure(
                    f"action {a} at location {loc} has no outcome {s}"
                )
            v = fam.actions[a][s] @ v
        p *= float(spec.effects[ci][ei].vector @ v)
    if loc_card:
        raise UnknownRegion(f"labels assigned outside any chain: {sorted(loc_card)}")
    if conditioned:
        raise UnknownExterior(
            f"conditioning at locations outside any chain: {sorted(conditioned)}"
        )
    return p


def _chain_label_tensor(
    spec: TheorySpec,
    chain: Chain,
    chain_probed: list[int],
    prep_index: int,
    eff_index: int,
    cond: Mapping[int, tuple[int, int]],
) -> np.ndarray:
    """Probabilities over the chain's probed-location labels, one exterior.

    Returns an array with one axis per probed location (wire order).
    """
    v = spec.preparations[spec.chain_index(chain)][prep_index].vector
    ci = spec.chain_index(chain)
    acc = v[np.newaxis, :]  # leading flat axis over probed-label combos
    shape: list[int] = []
    for loc in chain.locations:
        fam = spec.family(loc)
        if loc in chain_probed:
            stack = fam.stacked()  # (n_labels, D, D)
            acc = np.einsum("kmn,cn->ckm", stack, acc).reshape(-1, stack.shape[1])
            shape.append(stack.shape[0])
        else:
            a, s = cond[loc]
            acc = acc @ fam.actions[a][s].T
    out = acc @ spec.effects[ci][eff_index].vector
    return out.reshape(shape) if shape else out.reshape(())


def build_prob_table(
    spec: TheorySpec,
    regions: Sequence[Region],
    cap: int = DEFAULT_TABLE_CAP,
) -> ProbTable:
    """Exact joint table over the given disjoint regions.

    Everything not probed is swept as exterior: preparations and terminal
    effects per chain, plus one (action, outcome) conditioning choice per
    unprobed location.
    """
    regions = tuple(regions)
    seen: set[int] = set()
    for r in regions:
        if seen & set(r.locations):
            raise UnknownRegion("table regions must be pairwise disjoint")
        seen |= set(r.locations)
    for loc in seen:
        spec.family(loc)  # raises UnknownRegion if not instrumented
    gammas = tuple(enumerate_labels(spec, r) for r in regions)
    exteriors = enumerate_exteriors(spec, seen)
    n_entries = len(exteriors)
    for g in gammas:
        n_entries *= g.size
    if n_entries > cap:
        raise TableTooLarge(
            f"table would hold {n_entries} entries, above the cap of {cap}"
        )
    if not exteriors:
        raise UnknownExterior("the scenario declares no exterior configurations")

    # per-location label axes in (chain, wire-position) order
    probed_locs = sorted(seen)
    cols = []
    for ext in exteriors:
        cond = dict(ext.conditioning)
        parts = []
        for chain in spec.chains:
            chain_probed = [x for x in chain.locations if x in seen]
            ci = spec.chain_index(chain)
            t = _chain_label_tensor(
                spec, chain, chain_probed, ext.preparations[ci],
                ext.effects[ci], cond,
            )
            parts.append((chain_probed, t))
        # outer product across chains, then order axes by ascending location
        axes_locs: list[int] = []
        full = np.ones(())
        for chain_probed, t in parts:
            full = np.multiply.outer(full, t)
            axes_locs.extend(chain_probed)
        order = [axes_locs.index(x) for x in probed_locs]
        full = np.transpose(full, order) if axes_locs else full
        cols.append(full.reshape(-1))
    flat = np.stack(cols, axis=-1)  # (prod per-loc labels, n_ext)

    # regroup per-location axes into per-region label axes
    loc_sizes = [len(spec.family(x).labels()) for x in probed_locs]
    values = flat.reshape(tuple(loc_sizes) + (len(exteriors),))
    # merge each region's location axes and permute into GammaSet order
    out_axes = []
    pos = {x: i for i, x in enumerate(probed_locs)}
    for r, g in zip(regions, gammas):
        out_axes.append([pos[x] for x in r.locations])
    perm = [a for group in out_axes for a in group] + [len(probed_locs)]
    values = np.transpose(values, perm)
    new_shape = []
    for r in regions:
        size = 1
        for x in r.locations:
            size *= len(spec.family(x).labels())
        new_shape.append(size)
    values = values.reshape(tuple(new_shape) + (len(exteriors),))
    # per-region permutation: row-major per-location order -> GammaSet order
    for axis, (r, g) in enumerate(zip(regions, gammas)):
        loc_label_index = [
            {lab: i for i, lab in enumerate(spec.family(x).labels())}
            for x in r.locations
        ]
        sizes = [len(m) for m in loc_label_index]
        gather = []
        for actions, outcomes in g.labels:
            flat_idx = 0
            for k in range(len(r.locations)):
                flat_idx = flat_idx * sizes[k] + loc_label_index[k][(actions[k], outcomes[k])]
            gather.append(flat_idx)
        if gather != list(range(len(gather))):
            values = np.take(values, gather, axis=axis)
    table = ProbTable(regions, gammas, exteriors, np.ascontiguousarray(values))
    return table


# ---------------------------------------------------------------------------
# exterior span validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpanValidation:
    region: Region
    rank: int
    extended_rank: int
    n_exteriors: int
    n_extended_exteriors: int

    @property
    def stable(self) -> bool:
        return self.extended_rank == self.rank


def _extended_spec(spec: TheorySpec) -> TheorySpec:
    preps = tuple(
        tuple(base) + tuple(_extra_preparations(spec.kind, chain.size))
        for base, chain in zip(spec.preparations, spec.chains)
    )
    effs = tuple(
        tuple(base) + tuple(_extra_effects(spec.kind, chain.size))
        for base, chain in zip(spec.effects, spec.chains)
    )
    cls = type(spec)
    return cls(
        chains=spec.chains,
        instruments=spec.instruments,
        preparations=preps,
        effects=effs,
        conditioning_actions=spec.conditioning_actions,
    )


def validate_exterior_span(
    spec: TheorySpec,
    region: Region,
    tol_rank: float = 1e-9,
    cap: int = DEFAULT_TABLE_CAP,
) -> SpanValidation:
    """Confirm the declared exterior set already exhausts the reachable span.

    The region's measurement matrix is rebuilt after adding a second,
    independent family of preparations and effects; if its rank grows, the
    declared exteriors were not informationally complete for this region
    and the compression ranks could not be trusted.
    """
    base = build_prob_table(spec, [region], cap)
    m0 = base.values.reshape(base.gammas[0].size, -1)
    rank0 = len(greedy_independent_rows(m0, tol_rank))
    extended = _extended_spec(spec)
    wide = build_prob_table(extended, [region], cap)
    m1 = wide.values.reshape(wide.gammas[0].size, -1)
    rank1 = len(greedy_independent_rows(m1, tol_rank))
    report = SpanValidation(
        region, rank0, rank1, len(base.exteriors), len(wide.exteriors)
    )
    if rank1 > rank0:
        raise SpanDeficient(
            f"region {region}: rank grows from {rank0} to {rank1} when the "
            f"exterior set is extended; declare more preparations/effects"
        )
    return report


def conditioning_span(spec: TheorySpec, location: int) -> tuple[int, int]:
    """(span dimension, full dimension) of the conditioning maps at a location.

    A mediating location whose allowed conditioning maps do not span the
    full transfer space cannot be counted on to decouple the regions it
    sits between; composite compressions across it are flagged.
    """
    fam = spec.family(location)
    chain = spec.chain_of(location)
    d = spec.vec_dim(chain)
    rows = []
    for a in spec.allowed_conditioning(location):
        for s in range(fam.n_outcomes(a)):
            rows.append(fam.actions[a][s].reshape(-1))
    dim = len(greedy_independent_rows(np.array(rows), 1e-9))
    return dim, d * d


def full_pack(spec: TheorySpec) -> FullPack:
    """Card enumeration bounds of the whole arrangement."""
    locs = tuple(sorted(spec.locations()))
    counts = tuple(
        tuple(len(group) for group in spec.family(x).actions) for x in locs
    )
    return FullPack(locs, counts)
