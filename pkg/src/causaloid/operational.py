"""Operational record keeping: cards, stacks, regions, procedures.

A single experimental run is recorded as a stack of cards, one card per
spacetime location. Each card holds the location id, the action chosen
there, and the observed outcome. Relative frequencies over repeated runs
are estimated directly from collections of stacks; everything downstream
(tables, compression) consumes exact backend probabilities instead.
"""
from __future__ import annotations

import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import IoError, SchemaError, UnknownRegion, ZeroConditionCount

__all__ = [
    "Card",
    "Region",
    "ProcedureSpec",
    "FullPack",
    "Stack",
    "EstimateResult",
    "restrict_to_region",
    "estimate_prob",
    "sample_stacks",
    "dump_stacks",
    "load_stacks",
]


@dataclass(frozen=True, order=True)
class Card:
    """One (location, action, outcome) record."""

    location: int
    action: int
    outcome: int

    def __post_init__(self):
        for name in ("location", "action", "outcome"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"card {name} must be a non-negative int, got {v!r}")


@dataclass(frozen=True)
class Region:
    """A non-empty set of locations, stored sorted and duplicate-free."""

    locations: tuple[int, ...]

    def __init__(self, locations: Iterable[int]):
        locs = tuple(sorted(set(locations)))
        if not locs:
            raise ValueError("a region must contain at least one location")
        for x in locs:
            if not isinstance(x, int) or isinstance(x, bool) or x < 0:
                raise ValueError(f"region locations must be non-negative ints, got {x!r}")
        object.__setattr__(self, "locations", locs)

    @property
    def is_elementary(self) -> bool:
        return len(self.locations) == 1

    def union(self, other: "Region") -> "Region":
        return Region(self.locations + other.locations)

    def intersection(self, other: "Region") -> "Region":
        common = set(self.locations) & set(other.locations)
        if not common:
            raise ValueError("regions are disjoint; the intersection is empty")
        return Region(common)

    def difference(self, other: "Region") -> "Region":
        rest = set(self.locations) - set(other.locations)
        if not rest:
            raise ValueError("the difference is empty")
        return Region(rest)

    def overlaps(self, other: "Region") -> bool:
        return bool(set(self.locations) & set(other.locations))

    def issubset(self, other: "Region") -> bool:
        return set(self.locations) <= set(other.locations)

    def __contains__(self, location: int) -> bool:
        return location in self.locations

    def __iter__(self):
        return iter(self.locations)

    def __len__(self) -> int:
        return len(self.locations)

    def __str__(self) -> str:
        return "{" + ",".join(str(x) for x in self.locations) + "}"


@dataclass(frozen=True)
class ProcedureSpec:
    """An action choice for every location in its domain.

    Stored as a sorted tuple of (location, action) pairs so instances are
    hashable and order-insensitive.
    """

    assignment: tuple[tuple[int, int], ...]

    def __init__(self, assignment: Mapping[int, int] | Iterable[tuple[int, int]]):
        items = dict(assignment)
        pairs = tuple(sorted(items.items()))
        for x, a in pairs:
            if x < 0 or a < 0:
                raise ValueError("locations and actions must be non-negative")
        object.__setattr__(self, "assignment", pairs)

    @property
    def locations(self) -> tuple[int, ...]:
        return tuple(x for x, _ in self.assignment)

    def action_at(self, location: int) -> int:
        for x, a in self.assignment:
            if x == location:
                return a
        raise UnknownRegion(f"procedure assigns no action at location {location}")

    def restricted(self, region: Region) -> "ProcedureSpec":
        pairs = [(x, a) for x, a in self.assignment if x in region]
        if len(pairs) != len(region):
            raise UnknownRegion(f"procedure does not cover region {region}")
        return ProcedureSpec(pairs)

    def as_dict(self) -> dict[int, int]:
        return dict(self.assignment)


@dataclass(frozen=True)
class FullPack:
    """Enumeration bounds for every card of an experiment.

    ``outcome_counts[x]`` lists, per action at location ``x``, how many
    outcomes that action can produce; action counts follow from its length.
    """

    locations: tuple[int, ...]
    outcome_counts: tuple[tuple[int, ...], ...]  # aligned with locations

    def __post_init__(self):
        if len(set(self.locations)) != len(self.locations):
            raise ValueError("full pack locations must be unique")
        if len(self.outcome_counts) != len(self.locations):
            raise ValueError("outcome_counts must align with locations")
        for counts in self.outcome_counts:
            if not counts or any(c < 1 for c in counts):
                raise ValueError("every action needs at least one outcome")

    def n_actions(self, location: int) -> int:
        return len(self.outcome_counts[self._pos(location)])

    def n_outcomes(self, location: int, action: int) -> int:
        counts = self.outcome_counts[self._pos(location)]
        if not 0 <= action < len(counts):
            raise ValueError(f"location {location} has no action {action}")
        return counts[action]

    def _pos(self, location: int) -> int:
        try:
            return self.locations.index(location)
        except ValueError:
            raise UnknownRegion(f"location {location} is not in the full pack") from None

    def card_valid(self, card: Card) -> bool:
        if card.location not in self.locations:
            return False
        counts = self.outcome_counts[self._pos(card.location)]
        return card.action < len(counts) and card.outcome < counts[card.action]

    def cards(self) -> Iterable[Card]:
        """Enumerate every possible card, sorted."""
        for x, counts in zip(self.locations, self.outcome_counts):
            for a, n in enumerate(counts):
                for s in range(n):
                    yield Card(x, a, s)

    def validate_procedure(self, procedure: ProcedureSpec) -> None:
        if procedure.locations != tuple(sorted(self.locations)):
            raise ValueError("procedure must assign an action at every pack location")
        for x, a in procedure.assignment:
            if a >= self.n_actions(x):
                raise ValueError(f"location {x} has no action {a}")

    def validate_stack(self, stack: "Stack") -> None:
        locs = sorted(c.location for c in stack.cards)
        if locs != sorted(self.locations):
            raise ValueError("a stack must hold exactly one card per pack location")
        for card in stack.cards:
            if not self.card_valid(card):
                raise ValueError(f"card {card} is outside the full pack")
            if card.action != stack.tag.action_at(card.location):
                raise ValueError(f"card {card} disagrees with the stack's procedure tag")


@dataclass(frozen=True)
class Stack:
    """The cards of one run, tagged with the procedure that produced them."""

    cards: frozenset[Card]
    tag: ProcedureSpec

    def __init__(self, cards: Iterable[Card], tag: ProcedureSpec):
        cardset = frozenset(cards)
        locs = [c.location for c in cardset]
        if len(set(locs)) != len(locs):
            raise ValueError("a stack holds at most one card per location")
        for c in cardset:
            if c.action != tag.action_at(c.location):
                raise ValueError(f"card {c} disagrees with the procedure tag")
        object.__setattr__(self, "cards", cardset)
        object.__setattr__(self, "tag", tag)

    def card_at(self, location: int) -> Card:
        for c in self.cards:
            if c.location == location:
                return c
        raise UnknownRegion(f"stack has no card at location {location}")

    def sorted_cards(self) -> tuple[Card, ...]:
        return tuple(sorted(self.cards))


def restrict_to_region(cards: Iterable[Card], region: Region) -> frozenset[Card]:
    """Keep only the cards whose location lies in ``region``."""
    return frozenset(c for c in cards if c.location in region)


@dataclass(frozen=True)
class EstimateResult:
    probability: float
    numerator_count: int
    denominator_count: int


def estimate_prob(
    stacks: Sequence[Stack],
    target: Iterable[Card],
    condition: Iterable[Card] = (),
) -> EstimateResult:
    """Relative-frequency estimate of P(target outcomes | condition, procedures).

    The denominator counts stacks that contain every conditioning card and
    whose procedure tag matches every target card's action; the numerator
    additionally requires the target cards themselves. Conditioning on the
    named procedures is what makes the ratio a conditional probability
    rather than a joint one.
    """
    target = tuple(target)
    condition = tuple(condition)
    n_num = 0
    n_den = 0
    for stack in stacks:
        if not all(c in stack.cards for c in condition):
            continue
        try:
            if any(stack.tag.action_at(t.location) != t.action for t in target):
                continue
        except UnknownRegion:
            continue
        n_den += 1
        if all(t in stack.cards for t in target):
            n_num += 1
    if n_den == 0:
        raise ZeroConditionCount("no stack matches the conditioning event")
    return EstimateResult(n_num / n_den, n_num, n_den)


def sample_stacks(backend, procedure: ProcedureSpec, runs: int, seed: int) -> list[Stack]:
    """Simulate ``runs`` independent runs under one procedure.

    ``backend`` must provide ``sample_cards(procedure, rng)`` returning the
    cards of a single run. Each run draws from its own generator seeded by
    (seed, run index), so results are reproducible and order-independent.
    """
    if runs < 0:
        raise ValueError("runs must be non-negative")
    out = []
    for i in range(runs):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, i))))
        cards = backend.sample_cards(procedure, rng)
        out.append(Stack(cards, procedure))
    return out


# ---------------------------------------------------------------------------
# stack persistence: newline-delimited "x,a,s" records grouped per run
# ---------------------------------------------------------------------------

def dump_stacks(stacks: Sequence[Stack], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            _write_stacks(stacks, fh)
    except OSError as exc:
        raise IoError(f"cannot write stacks to {path}: {exc}") from exc


def _write_stacks(stacks: Sequence[Stack], fh: io.TextIOBase) -> None:
    for i, stack in enumerate(stacks):
        proc = " ".join(f"{x}:{a}" for x, a in stack.tag.assignment)
        fh.write(f"# stack {i} procedure {proc}\n")
        for card in stack.sorted_cards():
            fh.write(f"{card.location},{card.action},{card.outcome}\n")
        fh.write("\n")


def load_stacks(path) -> list[Stack]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read stacks from {path}: {exc}") from exc
    return parse_stacks(text)


def parse_stacks(text: str) -> list[Stack]:
    stacks: list[Stack] = []
    cards: list[Card] = []
    tag: ProcedureSpec | None = None
    lineno = 0

    def flush():
        nonlocal cards, tag
        if tag is None:
            if cards:
                raise SchemaError("cards appear before any stack header", f"line {lineno}")
            return
        stacks.append(Stack(cards, tag))
        cards = []
        tag = None

    for raw in text.splitlines():
        lineno += 1
        line = raw.strip()
        if not line:
            if tag is not None:
                flush()
            continue
        if line.startswith("#"):
            if tag is not None:
                flush()
            parts = line.split("procedure", 1)
            if len(parts) != 2:
                raise SchemaError("stack header lacks a procedure tag", f"line {lineno}")
            try:
                pairs = [tuple(int(t) for t in item.split(":")) for item in parts[1].split()]
                tag = ProcedureSpec(dict((x, a) for x, a in pairs))
            except (ValueError, TypeError) as exc:
                raise SchemaError(f"bad procedure tag: {exc}", f"line {lineno}") from exc
            continue
        try:
            x, a, s = (int(t) for t in line.split(","))
        except ValueError as exc:
            raise SchemaError(f"bad card record {line!r}", f"line {lineno}") from exc
        cards.append(Card(x, a, s))
    if tag is not None:
        flush()
    return stacks
