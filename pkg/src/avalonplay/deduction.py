"""Possible-worlds role deduction with exact rational beliefs.

A world is one way of splitting the seven seats into 4 good and 3 evil.
Constraints prune worlds; beliefs are exact fractions of surviving worlds
in which each seat is good. Side-level enumeration works over the 35 evil
sets; role-level enumeration works over the 2520 distinct role
assignments and is only needed when roles themselves matter.

`brute_force_oracle` recomputes beliefs by filtering all 2520 role
assignments with its own satisfaction logic. It shares no enumeration or
bit-twiddling code with `belief`, so the two can cross-check each other.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .game import ALL_SEATS, ROLE_DECK, SABOTAGE_THRESHOLDS, Role, Side
from .knowledge import FactKind, KnowledgeView
from .memory import PublicFact

GOOD_COUNT = 4
EVIL_COUNT = 3
ALL_PLAYERS = frozenset(ALL_SEATS)


class DeductionError(Exception):
    pass


class ContradictionError(DeductionError):
    """No world satisfies the constraint set."""


class ConstraintKind(str, Enum):
    IS_GOOD = "is_good"
    IS_EVIL = "is_evil"
    AT_LEAST = "at_least"
    AT_MOST = "at_most"
    EXACTLY = "exactly"


class EnumerationLevel(str, Enum):
    SIDE = "side"
    ROLE = "role"


# Where a constraint came from, kept for auditing.
PROVENANCE_PRIVATE = "private_fact"
PROVENANCE_HISTORY = "quest_history"
PROVENANCE_MANUAL = "manual"
PROVENANCE_GLOBAL = "global"


@dataclass(frozen=True)
class Constraint:
    kind: ConstraintKind
    players: frozenset[int]
    count: int = 0
    provenance: str = PROVENANCE_MANUAL

    def __post_init__(self) -> None:
        if not self.players:
            raise DeductionError("constraint needs at least one player")
        if not self.players <= ALL_PLAYERS:
            raise DeductionError(f"constraint names unknown seats: {sorted(self.players - ALL_PLAYERS)}")
        if self.kind in (ConstraintKind.IS_GOOD, ConstraintKind.IS_EVIL):
            if len(self.players) != 1:
                raise DeductionError("side constraints apply to a single seat")
        elif not 0 <= self.count <= len(self.players):
            raise DeductionError(f"count {self.count} out of range for {len(self.players)} seats")

    # -- constructors ------------------------------------------------------

    @classmethod
    def is_good(cls, player: int, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        return cls(ConstraintKind.IS_GOOD, frozenset({player}), 0, provenance)

    @classmethod
    def is_evil(cls, player: int, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        return cls(ConstraintKind.IS_EVIL, frozenset({player}), 0, provenance)

    @classmethod
    def at_least(cls, players: Iterable[int], count: int, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        return cls(ConstraintKind.AT_LEAST, frozenset(players), count, provenance)

    @classmethod
    def at_most(cls, players: Iterable[int], count: int, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        return cls(ConstraintKind.AT_MOST, frozenset(players), count, provenance)

    @classmethod
    def exactly(cls, players: Iterable[int], count: int, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        return cls(ConstraintKind.EXACTLY, frozenset(players), count, provenance)

    # -- evaluation --------------------------------------------------------

    @cached_property
    def mask(self) -> int:
        m = 0
        for p in self.players:
            m |= 1 << p
        return m

    def satisfied_by(self, evil_set: frozenset[int]) -> bool:
        n = len(self.players & evil_set)
        if self.kind is ConstraintKind.IS_GOOD:
            return n == 0
        if self.kind is ConstraintKind.IS_EVIL:
            return n == 1
        if self.kind is ConstraintKind.AT_LEAST:
            return n >= self.count
        if self.kind is ConstraintKind.AT_MOST:
            return n <= self.count
        return n == self.count

    def satisfied_by_mask(self, evil_mask: int) -> bool:
        n = (self.mask & evil_mask).bit_count()
        if self.kind is ConstraintKind.IS_GOOD:
            return n == 0
        if self.kind is ConstraintKind.IS_EVIL:
            return n == 1
        if self.kind is ConstraintKind.AT_LEAST:
            return n >= self.count
        if self.kind is ConstraintKind.AT_MOST:
            return n <= self.count
        return n == self.count

    # -- line form -----------------------------------------------------------

    def to_line(self) -> str:
        if self.kind is ConstraintKind.IS_GOOD:
            return f"player {next(iter(self.players))} is good"
        if self.kind is ConstraintKind.IS_EVIL:
            return f"player {next(iter(self.players))} is evil"
        word = {
            ConstraintKind.AT_LEAST: "at least",
            ConstraintKind.AT_MOST: "at most",
            ConstraintKind.EXACTLY: "exactly",
        }[self.kind]
        seats = ",".join(str(p) for p in sorted(self.players))
        return f"{word} {self.count} evil in {{{seats}}}"

    _LINE_SIDE = re.compile(r"^player\s+(\d+)\s+is\s+(good|evil)$")
    _LINE_COUNT = re.compile(r"^(at least|at most|exactly)\s+(\d+)\s+evil\s+in\s+\{([\d,\s]+)\}$")

    @classmethod
    def from_line(cls, line: str, provenance: str = PROVENANCE_MANUAL) -> "Constraint":
        text = line.strip().lower()
        m = cls._LINE_SIDE.match(text)
        if m:
            seat = int(m.group(1))
            maker = cls.is_good if m.group(2) == "good" else cls.is_evil
            return maker(seat, provenance)
        m = cls._LINE_COUNT.match(text)
        if m:
            kind = {
                "at least": ConstraintKind.AT_LEAST,
                "at most": ConstraintKind.AT_MOST,
                "exactly": ConstraintKind.EXACTLY,
            }[m.group(1)]
            players = frozenset(int(p) for p in m.group(3).replace(" ", "").split(",") if p)
            return cls(kind, players, int(m.group(2)), provenance)
        raise DeductionError(f"unparseable constraint line: {line!r}")


GLOBAL_CONSTRAINT = Constraint.exactly(ALL_PLAYERS, EVIL_COUNT, PROVENANCE_GLOBAL)


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        # The global 4-good/3-evil constraint is always present exactly once.
        cs = [c for c in self.constraints if (c.kind, c.players, c.count) != (
            GLOBAL_CONSTRAINT.kind, GLOBAL_CONSTRAINT.players, GLOBAL_CONSTRAINT.count)]
        object.__setattr__(self, "constraints", (GLOBAL_CONSTRAINT, *cs))

    def add(self, *constraints: Constraint) -> "ConstraintSet":
        return ConstraintSet(self.constraints + tuple(constraints))

    def to_lines(self) -> list[str]:
        return [c.to_line() for c in self.constraints]

    @classmethod
    def from_lines(cls, lines: Iterable[str], provenance: str = PROVENANCE_MANUAL) -> "ConstraintSet":
        return cls(tuple(Constraint.from_line(l, provenance) for l in lines if l.strip()))


@dataclass(frozen=True)
class World:
    evil_set: frozenset[int]
    role_map: tuple[Role, ...] | None = None  # roles for seats 1..7 when role-level

    @property
    def good_set(self) -> frozenset[int]:
        return ALL_PLAYERS - self.evil_set


@dataclass(frozen=True)
class BeliefState:
    p_good: dict[int, Fraction]
    n_worlds: int

    @property
    def contradictory(self) -> bool:
        return self.n_worlds == 0


def _evil_combinations() -> list[frozenset[int]]:
    return [frozenset(c) for c in itertools.combinations(ALL_SEATS, EVIL_COUNT)]


_EVIL_SETS = _evil_combinations()
_EVIL_MASKS = [sum(1 << p for p in s) for s in _EVIL_SETS]

_ROLE_ASSIGNMENTS: list[tuple[Role, ...]] | None = None


def _all_role_assignments() -> list[tuple[Role, ...]]:
    """All 2520 distinct orderings of the deck, lexicographic by role name."""
    global _ROLE_ASSIGNMENTS
    if _ROLE_ASSIGNMENTS is None:
        distinct = set(itertools.permutations(ROLE_DECK))
        _ROLE_ASSIGNMENTS = sorted(distinct, key=lambda t: tuple(r.value for r in t))
    return _ROLE_ASSIGNMENTS


def enumerate_worlds(
    cs: ConstraintSet, level: EnumerationLevel = EnumerationLevel.SIDE
) -> list[World]:
    """Consistent worlds in a deterministic (lexicographic) order."""
    if level is EnumerationLevel.SIDE:
        return [
            World(evil_set=s)
            for s, m in zip(_EVIL_SETS, _EVIL_MASKS)
            if all(c.satisfied_by_mask(m) for c in cs.constraints)
        ]
    worlds = []
    for assignment in _all_role_assignments():
        evil = frozenset(seat for seat, role in zip(ALL_SEATS, assignment) if role.side is Side.EVIL)
        if all(c.satisfied_by(evil) for c in cs.constraints):
            worlds.append(World(evil_set=evil, role_map=assignment))
    return worlds


def belief(cs: ConstraintSet) -> BeliefState:
    """Exact per-seat probability of being good over consistent worlds.

    A contradictory set yields n_worlds == 0 rather than an exception, so
    callers can distinguish "no consistent world" from programming errors.
    """
    n = 0
    evil_counts = [0] * (len(ALL_SEATS) + 2)
    constraints = cs.constraints
    for m in _EVIL_MASKS:
        ok = True
        for c in constraints:
            if not c.satisfied_by_mask(m):
                ok = False
                break
        if ok:
            n += 1
            for p in ALL_SEATS:
                evil_counts[p] += (m >> p) & 1
    if n == 0:
        return BeliefState(p_good={}, n_worlds=0)
    p_good = {p: Fraction(n - evil_counts[p], n) for p in ALL_SEATS}
    return BeliefState(p_good=p_good, n_worlds=n)


def select_team(beliefs: BeliefState, n: int, leader: int) -> frozenset[int]:
    """The n seats most likely to be good.

    Ordering is by descending p_good; within a tie class the leader comes
    first (a leader certain of its own goodness always joins its own team)
    and the rest break ties by ascending seat index.
    """
    if beliefs.contradictory:
        raise ContradictionError("cannot select a team from contradictory beliefs")
    if not 1 <= n <= len(ALL_SEATS):
        raise DeductionError(f"team size out of range: {n}")
    if leader not in ALL_PLAYERS:
        raise DeductionError(f"no such seat: {leader}")
    order = sorted(ALL_SEATS, key=lambda p: (-beliefs.p_good[p], p != leader, p))
    return frozenset(order[:n])


def brute_force_oracle(cs: ConstraintSet) -> BeliefState:
    """Reference beliefs from first principles.

    Filters every one of the 2520 role assignments with plain set logic
    and counts, independently of the mask-based enumeration above. The
    72-fold role multiplicity per evil set cancels in the fraction, so the
    result must equal `belief(cs)` exactly.
    """
    consistent = 0
    good_counts = {p: 0 for p in ALL_SEATS}
    for assignment in _all_role_assignments():
        evil = frozenset(
            seat for seat, role in zip(ALL_SEATS, assignment) if role.side is Side.EVIL
        )
        if all(_oracle_satisfied(c, evil) for c in cs.constraints):
            consistent += 1
            for p in ALL_SEATS:
                if p not in evil:
                    good_counts[p] += 1
    if consistent == 0:
        return BeliefState(p_good={}, n_worlds=0)
    return BeliefState(
        p_good={p: Fraction(good_counts[p], consistent) for p in ALL_SEATS},
        n_worlds=consistent,
    )


def _oracle_satisfied(c: Constraint, evil: frozenset[int]) -> bool:
    inside = sum(1 for p in c.players if p in evil)
    if c.kind is ConstraintKind.IS_GOOD:
        return inside == 0
    if c.kind is ConstraintKind.IS_EVIL:
        return inside == len(c.players)
    if c.kind is ConstraintKind.AT_LEAST:
        return inside >= c.count
    if c.kind is ConstraintKind.AT_MOST:
        return inside <= c.count
    return inside == c.count


# ----- constraint extraction ------------------------------------------------


def facts_from_private(view: KnowledgeView) -> list[Constraint]:
    """Constraints a seat can assert from its own knowledge."""
    out: list[Constraint] = []
    if view.side is Side.JUST:
        out.append(Constraint.is_good(view.player, PROVENANCE_PRIVATE))
    else:
        out.append(Constraint.is_evil(view.player, PROVENANCE_PRIVATE))
    for fact in view.private_facts:
        if fact.kind is FactKind.EVIL_SET or fact.kind is FactKind.EVIL_TEAMMATES:
            out.extend(
                Constraint.is_evil(p, PROVENANCE_PRIVATE) for p in sorted(fact.players)
            )
        elif fact.kind is FactKind.MERLIN_MORGANA_PAIR:
            out.append(Constraint.exactly(fact.players, 1, PROVENANCE_PRIVATE))
    # Deduplicate while preserving order (a seat may be named twice).
    seen: set[tuple] = set()
    unique = []
    for c in out:
        key = (c.kind, c.players, c.count)
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def facts_from_history(
    public_facts: Sequence[PublicFact],
    thresholds: tuple[int, ...] = SABOTAGE_THRESHOLDS,
    reveal_counts: bool = False,
) -> list[Constraint]:
    """Constraints implied by executed quests under mandatory sabotage.

    Without disclosed counts: a failed quest had at least `threshold` evil
    members, a successful one at most `threshold - 1`. With disclosed
    counts every quest pins its team's evil membership exactly.
    """
    out: list[Constraint] = []
    for fact in public_facts:
        t = thresholds[fact.round - 1]
        if reveal_counts:
            if fact.sabotage_count is None:
                raise DeductionError(
                    f"round {fact.round}: sabotage count required but not recorded"
                )
            out.append(Constraint.exactly(fact.team, fact.sabotage_count, PROVENANCE_HISTORY))
        elif fact.success:
            if t == 1:
                out.append(Constraint.exactly(fact.team, 0, PROVENANCE_HISTORY))
            else:
                out.append(Constraint.at_most(fact.team, t - 1, PROVENANCE_HISTORY))
        else:
            out.append(Constraint.at_least(fact.team, t, PROVENANCE_HISTORY))
    return out
