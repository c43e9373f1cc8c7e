"""Bounded short-term-memory buffers with pluggable size limits.

Four policies are available:

* ``capacity_fifo``: a full buffer drops the entry inserted longest ago.
* ``capacity_lru``: a full buffer drops the entry refreshed longest ago.
* ``decay``: no size bound; entries expire ``ttl_ticks`` after their last refresh.
* ``interference``: a full buffer drops the entry most similar to the newcomer.

Capacity can be enforced per entity or across all entities of one consultant.
Time is a scripted tick counter, never the wall clock.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Optional

from .core import BoundProperty, EntityRef

POLICIES = ("capacity_fifo", "capacity_lru", "decay", "interference")
SCOPES = ("per_entity", "per_consultant_global")


@dataclass
class Clock:
    now: int = 0

    def tick(self, n: int = 1) -> int:
        if n < 0:
            raise ValueError(f"clock cannot move backwards ({n})")
        self.now += n
        return self.now


@dataclass(frozen=True)
class BufferConfig:
    policy: str = "capacity_fifo"
    capacity: Optional[int] = 7
    ttl_ticks: Optional[int] = None
    scope: str = "per_entity"
    # predicate -> ttl; decay policy only
    ttl_overrides: Mapping[str, int] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown buffer policy {self.policy!r}; expected one of {POLICIES}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown buffer scope {self.scope!r}; expected one of {SCOPES}")
        if self.bounded and (self.capacity is None or self.capacity < 1):
            raise ValueError(f"policy {self.policy} needs a positive capacity, got {self.capacity}")
        if self.policy == "decay":
            if self.ttl_ticks is None or self.ttl_ticks < 1:
                raise ValueError(f"decay policy needs a positive ttl_ticks, got {self.ttl_ticks}")
            for pred, ttl in self.ttl_overrides.items():
                if ttl < 1:
                    raise ValueError(f"ttl override for {pred} must be positive, got {ttl}")

    @property
    def bounded(self) -> bool:
        return self.policy != "decay"

    def ttl_for(self, predicate: str) -> int:
        assert self.ttl_ticks is not None
        return self.ttl_overrides.get(predicate, self.ttl_ticks)


@dataclass
class BufferEntry:
    prop: BoundProperty
    inserted_at: int
    last_refreshed: int
    # tie-breakers for entries sharing a tick
    inserted_seq: int = 0
    refreshed_seq: int = 0


def similarity(a: BoundProperty, b: BoundProperty, categories: Optional[Mapping[str, str]] = None) -> int:
    """Coarse ordinal similarity used by the interference policy.

    3 same predicate, 2 same declared category, 1 same arity, else 0.
    """
    if a.predicate == b.predicate:
        return 3
    if categories:
        cat_a, cat_b = categories.get(a.predicate), categories.get(b.predicate)
        if cat_a is not None and cat_a == cat_b:
            return 2
    if a.formula.arity == b.formula.arity:
        return 1
    return 0


def choose_victim(
    entries: Iterable[BufferEntry],
    incoming: BoundProperty,
    policy: str,
    categories: Optional[Mapping[str, str]] = None,
) -> BufferEntry:
    entries = list(entries)
    if not entries:
        raise ValueError("no entries to evict")
    if policy == "capacity_fifo":
        return min(entries, key=lambda e: (e.inserted_at, e.inserted_seq))
    if policy == "capacity_lru":
        return min(entries, key=lambda e: (e.last_refreshed, e.refreshed_seq))
    if policy == "interference":
        # ties go to the oldest insertion
        return min(
            entries,
            key=lambda e: (-similarity(e.prop, incoming, categories), e.inserted_at, e.inserted_seq),
        )
    raise ValueError(f"policy {policy!r} does not evict on insert")


class STMBuffer:
    """The buffer for a single entity."""

    def __init__(
        self,
        config: Optional[BufferConfig] = None,
        categories: Optional[Mapping[str, str]] = None,
        *,
        enforce_capacity: bool = True,
        seq: Optional[Iterable[int]] = None,
    ):
        self.config = config or BufferConfig()
        self.categories = dict(categories or {})
        self._enforce = enforce_capacity and self.config.bounded
        self._seq = iter(seq) if seq is not None else itertools.count()
        self._entries: dict[BoundProperty, BufferEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[BufferEntry]:
        return list(self._entries.values())

    def __contains__(self, prop: object) -> bool:
        return prop in self._entries

    def refresh(self, prop: BoundProperty, now: int) -> bool:
        entry = self._entries.get(prop)
        if entry is None:
            return False
        entry.last_refreshed = max(now, entry.last_refreshed)
        entry.refreshed_seq = next(self._seq)
        return True

    def add(self, prop: BoundProperty, now: int) -> None:
        """Insert without any eviction; the caller has made room."""
        seq = next(self._seq)
        self._entries[prop] = BufferEntry(prop, now, now, seq, seq)

    def remove(self, prop: BoundProperty) -> None:
        del self._entries[prop]

    def insert(self, prop: BoundProperty, now: int) -> Optional[BoundProperty]:
        """Insert or refresh ``prop``; returns whatever was evicted to make room."""
        if not prop.is_ground:
            raise ValueError(f"only ground properties can be buffered, got {prop}")
        self._expire(now)
        if self.refresh(prop, now):
            return None
        evicted = None
        if self._enforce and len(self._entries) >= self.config.capacity:
            victim = choose_victim(self._entries.values(), prop, self.config.policy, self.categories)
            evicted = victim.prop
            self.remove(evicted)
        self.add(prop, now)
        return evicted

    def query(self, now: int) -> list[BoundProperty]:
        """Live contents, most recently refreshed first."""
        self._expire(now)
        ordered = sorted(self._entries.values(), key=lambda e: e.refreshed_seq, reverse=True)
        return [e.prop for e in ordered]

    def holds(self, prop: BoundProperty, now: int) -> bool:
        entry = self._entries.get(prop)
        return entry is not None and not self._expired(entry, now)

    def _expired(self, entry: BufferEntry, now: int) -> bool:
        if self.config.policy != "decay":
            return False
        return now - entry.last_refreshed > self.config.ttl_for(entry.prop.predicate)

    def _expire(self, now: int) -> None:
        if self.config.policy != "decay":
            return
        for prop in [p for p, e in self._entries.items() if self._expired(e, now)]:
            del self._entries[prop]


class BufferPool:
    """All entity buffers of one consultant, sharing one config and sequence counter."""

    def __init__(self, config: Optional[BufferConfig] = None, categories: Optional[Mapping[str, str]] = None):
        self.config = config or BufferConfig()
        self.categories = dict(categories or {})
        self._seq = itertools.count()
        self._buffers: dict[EntityRef, STMBuffer] = {}

    @property
    def is_global(self) -> bool:
        return self.config.scope == "per_consultant_global"

    def buffer(self, entity: EntityRef) -> STMBuffer:
        buf = self._buffers.get(entity)
        if buf is None:
            buf = STMBuffer(
                self.config,
                self.categories,
                enforce_capacity=not self.is_global,
                seq=self._seq,
            )
            self._buffers[entity] = buf
        return buf

    def total_size(self) -> int:
        return sum(len(b) for b in self._buffers.values())

    def insert(self, entity: EntityRef, prop: BoundProperty, now: int) -> Optional[tuple[EntityRef, BoundProperty]]:
        buf = self.buffer(entity)
        if not (self.is_global and self.config.bounded):
            evicted = buf.insert(prop, now)
            return (entity, evicted) if evicted is not None else None
        if not prop.is_ground:
            raise ValueError(f"only ground properties can be buffered, got {prop}")
        if buf.refresh(prop, now):
            return None
        evicted = None
        if self.total_size() >= self.config.capacity:
            owner_of = {}
            for ent, other in self._buffers.items():
                for entry in other.entries():
                    owner_of[id(entry)] = ent
            pool = [e for b in self._buffers.values() for e in b.entries()]
            victim = choose_victim(pool, prop, self.config.policy, self.categories)
            owner = owner_of[id(victim)]
            self._buffers[owner].remove(victim.prop)
            evicted = (owner, victim.prop)
        buf.add(prop, now)
        return evicted

    def contents(self, entity: EntityRef, now: int) -> list[BoundProperty]:
        buf = self._buffers.get(entity)
        return buf.query(now) if buf is not None else []

    def holds(self, entity: EntityRef, prop: BoundProperty, now: int) -> bool:
        buf = self._buffers.get(entity)
        return buf is not None and buf.holds(prop, now)
