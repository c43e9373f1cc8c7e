"""Consultants: probabilistic knowledge sources fronted by STM buffers."""

from __future__ import annotations

import threading
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass
from typing import Optional

from .buffer import BufferConfig, BufferPool, Clock
from .core import (
    BoundProperty,
    Bindings,
    EntityRef,
    Formula,
    UnknownEntityError,
    UnknownPredicateError,
)


@dataclass
class QueryCounter:
    ltm_queries: int = 0
    stm_hits: int = 0
    stm_misses: int = 0
    # list fetches of one entity's buffer issued by the STM heuristic
    stm_fetches: int = 0

    def copy(self) -> QueryCounter:
        return QueryCounter(**asdict(self))

    def __sub__(self, other: QueryCounter) -> QueryCounter:
        return QueryCounter(**{k: v - getattr(other, k) for k, v in asdict(self).items()})

    def __add__(self, other: QueryCounter) -> QueryCounter:
        return QueryCounter(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


class FactTable:
    """Ground properties with probabilities; anything absent has probability 0.0."""

    def __init__(self, facts: Optional[Mapping[BoundProperty, float]] = None):
        self._facts: dict[BoundProperty, float] = {}
        for prop, p in (facts or {}).items():
            self.set(prop, p)

    def set(self, prop: BoundProperty, probability: float) -> None:
        if not prop.is_ground:
            raise ValueError(f"facts must be ground: {prop}")
        if not 0.0 <= probability <= 1.0:
            raise ValueError(f"probability out of range for {prop}: {probability}")
        if probability == 0.0:
            self._facts.pop(prop, None)
        else:
            self._facts[prop] = float(probability)

    def get(self, prop: BoundProperty) -> float:
        return self._facts.get(prop, 0.0)

    def __len__(self) -> int:
        return len(self._facts)

    def items(self) -> list[tuple[BoundProperty, float]]:
        return list(self._facts.items())


class Consultant:
    """In-memory knowledge source for one domain of entities.

    ``apply`` is the long-term-memory query and the only thing that bumps
    ``counter.ltm_queries``. ``impose`` edits facts and deliberately leaves
    the STM buffers alone, so cached properties can go stale.
    """

    def __init__(
        self,
        consultant_id: str,
        entities: Iterable[int],
        catalog: Sequence[Formula] = (),
        facts: Optional[Mapping[BoundProperty, float]] = None,
        buffer_config: Optional[BufferConfig] = None,
        *,
        default_type: Optional[str] = None,
        entity_types: Optional[Mapping[int, str]] = None,
        categories: Optional[Mapping[str, str]] = None,
        clock: Optional[Clock] = None,
    ):
        self.id = consultant_id
        self.default_type = default_type or consultant_id
        self._domain = [EntityRef(consultant_id, i) for i in entities]
        if len(set(self._domain)) != len(self._domain):
            raise ValueError(f"duplicate entity in consultant {consultant_id}")
        self._types = {EntityRef(consultant_id, i): t for i, t in (entity_types or {}).items()}
        for ent in self._types:
            if ent not in self._domain:
                raise UnknownEntityError(f"type given for {ent}, which is not in {consultant_id}'s domain")
        self._catalog = tuple(catalog)
        seen = set()
        for f in self._catalog:
            if (f.predicate, f.arity) in seen:
                raise ValueError(f"duplicate catalog entry {f} in consultant {consultant_id}")
            seen.add((f.predicate, f.arity))
        self._by_predicate = {f.predicate: f for f in self._catalog}
        self.facts = FactTable()
        for prop, p in (facts or {}).items():
            self._check_fact(prop)
            self.facts.set(prop, p)
        self.buffers = BufferPool(buffer_config, categories)
        self.clock = clock or Clock()
        self.counter = QueryCounter()
        self.query_log: list[BoundProperty] = []
        self._lock = threading.RLock()

    def __repr__(self) -> str:
        return f"Consultant({self.id!r}, {len(self._domain)} entities, {len(self._catalog)} formulas)"

    # capability 1
    def domain(self) -> list[EntityRef]:
        return list(self._domain)

    # capability 2
    def constraints(self) -> tuple[Formula, ...]:
        return self._catalog

    def advertises(self, predicate: str) -> bool:
        return predicate in self._by_predicate

    def formula(self, predicate: str) -> Formula:
        try:
            return self._by_predicate[predicate]
        except KeyError:
            raise UnknownPredicateError(f"{self.id} does not advertise {predicate!r}") from None

    def owns(self, entity: EntityRef) -> bool:
        return entity.consultant_id == self.id and entity in self._domain

    def type_of(self, entity: EntityRef) -> str:
        self._require_own(entity)
        return self._types.get(entity, self.default_type)

    # capability 3
    def apply(self, formula: Formula, bindings: Mapping[str, EntityRef]) -> float:
        """Probability that the ground property holds. Counts one LTM query."""
        prop = self._ground(formula, bindings)
        with self._lock:
            self.counter.ltm_queries += 1
            self.query_log.append(prop)
        return self.facts.get(prop)

    def lookup(self, formula: Formula, bindings: Mapping[str, EntityRef]) -> float:
        """Read the fact table directly, without counting a query (oracles, reports)."""
        return self.facts.get(self._ground(formula, bindings))

    # capability 4
    def impose(self, formula: Formula, bindings: Mapping[str, EntityRef], probability: float) -> None:
        prop = self._ground(formula, bindings)
        with self._lock:
            self.facts.set(prop, probability)

    # capability 5
    def stm_contents(self, entity: EntityRef) -> list[BoundProperty]:
        self._require_own(entity)
        return self.buffers.contents(entity, self.clock.now)

    def stm_holds(self, entity: EntityRef, prop: BoundProperty) -> bool:
        self._require_own(entity)
        return self.buffers.holds(entity, prop, self.clock.now)

    def stm_insert(self, entity: EntityRef, prop: BoundProperty, now: Optional[int] = None) -> None:
        self._require_own(entity)
        if not prop.is_ground:
            raise ValueError(f"only ground properties can be buffered, got {prop}")
        if entity not in prop.entities():
            raise ValueError(f"{prop} does not mention {entity}")
        with self._lock:
            self.buffers.insert(entity, prop, self.clock.now if now is None else now)

    def _require_own(self, entity: EntityRef) -> None:
        if not self.owns(entity):
            raise UnknownEntityError(f"{entity} is not in {self.id}'s domain")

    def _ground(self, formula: Formula, bindings: Mapping[str, EntityRef]) -> BoundProperty:
        own = self.formula(formula.predicate)
        if own.arity != formula.arity:
            raise UnknownPredicateError(
                f"{self.id} advertises {own} but was asked about arity {formula.arity}"
            )
        prop = BoundProperty(formula, Bindings(bindings))
        if not prop.is_ground:
            raise ValueError(f"{self.id} asked to assess non-ground {prop}")
        return BoundProperty(own, Bindings(zip(own.names, prop.args)))

    def _check_fact(self, prop: BoundProperty) -> None:
        self._ground(prop.formula, prop.bindings)


class ConsultantSet:
    """The set of consultants an algorithm runs against, with a shared clock.

    Queries about an entity go to the consultant that owns it when that
    consultant advertises the predicate, otherwise to the first consultant
    that does.
    """

    def __init__(self, consultants: Iterable[Consultant], clock: Optional[Clock] = None):
        self.consultants = tuple(consultants)
        self.clock = clock or Clock()
        self._by_id: dict[str, Consultant] = {}
        self._owner: dict[EntityRef, Consultant] = {}
        for c in self.consultants:
            if c.id in self._by_id:
                raise ValueError(f"duplicate consultant id {c.id!r}")
            self._by_id[c.id] = c
            c.clock = self.clock
            for ent in c.domain():
                self._owner[ent] = c

    def __iter__(self) -> Iterator[Consultant]:
        return iter(self.consultants)

    def __len__(self) -> int:
        return len(self.consultants)

    def __getitem__(self, consultant_id: str) -> Consultant:
        try:
            return self._by_id[consultant_id]
        except KeyError:
            raise UnknownEntityError(f"no consultant {consultant_id!r}") from None

    def entities(self) -> list[EntityRef]:
        """The world model: every entity of every domain, in consultant then domain order."""
        return list(self._owner)

    def consultant_of(self, entity: EntityRef) -> Consultant:
        try:
            return self._owner[entity]
        except KeyError:
            raise UnknownEntityError(f"{entity} is in no consultant's domain") from None

    def type_of(self, entity: EntityRef) -> str:
        return self.consultant_of(entity).type_of(entity)

    def owners(self, predicate: str) -> list[Consultant]:
        return [c for c in self.consultants if c.advertises(predicate)]

    def formula(self, predicate: str) -> Formula:
        for c in self.consultants:
            if c.advertises(predicate):
                return c.formula(predicate)
        raise UnknownPredicateError(f"no consultant advertises {predicate!r}")

    def assessor(self, entity: EntityRef, predicate: str) -> Consultant:
        own = self.consultant_of(entity)
        if own.advertises(predicate):
            return own
        owners = self.owners(predicate)
        if not owners:
            raise UnknownPredicateError(f"no consultant advertises {predicate!r}")
        return owners[0]

    def apply(self, entity: EntityRef, formula: Formula, bindings: Mapping[str, EntityRef]) -> float:
        """LTM query about ``entity``, routed to the right consultant."""
        for ent in bindings.values():
            self.consultant_of(ent)
        return self.assessor(entity, formula.predicate).apply(formula, bindings)

    def lookup(self, entity: EntityRef, formula: Formula, bindings: Mapping[str, EntityRef]) -> float:
        return self.assessor(entity, formula.predicate).lookup(formula, bindings)

    def counters(self) -> dict[str, QueryCounter]:
        return {c.id: c.counter.copy() for c in self.consultants}

    def total(self) -> QueryCounter:
        total = QueryCounter()
        for c in self.consultants:
            total = total + c.counter
        return total
