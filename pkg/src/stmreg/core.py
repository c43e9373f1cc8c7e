"""Logical vocabulary: entity references, atomic formulas, bindings, descriptions."""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union

_ENTITY_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*?)_(\d+)$")
_TERM_RE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*\(([^()]*)\)\s*$")


class StmRegError(Exception):
    """Base class for errors raised by this package."""


class UnknownEntityError(StmRegError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown entity"


class UnknownPredicateError(StmRegError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown predicate"


@dataclass(frozen=True, order=True)
class EntityRef:
    """Globally unique entity id: the owning consultant plus a local index."""

    consultant_id: str
    local_index: int

    def __post_init__(self) -> None:
        if self.local_index < 0:
            raise ValueError(f"negative local index: {self.local_index}")

    def __str__(self) -> str:
        return f"{self.consultant_id}_{self.local_index}"

    @classmethod
    def parse(cls, text: str) -> EntityRef:
        m = _ENTITY_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not an entity reference: {text!r}")
        return cls(m.group(1), int(m.group(2)))

    @staticmethod
    def looks_like(text: str) -> bool:
        return _ENTITY_RE.match(text.strip()) is not None


class Bindings(Mapping[str, EntityRef]):
    """Immutable, hashable partial map from variable names to entities."""

    __slots__ = ("_map", "_key")

    def __init__(self, items: Union[Mapping[str, EntityRef], Iterable[tuple[str, EntityRef]]] = ()):
        self._map = dict(items)
        self._key = tuple(sorted(self._map.items()))

    def __getitem__(self, name: str) -> EntityRef:
        return self._map[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Bindings):
            return self._key == other._key
        if isinstance(other, Mapping):
            return self._map == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}->{v}" for k, v in self._key)
        return "{" + inner + "}"

    def bind(self, name: str, entity: EntityRef) -> Bindings:
        merged = dict(self._map)
        merged[name] = entity
        return Bindings(merged)

    def union(self, other: Mapping[str, EntityRef]) -> Bindings:
        merged = dict(self._map)
        merged.update(other)
        return Bindings(merged)


EMPTY = Bindings()


@dataclass(frozen=True)
class Formula:
    """A property template: a predicate over typed variables, e.g. ``on(X:object, Y:object)``."""

    predicate: str
    variables: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.variables:
            raise ValueError(f"formula {self.predicate!r} has arity 0")
        names = [name for name, _ in self.variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable in {self.predicate}{tuple(names)}")

    @property
    def arity(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.variables)

    def type_of(self, name: str) -> str:
        for var, typ in self.variables:
            if var == name:
                return typ
        raise KeyError(name)

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(self.names)})"

    @classmethod
    def parse(cls, text: str, default_type: str) -> Formula:
        """Parse ``on(X:object,Y)``; untyped variables get ``default_type``."""
        predicate, args = parse_term(text)
        variables = []
        for arg in args:
            name, _, typ = arg.partition(":")
            name, typ = name.strip(), typ.strip() or default_type
            if not name or EntityRef.looks_like(name):
                raise ValueError(f"bad variable {arg!r} in {text!r}")
            variables.append((name, typ))
        return cls(predicate, tuple(variables))


def parse_term(text: str) -> tuple[str, list[str]]:
    """Split ``pred(a, b)`` into ``("pred", ["a", "b"])``."""
    m = _TERM_RE.match(text)
    if m is None:
        raise ValueError(f"malformed term: {text!r}")
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    return m.group(1), args


@dataclass(frozen=True, eq=False)
class BoundProperty:
    """A formula together with (possibly partial) bindings.

    Identity is the predicate plus the positional argument tuple, so the
    probability of a fact is never part of it and variable renaming does
    not create a distinct element.
    """

    formula: Formula
    bindings: Bindings = EMPTY

    def __post_init__(self) -> None:
        if not isinstance(self.bindings, Bindings):
            object.__setattr__(self, "bindings", Bindings(self.bindings))
        extra = set(self.bindings) - set(self.formula.names)
        if extra:
            raise ValueError(f"bindings {sorted(extra)} not variables of {self.formula}")

    @property
    def predicate(self) -> str:
        return self.formula.predicate

    @property
    def args(self) -> tuple[Union[EntityRef, str], ...]:
        return tuple(self.bindings.get(name, name) for name in self.formula.names)

    @property
    def is_ground(self) -> bool:
        return len(self.bindings) == self.formula.arity

    def entities(self) -> tuple[EntityRef, ...]:
        seen: dict[EntityRef, None] = {}
        for arg in self.args:
            if isinstance(arg, EntityRef):
                seen.setdefault(arg)
        return tuple(seen)

    def _key(self) -> tuple:
        return (self.formula.predicate, self.args)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoundProperty):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"

    __repr__ = __str__


# entity -> ordered, duplicate-free sub-description
Description = dict[EntityRef, tuple[BoundProperty, ...]]


def rebind(bindings: Mapping[str, EntityRef], old: EntityRef, new: EntityRef) -> Bindings:
    """Replace every occurrence of ``old`` among the binding values with ``new``."""
    return Bindings({k: (new if v == old else v) for k, v in bindings.items()})


def find_unbound(formula: Formula, bindings: Mapping[str, EntityRef]) -> list[tuple[str, str]]:
    return [(name, typ) for name, typ in formula.variables if name not in bindings]


def involved_entities(sub_description: Iterable[BoundProperty]) -> list[EntityRef]:
    """Every entity mentioned in the bindings of a sub-description, first-seen order."""
    seen: dict[EntityRef, None] = {}
    for prop in sub_description:
        for entity in prop.entities():
            seen.setdefault(entity)
    return list(seen)


def render_description(description: Description) -> dict[str, list[str]]:
    return {str(entity): [str(p) for p in sub] for entity, sub in description.items()}
