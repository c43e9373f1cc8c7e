"""Incremental filter resolver that warms STM buffers as properties are confirmed."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .consultant import ConsultantSet
from .core import Bindings, BoundProperty, EntityRef, Formula, StmRegError, UnknownPredicateError
from .reg import RegConfig


class ResolutionError(StmRegError):
    pass


@dataclass(frozen=True)
class ResolutionQuery:
    target_variable: str
    properties: tuple[tuple[Formula, Bindings], ...]

    def __post_init__(self) -> None:
        if not self.properties:
            raise ResolutionError("a resolution query needs at least one property")
        for formula, bindings in self.properties:
            if self.target_variable not in formula.names:
                raise ResolutionError(f"{formula} does not mention {self.target_variable}")
            if self.target_variable in bindings:
                raise ResolutionError(f"{self.target_variable} must stay unbound in {formula}")
            if formula.arity != 1:
                raise ResolutionError(f"relational formula {formula} cannot be resolved here")

    def __str__(self) -> str:
        return " ".join(str(f) for f, _ in self.properties)


@dataclass(frozen=True)
class ResolutionResult:
    candidates: tuple[EntityRef, ...]

    @property
    def ambiguous(self) -> bool:
        return len(self.candidates) > 1


def resolve(
    query: ResolutionQuery,
    consultants: ConsultantSet,
    config: RegConfig = RegConfig(),
    *,
    tau: Optional[float] = None,
) -> ResolutionResult:
    """Filter the world by each property in turn.

    A candidate that passes a property has it cached in its STM buffer right
    away, so entities that satisfy only a prefix of the query keep that
    prefix. ``tau`` overrides ``config.tau_dph`` as the acceptance threshold.
    """
    threshold = config.tau_dph if tau is None else tau
    first = query.properties[0][0].predicate
    owners = consultants.owners(first)
    if not owners:
        raise UnknownPredicateError(f"no consultant advertises {first!r}")
    for formula, _ in query.properties[1:]:
        if not consultants.owners(formula.predicate):
            raise UnknownPredicateError(f"no consultant advertises {formula.predicate!r}")
    candidates = [e for c in owners for e in c.domain()]
    var = query.target_variable
    for formula, bindings in query.properties:
        survivors = []
        for x in candidates:
            bound = bindings.bind(var, x)
            if consultants.apply(x, formula, bound) > threshold:
                survivors.append(x)
                if config.populate_stm:
                    consultants.consultant_of(x).stm_insert(x, BoundProperty(formula, bound))
        candidates = survivors
    return ResolutionResult(tuple(candidates))
