"""Referring expression generation over consultants fronted by short-term-memory buffers."""

from .buffer import BufferConfig, BufferPool, Clock, STMBuffer, similarity
from .consultant import Consultant, ConsultantSet, FactTable, QueryCounter
from .core import (
    Bindings,
    BoundProperty,
    Description,
    EntityRef,
    Formula,
    StmRegError,
    UnknownEntityError,
    UnknownPredicateError,
    find_unbound,
    rebind,
)
from .reg import RegConfig, RegResult, cross_bindings, dist_pia, order, sd_pia, sd_pia_h, sd_pia_stm_h, stm_apply
from .resolver import ResolutionQuery, ResolutionResult, resolve

__version__ = "0.1.0"

__all__ = [
    "Bindings",
    "BoundProperty",
    "BufferConfig",
    "BufferPool",
    "Clock",
    "Consultant",
    "ConsultantSet",
    "Description",
    "EntityRef",
    "FactTable",
    "Formula",
    "QueryCounter",
    "RegConfig",
    "RegResult",
    "ResolutionQuery",
    "ResolutionResult",
    "STMBuffer",
    "StmRegError",
    "UnknownEntityError",
    "UnknownPredicateError",
    "cross_bindings",
    "dist_pia",
    "find_unbound",
    "order",
    "rebind",
    "resolve",
    "sd_pia",
    "sd_pia_h",
    "sd_pia_stm_h",
    "similarity",
    "stm_apply",
]
