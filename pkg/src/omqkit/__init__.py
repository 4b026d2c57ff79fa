"""Ontology-mediated queries over description logics, disjunctive datalog,
MSNP fragments and CSP templates with constants."""

from .core import (Atom, Instance, OmqError, ParseError, RelStructure, Schema,
                   SizeBoundError, UnsupportedError, ValidationError, parse_instance)

__version__ = "0.1.0"

__all__ = ["Atom", "Instance", "OmqError", "ParseError", "RelStructure", "Schema",
           "SizeBoundError", "UnsupportedError", "ValidationError", "parse_instance",
           "__version__"]
