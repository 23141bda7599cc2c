"""Error hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer
and CLI can surface failures without string matching.
"""

from __future__ import annotations


class GlossError(Exception):
    """Base class for all errors raised by this package."""

    code = "GlossError"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


# --- pipeline wiring and lifecycle -----------------------------------------

class KindMismatch(GlossError):
    code = "KindMismatch"


class CycleWouldForm(GlossError):
    code = "CycleWouldForm"


class UnknownComponent(GlossError):
    code = "UnknownComponent"


class AssemblyNotEditable(GlossError):
    code = "AssemblyNotEditable"


class NotRunning(GlossError):
    code = "NotRunning"


class InvalidStateTransition(GlossError):
    code = "InvalidStateTransition"


class DuplicateComponentId(GlossError):
    code = "DuplicateComponentId"


class AmbiguousPorts(GlossError):
    code = "AmbiguousPorts"


class PortUnavailable(GlossError):
    code = "PortUnavailable"


# --- codecs and event adaptation --------------------------------------------

class UnknownCodec(GlossError):
    code = "UnknownCodec"


class CodecFailure(GlossError):
    code = "CodecFailure"


class MalformedXml(CodecFailure):
    code = "MalformedXml"


class SchemaViolation(CodecFailure):
    code = "SchemaViolation"


class RangeViolation(CodecFailure):
    code = "RangeViolation"


# --- SMS transport -----------------------------------------------------------

class MessageTooLong(GlossError):
    code = "MessageTooLong"


class InvalidCharset(GlossError):
    code = "InvalidCharset"


class InconsistentTotal(GlossError):
    code = "InconsistentTotal"


class MixedMessageIds(GlossError):
    code = "MixedMessageIds"


class GatewayUnreachable(GlossError):
    code = "GatewayUnreachable"


# --- store and services -------------------------------------------------------

class IoFailure(GlossError):
    code = "IoFailure"


class InvalidRange(GlossError):
    code = "InvalidRange"


class ParseFailure(GlossError):
    code = "ParseFailure"


class UnknownHearsay(GlossError):
    code = "UnknownHearsay"


class CoincidentPoints(GlossError):
    code = "CoincidentPoints"


class EmptyTrail(GlossError):
    code = "EmptyTrail"


class NoKnownLocation(GlossError):
    code = "NoKnownLocation"


class NoMapConfigured(GlossError):
    code = "NoMapConfigured"


# --- simulator -----------------------------------------------------------------

class ValidationFailure(GlossError):
    code = "ValidationFailure"


class MissingPositions(GlossError):
    code = "MissingPositions"


class SimulationTooLarge(GlossError):
    code = "SimulationTooLarge"


# --- control plane ----------------------------------------------------------------

class UnknownCatalogKind(GlossError):
    code = "UnknownCatalogKind"


class BadParams(GlossError):
    code = "BadParams"
