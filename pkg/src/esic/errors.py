"""Exception hierarchy shared by every layer of the toolchain."""

from __future__ import annotations


class EsiError(Exception):
    """Base class for all toolchain errors."""


# --- type system ---------------------------------------------------------


class EsiTypeError(EsiError):
    """A type value violates a structural constraint (width, names, arity)."""


class NestedListError(EsiTypeError):
    """A list type appears inside another type; lists are outermost-only."""


class VariableSizeError(EsiError):
    """A fixed-size operation was applied to a type containing a list."""


class TypeSyntaxError(EsiError):
    """Type text does not match the grammar. Carries the offending offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


# --- wire encoding -------------------------------------------------------


class ShapeMismatchError(EsiError):
    """A message value does not have the shape its type requires."""


class ValueRangeError(EsiError):
    """A scalar or length is outside the representable range."""


class BitLengthError(EsiError):
    """A bit string has the wrong length for the requested operation."""


class BadTagError(EsiError):
    """An enum or union tag is outside the declared variant count."""


class BeatCountError(EsiError):
    """A beat sequence is empty, mis-sized, or terminates early."""


class NonzeroPadError(EsiError):
    """Padding bits that must be zero are not."""


class MissingLastError(EsiError):
    """A beat sequence does not end with a last-flagged beat."""


class TruncatedError(EsiError):
    """A beat stream ended before its header-implied length."""


# --- system description --------------------------------------------------


class DiagnosticsError(EsiError):
    """Raised by the parser when a description cannot be loaded.

    Carries the full diagnostic list; no partial description is produced.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(d.render() for d in self.diagnostics)
        super().__init__(lines or "invalid system description")


# --- fabric / simulation -------------------------------------------------


class UncheckedDesignError(EsiError):
    """Elaboration was attempted on a description with check errors."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "design has %d check error(s); run check first" % len(self.diagnostics)
        )


class CombLoopError(EsiError):
    """The per-tick handshake fixpoint did not converge (zero-stage cycle)."""


class BehaviorViolationError(EsiError):
    """An actor behavior broke its contract."""


# --- cosimulation --------------------------------------------------------


class ProtocolError(EsiError):
    """A cosim frame or payload violates the wire protocol."""
