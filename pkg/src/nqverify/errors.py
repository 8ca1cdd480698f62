"""Exception hierarchy shared by all modules.

Everything a user can trigger with bad input derives from :class:`InputError`
(the CLI maps it to exit code 3). Errors that signal a bug in this package
derive from :class:`InternalError`.
"""


class VerifierError(Exception):
    """Base class for every error raised by nqverify."""


class InputError(VerifierError):
    """Malformed or invalid user input."""

    def __init__(self, message, pos=None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (line {pos[0]}, column {pos[1]})"
        super().__init__(message)


class InternalError(VerifierError):
    """A consistency check inside the verifier failed."""


# operator core

class DisjointnessError(InputError):
    """Variable tuples that must be disjoint overlap."""


class ExtensionError(InputError):
    """An operator cannot be extended to (or traced down to) a register."""


class HermiticityError(InputError):
    """A matrix expected to be Hermitian is not."""


class ValidationError(InputError):
    """A matrix fails the invariant of its declared kind."""


# program front end

class ParseError(InputError):
    """Syntax error with position and the set of expected tokens."""

    def __init__(self, message, pos, expected=()):
        self.expected = frozenset(expected)
        if self.expected:
            message = f"{message}; expected one of {sorted(self.expected)}"
        super().__init__(message, pos)


class TypecheckError(InputError):
    pass


class UnknownName(TypecheckError):
    pass


class DuplicateDefinition(TypecheckError):
    pass


class ArityMismatch(TypecheckError):
    pass


class NotUnitary(TypecheckError):
    pass


class NotPredicate(TypecheckError):
    pass


class NotMeasurement(TypecheckError):
    pass


# semantics / calculus

class LoopPresentError(InputError):
    """A loop-free-only operation met a while statement."""


class SetExplosionError(VerifierError):
    """A set of channels or predicates grew past the configured cap."""


class MissingInvariant(InputError):
    pass


class InvalidInvariant(InputError):
    """The supplied loop invariant does not satisfy the While premise."""

    def __init__(self, message, node=None, decision=None, pos=None):
        self.node = node
        self.decision = decision
        super().__init__(message, pos)


class InternalCertificateError(InternalError):
    """A certificate produced by the order engine failed re-verification."""


# file formats

class FormatError(InputError):
    """An operator file cannot be decoded."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
