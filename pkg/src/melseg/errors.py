"""Exception types raised across the package."""


class MelsegError(Exception):
    """Base class for all package errors."""


class ValidationError(MelsegError, ValueError):
    """Input data or configuration failed validation (CLI exit code 1)."""


# corpus
class MalformedHeader(ValidationError):
    pass


class NonIntegerField(ValidationError):
    pass


class NonMonotoneOnset(ValidationError):
    pass


class OverlappingNotes(ValidationError):
    pass


class EmptyMelody(ValidationError):
    pass


class FirstNoteNotPhraseStart(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class DuplicateId(ValidationError):
    pass


class InvalidNote(ValidationError):
    pass


# numerics
class DimensionMismatch(ValidationError):
    pass


class TooLargeForEnumeration(MelsegError):
    pass


class EmptyFreeSet(ValidationError):
    pass


class EmptyStream(ValidationError):
    pass


class NonFiniteGradient(MelsegError, ArithmeticError):
    pass


class NonFiniteLoss(MelsegError, ArithmeticError):
    pass


class NonPositiveProbability(ValidationError):
    pass


class ConfigMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NonPositiveBeta(ValidationError):
    pass


class EmptyBsp(ValidationError):
    pass


class EmptyKSet(ValidationError):
    pass


class EmptyTrainingSet(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class FoldTooSmall(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class ModelFormatError(ValidationError):
    pass
