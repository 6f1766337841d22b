"""Exception types shared across the toolkit."""


class AdvsvError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AdvsvError):
    """Malformed file container (WAV header, feature blob, checkpoint)."""


class UnsupportedFormatError(FormatError):
    """Well-formed file we deliberately refuse (e.g. multichannel WAV)."""


class ValidationError(AdvsvError):
    """Input data violates a documented invariant."""


class ConfigError(AdvsvError):
    """Configuration values are inconsistent or out of range."""


class ShapeError(AdvsvError):
    """Array dimensions incompatible with the operation."""


class ContractError(AdvsvError):
    """API misuse: wrong feature kind, fingerprint mismatch, stale flags."""


class ProtocolError(AdvsvError):
    """Trial protocol cannot be satisfied by the given corpus."""


class InputTooShortError(AdvsvError):
    """Signal shorter than one analysis frame."""


class TrainingFailure(AdvsvError):
    """Optimization diverged; carries epoch/batch context in the message."""


class UndefinedMetricError(AdvsvError):
    """Metric has an empty denominator (e.g. FPR with no negative trials)."""


class NotFoundError(AdvsvError):
    """Unknown session/trial/audio identifier."""


class ConflictError(AdvsvError):
    """Operation conflicts with current state (double answer, closed session)."""
