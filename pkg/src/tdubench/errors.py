"""Exception hierarchy with machine-readable codes and CLI exit statuses.

Every toolkit exception carries a short ``code`` string so callers (and the
wire backend) can dispatch on failures without parsing messages.  The CLI
maps exception families to distinct exit statuses: 2 usage, 3 configuration,
4 protocol, 5 backend.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_PROTOCOL = 4
EXIT_BACKEND = 5


class TduBenchError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "ERROR"
    exit_status = EXIT_PROTOCOL

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(TduBenchError):
    """Invalid configuration value, file, or parameter set."""

    code = "CONFIG"
    exit_status = EXIT_CONFIG


class CalibrationError(ConfigError):
    """Calibration problem is ill-posed (e.g. more free params than targets)."""

    code = "CALIBRATION"


class BackendError(TduBenchError):
    """Drive backend failure (unknown backend, transport fault, timeout)."""

    code = "BACKEND"
    exit_status = EXIT_BACKEND


class ProtocolError(TduBenchError):
    """A test protocol could not run to completion."""

    code = "PROTOCOL"
    exit_status = EXIT_PROTOCOL


class DriveFault(BackendError):
    """Drive is in a fault state and refuses commands."""

    code = "DRIVE_FAULT"


class RangeError(BackendError):
    """Command target outside the drive's accepted range."""

    code = "TARGET_RANGE"


class UnknownMotorError(BackendError):
    """Command addressed a motor id the drive does not have."""

    code = "UNKNOWN_MOTOR"


class CodecError(TduBenchError):
    """Frame encoding/decoding failure; subclasses pin the exact cause."""

    code = "CODEC"
    exit_status = EXIT_BACKEND


class BodyOverflowError(CodecError):
    code = "BODY_OVERFLOW"


class BadLengthError(CodecError):
    code = "BAD_DLC"


class UnknownOpcodeError(CodecError):
    code = "UNKNOWN_OPCODE"


class ReservedIdError(CodecError):
    code = "RESERVED_ID"


class BadFieldError(CodecError):
    """Opcode-specific body field holds an invalid value."""

    code = "BAD_FIELD"


class AnalysisError(TduBenchError):
    """Numerical analysis cannot produce a defined result."""

    code = "ANALYSIS"
    exit_status = EXIT_PROTOCOL


class SingularFitError(AnalysisError):
    """Regression input is degenerate (all x identical)."""

    code = "SINGULAR_FIT"


class NoExcitationError(AnalysisError):
    """Reference signal amplitude below the numeric floor."""

    code = "NO_EXCITATION"


class NonPhysicalSubtractionError(AnalysisError):
    """Sound-level subtraction with measurement at or below the floor."""

    code = "LEVEL_BELOW_FLOOR"


class NotReachedError(AnalysisError):
    """A threshold/cutoff was never crossed; carries the last observed value."""

    code = "NOT_REACHED"

    def __init__(self, message: str, last_value: float | None = None):
        super().__init__(message)
        self.last_value = last_value
