"""Exception types shared across the kernel.

Submission outcomes (Rejected, InsufficientEnergy) are return values, not
exceptions; these classes cover administrative and structural failures.
"""


class GuardlogError(Exception):
    """Base class for all kernel errors."""

    code = "INTERNAL"


class PolicyViolation(GuardlogError):
    code = "POLICY_VIOLATION"


class DuplicateActor(GuardlogError):
    code = "POLICY_VIOLATION"


class InsufficientEnergyError(GuardlogError):
    """Raised by administrative operations (e.g. envelope issuance); the
    submit pipeline reports insufficient energy as an outcome instead."""

    code = "INSUFFICIENT_ENERGY"


class PayloadError(GuardlogError):
    code = "PAYLOAD_ERROR"


class NotFound(GuardlogError):
    code = "NOT_FOUND"


class StateError(GuardlogError):
    code = "STATE_ERROR"


class PatternError(GuardlogError):
    code = "POLICY_VIOLATION"


class FormatError(GuardlogError):
    code = "PAYLOAD_ERROR"


class EncodingError(GuardlogError):
    code = "PAYLOAD_ERROR"


class ConsistencyError(GuardlogError):
    """Kernel bug guard: sequence gaps, duplicate appends."""

    code = "INTERNAL"


class ConfigError(GuardlogError):
    code = "INTERNAL"
