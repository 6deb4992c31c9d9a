"""Exception hierarchy shared across the engine."""


class QudiffError(Exception):
    """Base class for all engine errors."""


class ZeroVector(QudiffError):
    """Embedding input has zero L2 norm."""


class BadLength(QudiffError):
    """Vector length is not a power of two."""


class WireOutOfRange(QudiffError):
    """Gate wire index invalid for the register."""


class BadSplit(QudiffError):
    """Data/ancilla split does not match the register size."""


class ZeroShots(QudiffError):
    """Shot count must be positive."""


class BadShape(QudiffError):
    """Parameter tensor shape does not match the circuit template."""


class StepOutOfRange(QudiffError):
    """Diffusion step index outside 1..T."""


class BadKind(QudiffError):
    """Unknown schedule or circuit family name."""


class AllZero(QudiffError):
    """Nonnegative vector is identically zero where a maximum is needed."""


class LengthMismatch(QudiffError):
    """Two vectors expected to have equal length do not."""


class NonFiniteLoss(QudiffError):
    """Loss or gradient became NaN/Inf."""


class BadMagic(QudiffError):
    """IDX file magic number not recognized."""


class TruncatedFile(QudiffError):
    """File payload shorter than its header promises."""


class CountMismatch(QudiffError):
    """Image and label files disagree on sample count."""


class ConfigError(QudiffError):
    """Run configuration failed validation."""


class CheckpointError(QudiffError):
    """Checkpoint file malformed or version unsupported."""
