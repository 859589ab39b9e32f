class SqueezeError(RuntimeError):
    r"""
    Base class of every error raised by squeeze.
    The CLI turns these into exit code 1.
    """
    pass


class ConfigsError(SqueezeError):
    pass


class ContainerError(SqueezeError):
    pass


class MagicMismatch(ContainerError):
    pass


class VersionUnsupported(ContainerError):
    pass


class ShapeMismatch(ContainerError, ValueError):
    pass


class NonFiniteValue(ContainerError, ValueError):
    pass


class IoFailure(ContainerError):
    pass


class UnknownFormat(MagicMismatch):
    r"""
    The magic matches neither S10T nor S10P
    """


class CorruptMask(ContainerError):
    pass


class ModelSpecError(SqueezeError):
    pass


class EmptyInput(SqueezeError, ValueError):
    pass


class BadBits(SqueezeError, ValueError):
    pass


class CodeOutOfRange(SqueezeError, ValueError):
    pass


class CountMismatch(SqueezeError, ValueError):
    pass


class DimensionMismatch(SqueezeError, ValueError):
    pass


class NotPositiveDefinite(SqueezeError):
    pass


class ZeroSamples(SqueezeError):
    pass


class NonPositiveDiagonal(SqueezeError, ValueError):
    pass


class ZeroPivot(SqueezeError):
    pass


class MissingPrefix(SqueezeError):
    pass


class EmptySample(SqueezeError, ValueError):
    pass
