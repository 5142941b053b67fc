class BinscanError(Exception):
    """Base class for all package errors."""


class EmptyInput(BinscanError, ValueError):
    pass


class InvalidImage(BinscanError, ValueError):
    pass


class ShapeMismatch(BinscanError, ValueError):
    pass


class OddDimension(BinscanError, ValueError):
    pass


class BadLabel(BinscanError, ValueError):
    pass


class ModelNotLoaded(BinscanError, RuntimeError):
    pass


class CorruptModel(BinscanError, ValueError):
    pass


class EmptyClass(BinscanError, ValueError):
    def __init__(self, label: str):
        super().__init__(f"class directory {label!r} contains no usable files")
        self.label = label


class UnreadableFile(BinscanError, OSError):
    pass


class TooFewSamples(BinscanError, ValueError):
    pass


class EmptyDataset(BinscanError, ValueError):
    pass


class NonFiniteLoss(BinscanError, FloatingPointError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


class LabelMismatch(BinscanError, ValueError):
    pass


class UnreadablePath(BinscanError, OSError):
    pass


class SinkWriteError(BinscanError, OSError):
    pass


class InvalidProfile(BinscanError, ValueError):
    pass
