"""
Exception hierarchy for TextSR.

Every error also derives from the closest builtin, so callers that only
know about ValueError / OSError keep working. main.py maps OSError to exit
code 2 and everything else to exit code 1.
"""


class TextSRError(Exception):
    """Base class for all errors raised by this package"""


class ParameterError(TextSRError, ValueError):
    """A parameter lies outside its valid range"""


class ShapeError(TextSRError, ValueError):
    """Tensor or image shapes are incompatible"""


class PromptError(ParameterError):
    """The prompt does not contain the keyword token exactly once"""


class DomainError(TextSRError, ValueError):
    """Values outside the mathematical domain of an operation"""


class SingularScheduleError(TextSRError, ArithmeticError):
    """alpha_t is zero, the one-step inversion is undefined"""


class MetadataError(TextSRError, ValueError):
    """Sample metadata (boxes, manifest entries) is inconsistent"""


class DatasetIOError(TextSRError, OSError):
    """Dataset directory missing or not writable"""


class TrainingDivergedError(TextSRError, RuntimeError):
    """Loss became NaN or infinite during training"""
