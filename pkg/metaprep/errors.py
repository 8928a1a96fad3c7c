from typing import Optional


class MetaprepError(Exception):
    """Base class for every error raised by metaprep"""


class ShapeError(MetaprepError, ValueError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        rendered = ', '.join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class UnknownOpError(MetaprepError, KeyError):
    ...


class GradError(MetaprepError, RuntimeError):
    ...


class GraphConsumedError(GradError):
    ...


class IdRangeError(MetaprepError, ValueError):
    ...


class DegenerateBatchError(MetaprepError, ValueError):
    ...


class UnknownTaskError(MetaprepError, KeyError):
    ...


class InstabilityError(MetaprepError, ValueError):
    ...


class NonFiniteError(MetaprepError, ArithmeticError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class ConfigError(MetaprepError, ValueError):
    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")


class CheckpointError(MetaprepError, ValueError):
    ...


class BudgetMismatchError(MetaprepError, ValueError):
    ...


class DegenerateTaskError(MetaprepError, RuntimeError):
    ...


class EmptyLogError(MetaprepError, ValueError):
    ...
