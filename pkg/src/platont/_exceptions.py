"""Explicit exceptions for workbench failures."""

import typing as t


class PlatontError(Exception):
    """Base workbench error."""

    _child_classes = {}

    def __init_subclass__(cls, **kwargs):
        name = cls.__name__
        if name[-5:] == "Error":
            name = name[:-5]
        PlatontError._child_classes[name] = cls
        super().__init_subclass__(**kwargs)

    @property
    def code(self) -> str:
        """Short error code, the class name without the "Error" suffix."""
        name = type(self).__name__
        return name[:-5] if name[-5:] == "Error" else name

    def to_record(self) -> t.Dict[str, str]:
        """Serialise to a failure record for a results bundle."""
        return {"code": self.code, "message": str(self)}

    @classmethod
    def from_record(cls, data: t.Dict[str, str]) -> "PlatontError":
        """Rebuild an error from a failure record.

        Args:
            data: record with "code" and "message"

        Returns:
            error instance of the registered class (the base class for
                unknown codes)
        """

        exception_class = cls._child_classes.get(data["code"], PlatontError)
        return exception_class(data.get("message"))


class InvalidArgumentError(PlatontError, ValueError):
    """An argument is outside its allowed range."""


class ValidationError(PlatontError, ValueError):
    """A model violates its structural invariants."""


class FormatError(PlatontError, ValueError):
    """A topology, dataset or checkpoint file could not be parsed."""


class UnreachablePairError(PlatontError, LookupError):
    """No path exists between a source and destination node."""


class ShapeError(PlatontError, ValueError):
    """Array dimensions do not match what the operation expects."""


class StateError(PlatontError, RuntimeError):
    """Operation called out of order, eg backward without a forward pass."""


class DegenerateEmbeddingError(PlatontError, ArithmeticError):
    """A latent row has zero norm, so cosine similarity is undefined."""


class NumericError(PlatontError, ArithmeticError):
    """A computed value is not finite."""


class RankDeficiencyError(PlatontError, ArithmeticError):
    """Normal equations are singular without regularisation.

    Use a positive ridge strength to make the system solvable.
    """


class ConvergenceError(PlatontError, ArithmeticError):
    """An iterative solver reached its iteration limit."""


class UnsupportedTaskError(PlatontError, ValueError):
    """The requested task has no differentiable surrogate."""
