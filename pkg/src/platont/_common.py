"""Common models and methods."""

import abc
import json
import hashlib
import pathlib
import typing as t
import concurrent.futures

import numpy as np

T = t.TypeVar("T")
U = t.TypeVar("U")

INDICATORS = ("delay", "loss", "bandwidth")
"""Indicator channel names, in channel order."""


class Deserialisable(metaclass=abc.ABCMeta):
    """Deserialisable from JSON-compatible file data."""

    @classmethod
    @abc.abstractmethod
    def from_data(cls, data: t.Dict[str, t.Any]) -> "Deserialisable":
        """Deserialise from JSON-compatible file data."""


class Serialisable(metaclass=abc.ABCMeta):
    """Serialisable to JSON-compatible file data."""

    @abc.abstractmethod
    def to_data(self) -> t.Dict[str, t.Any]:
        """Serialise to JSON-compatible file data."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Create an independent random stream.

    Streams are keyed by the master seed and any number of stream indices
    (eg a purpose tag and a time step), so draws never depend on the order
    in which streams are created.

    Args:
        seed: master seed
        stream: stream indices

    Returns:
        seeded generator
    """

    return np.random.default_rng([int(seed), *(int(s) for s in stream)])


def map_ordered(
    fn: t.Callable[[T], U],
    items: t.Iterable[T],
    workers: int = 1,
) -> t.List[U]:
    """Apply a function to each item, possibly in worker threads.

    Results are returned in input order regardless of completion order.

    Args:
        fn: function to apply
        items: inputs
        workers: worker thread count, 1 to run inline

    Returns:
        function results
    """

    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [f.result() for f in futures]


def _to_builtin(value: t.Any) -> t.Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"Not JSON-serialisable: {type(value).__name__}")


def canonical_json(data: t.Any, indent: int = None) -> str:
    """Serialise to JSON with sorted keys, for hashing and byte-stable files."""
    return json.dumps(data, sort_keys=True, indent=indent, default=_to_builtin)


def digest(data: t.Any) -> str:
    """SHA-256 hex digest of the canonical JSON of some data."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def write_json(path: t.Union[str, pathlib.Path], data: t.Any) -> None:
    """Write data as canonical, indented JSON."""
    pathlib.Path(path).write_text(canonical_json(data, indent=2) + "\n")


def read_json(path: t.Union[str, pathlib.Path]) -> t.Any:
    """Read JSON data from a file."""
    return json.loads(pathlib.Path(path).read_text())
