"""Shared fixtures."""

import typing as t

import numpy as np
import pytest

import platont


def finite_difference(
    fn: t.Callable[[], float], array: np.ndarray, step: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array, in place."""
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + step
        plus = fn()
        array[index] = original - step
        minus = fn()
        array[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    return grad


def chain(node_count: int = 3) -> platont.Network:
    links = [platont.Link(id=i, a=i, b=i + 1) for i in range(node_count - 1)]
    return platont.Network(node_count=node_count, links=links)


def star(leaf_count: int = 3) -> platont.Network:
    links = [platont.Link(id=i, a=0, b=i + 1) for i in range(leaf_count)]
    return platont.Network(node_count=leaf_count + 1, links=links)


@pytest.fixture
def chain_network() -> platont.Network:
    return chain()


@pytest.fixture
def star_network() -> platont.Network:
    return star()


@pytest.fixture(scope="session")
def small_tree() -> platont.Network:
    return platont.generate_random_tree(9, seed=3)


@pytest.fixture(scope="session")
def small_dataset(small_tree) -> platont.TomographyDataset:
    pairs = platont.default_probe_pairs(small_tree)
    paths = platont.enumerate_paths(small_tree, pairs)
    return platont.build_dataset(
        small_tree, paths, horizon=48, clean_fraction=0.25, noise_level=0.1, seed=5
    )
