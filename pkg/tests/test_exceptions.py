"""Test the exception registry."""

import pytest

import platont


@pytest.mark.parametrize(
    ("error", "code"),
    [
        (platont.NumericError("Loss component 'rec' is not finite"), "Numeric"),
        (platont.UnreachablePairError("No path from 2 to 0"), "UnreachablePair"),
        (platont.PlatontError("unexpected"), "Platont"),
    ],
)
def test_record_rebuilds_error(error, code):
    record = error.to_record()
    assert record == {"code": code, "message": str(error)}
    rebuilt = platont.PlatontError.from_record(record)
    assert type(rebuilt) is type(error)
    assert str(rebuilt) == str(error)


def test_unknown_code():
    rebuilt = platont.PlatontError.from_record({"code": "Exotic", "message": "x"})
    assert type(rebuilt) is platont.PlatontError


def test_builtin_bases():
    assert isinstance(platont.ShapeError("x"), ValueError)
    assert isinstance(platont.UnreachablePairError("x"), LookupError)
    assert isinstance(platont.ConvergenceError("x"), ArithmeticError)
