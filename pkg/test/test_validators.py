import pytest

from cellscribe.scribe_exceptions import ScribeArgumentException, ScribeIOException
from cellscribe.validators import (
    validate_fraction,
    validate_input_path,
    validate_named_path,
    validate_output_dir,
    validate_positive,
    validate_probability,
    validate_ratios,
)


@pytest.mark.parametrize("value, expected", [
    ("0.05", 0.05), ("5%", 0.05), ("0.5%", 0.005), (0.25, 0.25), (1, 1.0),
])
def test_validate_fraction(value, expected):
    assert validate_fraction(value) == pytest.approx(expected)


@pytest.mark.parametrize("value", ["abc", "150%", -0.1, None])
def test_validate_fraction_rejects(value):
    with pytest.raises(ScribeArgumentException):
        validate_fraction(value)


def test_validate_fraction_zero():
    assert validate_fraction("0") == 0.0
    with pytest.raises(ScribeArgumentException):
        validate_fraction("0", allow_zero=False)


def test_validate_probability():
    assert validate_probability("0.85") == pytest.approx(0.85)
    for value in ("0", "1", "1.5"):
        with pytest.raises(ScribeArgumentException):
            validate_probability(value)


def test_validate_positive():
    assert validate_positive("3", integer=True) == 3
    assert validate_positive("0.1") == pytest.approx(0.1)
    for value in ("0", "-2", "x"):
        with pytest.raises(ScribeArgumentException):
            validate_positive(value)
    with pytest.raises(ScribeArgumentException):
        validate_positive("2.5", integer=True)


@pytest.mark.parametrize("value", ["80/10/10", "0.8,0.1,0.1", "80:10:10", (0.8, 0.1, 0.1)])
def test_validate_ratios(value):
    assert validate_ratios(value) == pytest.approx((0.8, 0.1, 0.1))


@pytest.mark.parametrize("value", ["80/20", "0.5,0.5,0.5", "a/b/c", (1.2, -0.1, -0.1)])
def test_validate_ratios_rejects(value):
    with pytest.raises(ScribeArgumentException):
        validate_ratios(value)


def test_paths(tmp_path):
    present = tmp_path / "a.txt"
    present.write_text("x")
    assert validate_input_path(str(present)) == present
    with pytest.raises(ScribeIOException):
        validate_input_path(tmp_path / "missing.txt")
    with pytest.raises(ScribeIOException):
        validate_input_path(tmp_path, kind="file")
    with pytest.raises(ScribeArgumentException):
        validate_input_path(None)

    created = validate_output_dir(tmp_path / "out" / "nested")
    assert created.is_dir()
    with pytest.raises(ScribeIOException):
        validate_output_dir(present)


def test_validate_named_path(tmp_path):
    path = tmp_path / "rb.jsonl"
    path.write_text("")
    assert validate_named_path(f"RBT={path}") == ("RBT", path)
    assert validate_named_path(str(path))[0] == "BS"
    with pytest.raises(ScribeArgumentException):
        validate_named_path(f"={path}")
