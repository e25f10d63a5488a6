from pathlib import Path
from .scribe_exceptions import ScribeArgumentException, ScribeIOException


def validate_fraction(value, name: str = "fraction", allow_zero: bool = True) -> float:
    """
    Args:
        value: type=str/int/float, either a plain number or a percentage (eg 0.5%)
    Returns:
        float in [0, 1]
    """
    if isinstance(value, (int, float)):
        fraction = float(value)
    elif isinstance(value, str):
        text = value.strip().lower()
        try:
            if text.endswith("%"):
                fraction = float(text[:-1]) / 100.0
            else:
                fraction = float(text)
        except ValueError:
            raise ScribeArgumentException(
                f"Invalid {name} -> Must be a number or take '%' as postfix."
            )
    else:
        raise ScribeArgumentException(f"Invalid {name}: {value!r}")

    if not 0.0 <= fraction <= 1.0 or (fraction == 0.0 and not allow_zero):
        raise ScribeArgumentException(f"Invalid {name} {fraction}: outside the allowed range")
    return fraction


def validate_probability(value, name: str = "probability") -> float:
    """
    Open interval check used for the damping factor.
    Args:
        value: type=str/float
    Returns:
        float in (0, 1)
    """
    prob = validate_fraction(value, name)
    if prob <= 0.0 or prob >= 1.0:
        raise ScribeArgumentException(f"Invalid {name} {prob}: must lie strictly in (0, 1)")
    return prob


def validate_positive(value, name: str = "value", integer: bool = False):
    try:
        number = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ScribeArgumentException(f"Invalid {name}: {value!r}")
    if integer and float(value) != number:
        raise ScribeArgumentException(f"Invalid {name}: {value!r} is not an integer")
    if number <= 0:
        raise ScribeArgumentException(f"Invalid {name} {number}: must be positive")
    return number


def validate_ratios(ratios) -> tuple:
    """
    Args:
        ratios: type=str/tuple, eg "80/10/10", "0.8,0.1,0.1" or (0.8, 0.1, 0.1)
    Returns:
        tuple(train, val, test)
    """
    if isinstance(ratios, str):
        parts = ratios.replace("/", ",").replace(":", ",").split(",")
        try:
            values = [float(p) for p in parts if p.strip()]
        except ValueError:
            raise ScribeArgumentException(f"Invalid ratios -> {ratios}")
        # Percent style 80/10/10
        if sum(values) > 1.0 + 1e-9:
            values = [v / 100.0 for v in values]
    else:
        values = [float(v) for v in ratios]

    if len(values) != 3:
        raise ScribeArgumentException("Invalid ratios -> exactly three values are required.")
    if any(v < 0 for v in values):
        raise ScribeArgumentException("Invalid ratios -> negative ratio.")
    if abs(sum(values) - 1.0) > 1e-9:
        raise ScribeArgumentException(f"Invalid ratios -> {values} must sum to 1.")
    return tuple(values)


def validate_input_path(path, kind: str = "file") -> Path:
    """Validate and return Path object for an input file or directory."""
    if path is None:
        raise ScribeArgumentException(f"Missing input {kind}")
    path = Path(path)
    if not path.exists():
        raise ScribeIOException(f"File not found: {path}")
    if kind == "file" and not path.is_file():
        raise ScribeIOException(f"Path is not a file: {path}")
    if kind == "dir" and not path.is_dir():
        raise ScribeIOException(f"Path is not a directory: {path}")
    return path


def validate_output_dir(path) -> Path:
    if path is None:
        raise ScribeArgumentException("Missing output directory (-O/--output)")
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise ScribeIOException(f"Output path is not a directory: {path}")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ScribeIOException(f"Cannot create output directory {path}: {e}")
    return path


def validate_named_path(value: str) -> tuple:
    """
    Args:
        value: "LABEL=path" or a bare path
    Returns:
        tuple(label, Path)
    """
    if "=" in value:
        label, _, path = value.partition("=")
        label = label.strip()
        if not label:
            raise ScribeArgumentException(f"Invalid labelled path: {value}")
    else:
        label, path = "BS", value
    return label, validate_input_path(path)
