from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("cellscribe")
except PackageNotFoundError:
    __version__ = "unknown"

from .main import main  # noqa: E402
