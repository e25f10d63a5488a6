import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Union

import pandas as pd

from .formats import ScribeFormats
from .scribe_exceptions import SchemaException, ScribeIOException
from .utils.log.loger import get_logger

logger = get_logger()


def read_table(path: Union[str, Path], required: Iterable[str] = (),
               dtype=str) -> pd.DataFrame:
    """
    Read a CSV/TSV table with a header row; the separator follows the suffix.

    Args:
        path: table path
        required: columns that must be present
    Returns:
        DataFrame with missing cells as empty strings
    """
    path = Path(path)
    sep = ScribeFormats().table_separator(path)
    try:
        table = pd.read_csv(path, sep=sep, dtype=dtype, keep_default_na=False)
    except FileNotFoundError:
        raise ScribeIOException(f"File not found: {path}")
    except pd.errors.EmptyDataError:
        table = pd.DataFrame(columns=list(required))
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise SchemaException(f"unreadable table: {e}", path=path)
    except OSError as e:
        raise ScribeIOException(f"Failed to read {path}: {e}")

    missing = [c for c in required if c not in table.columns]
    if missing:
        raise SchemaException(f"missing columns {missing}", line_number=1, path=path)
    return table


def write_table(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    sep = ScribeFormats().table_separator(path)
    try:
        table.to_csv(path, sep=sep, index=False, lineterminator="\n")
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path


def iter_jsonl(path: Union[str, Path], required: Iterable[str] = ()) -> Iterator[dict]:
    """Yield JSON-lines records; blank lines are skipped."""
    path = Path(path)
    required = tuple(required)
    try:
        with open(path) as handle:
            for line_number, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise SchemaException(f"invalid JSON: {e.msg}", line_number, path)
                if not isinstance(record, dict):
                    raise SchemaException("record is not an object", line_number, path)
                missing = [k for k in required if k not in record]
                if missing:
                    raise SchemaException(f"missing fields {missing}", line_number, path)
                record["_line"] = line_number
                yield record
    except OSError as e:
        raise ScribeIOException(f"Failed to read {path}: {e}")


def read_jsonl(path: Union[str, Path], required: Iterable[str] = ()) -> List[dict]:
    return list(iter_jsonl(path, required))


def index_by_cell(records: List[dict], path=None) -> Dict[str, dict]:
    indexed = {}
    for record in records:
        cell_id = str(record["cell_id"])
        if cell_id in indexed:
            raise SchemaException(f"duplicate cell_id {cell_id}", record.get("_line"), path)
        indexed[cell_id] = record
    return indexed


def write_jsonl(records: Iterable[dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        with open(path, "w") as handle:
            for record in records:
                handle.write(json.dumps(record, ensure_ascii=False))
                handle.write("\n")
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path


def write_json(payload: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path


def file_digest(path: Union[str, Path], chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def find_sidecar(path: Path, candidates: Iterable[str]) -> Optional[Path]:
    """First existing sibling file among ``candidates``."""
    for name in candidates:
        sibling = path.with_name(name)
        if sibling.exists():
            return sibling
    return None
