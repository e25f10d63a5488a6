class ScribeException(Exception):
    """Base exception for every cellscribe error"""

    exit_code = 4


class ScribeArgumentException(ScribeException):
    """Custom exception for argument parsing error"""

    exit_code = 1


class ScribeIOException(ScribeException):
    """Missing, unreadable or unwritable path"""

    exit_code = 2


class OboParseException(ScribeException):
    """Malformed OBO content"""

    exit_code = 3

    def __init__(self, message: str, line_number: int = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ScribeValidationException(ScribeException):
    """Input violates a domain precondition"""

    exit_code = 4


class SchemaException(ScribeValidationException):
    """Record does not follow the expected file schema"""

    def __init__(self, message: str, line_number: int = None, path=None):
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
        if line_number is not None:
            where = f"{where}:{line_number}" if where else f"line {line_number}"
        super().__init__(f"{where}: {message}" if where else message)


class GraphException(ScribeValidationException):
    """Ontology graph or term lookup error"""


class AmbiguousTermException(GraphException):
    """Query matches more than one term"""

    def __init__(self, query: str, term_ids):
        self.query = query
        self.term_ids = tuple(term_ids)
        super().__init__(
            f"Ambiguous term '{query}' matches: {', '.join(self.term_ids)}"
        )


class SimilarityException(ScribeValidationException):
    """PageRank similarity computation error"""


class MetricException(ScribeValidationException):
    """Evaluation metric precondition failure"""


class CodecException(ScribeValidationException):
    """Description rendering error"""


class PathwayException(ScribeValidationException):
    """Pathway scoring error"""


class CohortException(ScribeValidationException):
    """Sampling or splitting error"""
