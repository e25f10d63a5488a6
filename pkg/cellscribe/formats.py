SUPPORTED_TABLE_FORMATS = ["csv", "tsv", "txt"]

SUPPORTED_EXPRESSION_FORMATS = ["mtx", "csv"]

SUPPORTED_CONFIG_FORMATS = ["toml", "json"]

# Report keys use the usual result-table column abbreviations
GENERATION_FIELDS = {
    "exact_match": "Exct",
    "bleu2": "B-2",
    "bleu4": "B-4",
    "rouge1": "R-1",
    "rouge2": "R-2",
    "rougeL": "R-L",
}

CLASSIFICATION_FIELDS = {"accuracy": "Acc", "weighted_f1": "F1"}

MULTILABEL_FIELDS = {"subset_accuracy": "Acc", "jaccard": "Jac", "weighted_f1": "F1"}

SIMILARITY_FIELD = "PS"

CLASSIFY_TASK_COLUMNS = ["cell_type", "tissue", "disease"]

EVALUATION_TASKS = ["generation", "classify", "pathways", "ps"]

SPLIT_NAMES = ("train", "val", "test")

SEX_VALUES = ("male", "female", "unknown")


class ScribeFormats:
    """
    House supported file formats and report field names.
    Args:
        None
    Returns:
        list
    """

    def __init__(self):
        self.tables = SUPPORTED_TABLE_FORMATS
        self.expression = SUPPORTED_EXPRESSION_FORMATS
        self.config = SUPPORTED_CONFIG_FORMATS

    def table_separator(self, path) -> str:
        """
        Args:
            path -> table file path
        Returns:
            str"""
        suffix = str(path).lower().rsplit(".", 1)[-1]
        return "," if suffix == "csv" else "\t"

    def is_table(self, path) -> bool:
        return str(path).lower().endswith(tuple(self.tables))
