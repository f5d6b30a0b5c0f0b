class ExportError(Exception):
    """Base class for everything this package raises on purpose."""


class CorpusFormatError(ExportError):
    """The input corpus violates the JSONL schema; message names the line."""


class DependencyError(ExportError):
    """A pretrained model identifier could not be resolved or is unusable."""
