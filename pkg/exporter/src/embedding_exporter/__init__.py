"""Offline embedding exporter.

Runs a pretrained text encoder and a 7-label emotion classifier over a
JSONL post corpus and writes one interchange record per post:
`user_id<TAB>post_index<TAB>text vector<TAB>emotion distribution` under a
`#width <d>` header. The file is what the sequence engine's file-backed
encoders replay, so desk-scale experiments can be repeated with genuine
transformer features.
"""

from embedding_exporter.errors import (CorpusFormatError, DependencyError,
                                       ExportError)
from embedding_exporter.export import ExportManifest, export_embeddings

__all__ = [
    "CorpusFormatError",
    "DependencyError",
    "ExportError",
    "ExportManifest",
    "export_embeddings",
]
