# 黄金语料模块
from .loader import (
    CORPUS_DIR, CorpusError, CorpusManifest, GoldenCorpus, PlantedDefect, PlantedIssue,
    load_corpus, load_manifest, verify_digests,
)

__all__ = [
    'CORPUS_DIR', 'CorpusError', 'CorpusManifest', 'GoldenCorpus', 'PlantedDefect', 'PlantedIssue',
    'load_corpus', 'load_manifest', 'verify_digests',
]
