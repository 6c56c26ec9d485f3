# 需求文档读取模块
from .document import (
    RequirementsDocument, RequirementsLoadError, load_document, split_statements,
    split_sentences, classify_strength, strip_inline_markup, ingest_requirements,
)
from .lexicon import (
    VagueTermLexicon, VagueTermHit, DEFAULT_TERMS, REQUIRED_TERMS,
    load_lexicon, detect_vague_terms, unique_terms,
)

__all__ = [
    'RequirementsDocument', 'RequirementsLoadError', 'load_document', 'split_statements',
    'split_sentences', 'classify_strength', 'strip_inline_markup', 'ingest_requirements',
    'VagueTermLexicon', 'VagueTermHit', 'DEFAULT_TERMS', 'REQUIRED_TERMS',
    'load_lexicon', 'detect_vague_terms', 'unique_terms',
]
