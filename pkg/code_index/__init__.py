# 代码索引与上下文组装模块
from .scanner import (
    CodeIndexError, CodeBaseIndex, IndexedFile, Occurrence, ConstantOccurrence, Edge,
    scan, scan_file, is_selected, split_lines,
)
from .context import (
    TracemapFormatError, ContextChunk, ContextBundle, ContextAssembler,
    assemble_context, split_bundle, load_tracemap, stale_trace_paths, query_tokens, tokenize,
    DEFAULT_CONTEXT_BUDGET, DEFAULT_PROMPT_BUDGET,
)

__all__ = [
    'CodeIndexError', 'CodeBaseIndex', 'IndexedFile', 'Occurrence', 'ConstantOccurrence', 'Edge',
    'scan', 'scan_file', 'is_selected', 'split_lines',
    'TracemapFormatError', 'ContextChunk', 'ContextBundle', 'ContextAssembler',
    'assemble_context', 'split_bundle', 'load_tracemap', 'stale_trace_paths', 'query_tokens', 'tokenize',
    'DEFAULT_CONTEXT_BUDGET', 'DEFAULT_PROMPT_BUDGET',
]
