"""
需求文档读取与分句
支持纯文本与轻量标记（标题、列表、表格、引用、强调、行内代码、链接）
"""
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from core_model.errors import ReqAuditError
from core_model.models import LineSpan, NormativeStrength, RequirementItem, SourceRef

from .lexicon import VagueTermLexicon, detect_vague_terms, load_lexicon, unique_terms

logger = logging.getLogger(__name__)


class RequirementsLoadError(ReqAuditError):
    """需求文件缺失或无法解码"""

    def __init__(self, message: str, byte_offset: Optional[int] = None):
        self.byte_offset = byte_offset
        super().__init__(message)


@dataclass
class RequirementsDocument:
    """需求文档"""
    path: str
    lines: List[str]
    doc_id: str
    items: List[RequirementItem] = field(default_factory=list)

    @property
    def item_count(self) -> int:
        return len(self.items)


# === 标记清理 ===

HEADING_RE = re.compile(r"^\s{0,3}#{1,6}\s+(.*?)\s*#*\s*$")
BULLET_RE = re.compile(r"^(\s*)(?:[-*+]|\d+[.)]|[a-z]\))\s+(.*)$")
TABLE_RE = re.compile(r"^\s*\|.*\|\s*$")
TABLE_SEPARATOR_RE = re.compile(r"^\s*\|?[\s:|-]*-[\s:|-]*\|?\s*$")
QUOTE_RE = re.compile(r"^\s*>\s?")
FENCE_RE = re.compile(r"^\s*(```|~~~)")

_INLINE_RULES = (
    (re.compile(r"!?\[([^\]]*)\]\([^)]*\)"), r"\1"),
    (re.compile(r"`([^`]*)`"), r"\1"),
    (re.compile(r"\*\*(.+?)\*\*"), r"\1"),
    (re.compile(r"__(.+?)__"), r"\1"),
    (re.compile(r"\*(\S(?:.*?\S)?)\*"), r"\1"),
    (re.compile(r"(?<!\w)_(\S(?:.*?\S)?)_(?!\w)"), r"\1"),
)


def strip_inline_markup(text: str) -> str:
    for pattern, repl in _INLINE_RULES:
        text = pattern.sub(repl, text)
    return text


# === 规范强度 ===

_SHALL_RE = re.compile(r"\b(?:shall|must)\b", re.I)
_SHOULD_RE = re.compile(r"\bshould\b", re.I)
_MAY_RE = re.compile(r"\b(?:may|can)\b", re.I)


def classify_strength(text: str) -> NormativeStrength:
    """关键词规则：shall/must > should > may/can > Informative"""
    if _SHALL_RE.search(text):
        return NormativeStrength.SHALL
    if _SHOULD_RE.search(text):
        return NormativeStrength.SHOULD
    if _MAY_RE.search(text):
        return NormativeStrength.MAY
    return NormativeStrength.INFORMATIVE


# === 分句 ===

ABBREVIATIONS = frozenset({"e.g.", "i.e.", "etc.", "vs.", "cf.", "fig.", "no.", "approx."})
TERMINATORS = ".;?!"
_CLOSERS = "\"')]”’"


def _is_abbreviation(text: str, dot_index: int) -> bool:
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start:dot_index + 1].lower().lstrip("(\"'“‘")
    return token in ABBREVIATIONS


def split_sentences(text: str) -> List[Tuple[int, int]]:
    """
    按终止符切分一段文本

    Returns:
        每个句子的 (起始, 结束) 字符偏移，结束偏移不含尾部空白
    """
    spans = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in TERMINATORS:
            end = i + 1
            while end < n and text[end] in _CLOSERS:
                end += 1
            at_boundary = end == n or text[end].isspace()
            if at_boundary and not (ch == '.' and _is_abbreviation(text, i)):
                spans.append((start, end))
                start = end
            i = end
            continue
        i += 1
    if start < n:
        spans.append((start, n))

    result = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            result.append((s, e))
    return result


@dataclass
class _Block:
    """分句前的文本块：标题/列表项/表格行是原子块，段落需再分句"""
    kind: str
    parts: List[Tuple[int, str]] = field(default_factory=list)

    def add(self, line_no: int, text: str):
        text = text.strip()
        if text:
            self.parts.append((line_no, text))


def _blocks(lines: List[str]) -> List[_Block]:
    blocks: List[_Block] = []
    current: Optional[_Block] = None
    in_fence = False

    def flush():
        nonlocal current
        if current is not None and current.parts:
            blocks.append(current)
        current = None

    for line_no, raw in enumerate(lines, start=1):
        if FENCE_RE.match(raw):
            flush()
            in_fence = not in_fence
            continue
        if in_fence:
            continue
        line = QUOTE_RE.sub("", raw)
        if not line.strip():
            flush()
            continue

        heading = HEADING_RE.match(line)
        if heading:
            flush()
            if heading.group(1):
                blocks.append(_Block("atomic", [(line_no, heading.group(1))]))
            continue

        if TABLE_RE.match(line):
            flush()
            if not TABLE_SEPARATOR_RE.match(line):
                cells = [c.strip() for c in line.strip().strip('|').split('|')]
                row = " | ".join(c for c in cells if c)
                if row:
                    blocks.append(_Block("atomic", [(line_no, row)]))
            continue

        bullet = BULLET_RE.match(line)
        if bullet:
            flush()
            current = _Block("atomic")
            current.add(line_no, bullet.group(2))
            continue

        if current is not None and current.kind == "atomic" and line[:1].isspace():
            current.add(line_no, line)
            continue

        if current is None or current.kind != "paragraph":
            flush()
            current = _Block("paragraph")
        current.add(line_no, line)
    flush()
    return blocks


def _block_statements(block: _Block) -> List[Tuple[str, int, int]]:
    """把块展开成 (文本, 起始行, 结束行)"""
    texts = [(line_no, strip_inline_markup(text)) for line_no, text in block.parts]
    joined = ""
    offsets: List[Tuple[int, int]] = []
    for line_no, text in texts:
        if joined:
            joined += " "
        offsets.append((len(joined), line_no))
        joined += text

    def line_at(offset: int) -> int:
        found = offsets[0][1]
        for start, line_no in offsets:
            if start <= offset:
                found = line_no
        return found

    if block.kind == "atomic":
        spans = [(0, len(joined))] if joined.strip() else []
    else:
        spans = split_sentences(joined)
    return [(joined[s:e].strip(), line_at(s), line_at(e - 1)) for s, e in spans if joined[s:e].strip()]


def load_document(path: str, doc_id: Optional[str] = None) -> RequirementsDocument:
    """
    读取需求文档

    Args:
        path: 文件路径
        doc_id: 条目 id 前缀，默认取文件名（大写）

    Raises:
        RequirementsLoadError: 文件缺失或不是合法 UTF-8
    """
    p = Path(path)
    try:
        raw = p.read_bytes()
    except FileNotFoundError as e:
        raise RequirementsLoadError(f"需求文件不存在: {path}") from e
    except OSError as e:
        raise RequirementsLoadError(f"需求文件无法读取: {path} ({e})") from e

    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise RequirementsLoadError(f"需求文件 {path} 在字节偏移 {e.start} 处无法按 UTF-8 解码", byte_offset=e.start) from e

    text = text.lstrip("\ufeff").replace('\r\n', '\n').replace('\r', '\n')
    lines = text.split('\n')
    if lines and lines[-1] == "":
        lines.pop()
    return RequirementsDocument(path=str(path), lines=lines, doc_id=doc_id or p.stem.upper())


def split_statements(doc: RequirementsDocument,
                     lexicon: Optional[VagueTermLexicon] = None) -> List[RequirementItem]:
    """
    分句并生成需求条目

    Args:
        doc: 已加载的文档
        lexicon: 模糊词词表，默认为内置词表

    Returns:
        按文档顺序排列的需求条目，id 形如 WIFI-001
    """
    lexicon = lexicon or load_lexicon()
    items = []
    for block in _blocks(doc.lines):
        for text, start, end in _block_statements(block):
            items.append(RequirementItem(
                id=f"{doc.doc_id}-{len(items) + 1:03d}",
                text=text,
                source=SourceRef(path=doc.path, line_span=LineSpan(start, end)),
                strength=classify_strength(text),
                vague_terms=unique_terms(detect_vague_terms(text, lexicon)),
            ))
    return items


def ingest_requirements(path: str, lexicon: Optional[VagueTermLexicon] = None,
                        doc_id: Optional[str] = None) -> RequirementsDocument:
    """读取 + 分句，返回带条目的文档"""
    doc = load_document(path, doc_id=doc_id)
    doc.items = split_statements(doc, lexicon)
    logger.info(f"📄 {path}: {len(doc.lines)} 行，切分出 {len(doc.items)} 条需求语句")
    return doc
