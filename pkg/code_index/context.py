"""
审计上下文组装
按规则的词法查询、追溯映射和一跳引用边，从索引中挑出有预算上限的代码片段
"""
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from core_model.config import IndexConfig
from core_model.errors import ReqAuditError
from core_model.models import LineSpan, TraceabilityMap, VerifiableRule

from .scanner import CodeBaseIndex

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_BUDGET = 24 * 1024
DEFAULT_PROMPT_BUDGET = 12 * 1024

STOPWORDS = frozenset("""
the a an shall must should may can be is are of to in on at for and or not with when after least most
per as by it this that each all any from
""".split())

_WORD_RE = re.compile(r"[A-Za-z0-9_]+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


class TracemapFormatError(ReqAuditError):
    """追溯映射文件格式错误"""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"第{line_no}行: {message}")
        self.line_no = line_no


def _stem(word: str) -> str:
    if len(word) > 4 and word.endswith('ies'):
        return word[:-3] + 'y'
    if len(word) > 3 and word.endswith('s') and not word.endswith('ss'):
        return word[:-1]
    return word


def tokenize(text: str) -> Set[str]:
    """拆分驼峰与下划线、小写、轻度词干化；纯数字和单字符丢弃"""
    tokens = set()
    for raw in _WORD_RE.findall(text):
        for part in raw.split('_'):
            for piece in _CAMEL_RE.split(part):
                word = piece.lower()
                if len(word) < 2 or word.isdigit():
                    continue
                tokens.add(_stem(word))
    return tokens


def query_tokens(rule: VerifiableRule) -> Set[str]:
    """规则陈述、验证点主体和字符串参数中的查询词（去停用词）"""
    parts = [rule.statement]
    for point in rule.points:
        parts.append(point.subject)
        if isinstance(point.parameter, str):
            parts.append(point.parameter)
    stop = {_stem(w) for w in STOPWORDS}
    return {t for t in tokenize(" ".join(parts)) if t not in STOPWORDS and t not in stop}


@dataclass(frozen=True)
class ContextChunk:
    """代码片段：file 的 span 行的逐字内容"""
    file: str
    span: LineSpan
    text: str
    score: int
    traced: bool = False

    @property
    def size(self) -> int:
        return len(self.text.encode('utf-8'))

    @property
    def lines(self) -> List[str]:
        return self.text.split('\n')

    def to_dict(self) -> Dict:
        return {'file': self.file, 'line_span': self.span.to_dict(), 'score': self.score, 'traced': self.traced}


@dataclass(frozen=True)
class ContextBundle:
    """单条规则的审计上下文"""
    rule_id: str
    chunks: Tuple[ContextChunk, ...]
    traceability_used: bool
    budget: int
    traced_paths: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return sum(c.size for c in self.chunks)

    @property
    def is_empty(self) -> bool:
        return not self.chunks

    def chunk_for(self, file: str, span: LineSpan) -> Optional[ContextChunk]:
        """包含该引用区间的片段"""
        for chunk in self.chunks:
            if chunk.file == file and chunk.span.contains(span):
                return chunk
        return None

    def cited_text(self, file: str, span: LineSpan) -> Optional[str]:
        """引用区间对应的逐字代码；区间不在上下文内返回 None"""
        chunk = self.chunk_for(file, span)
        if chunk is None:
            return None
        lines = chunk.lines
        return "\n".join(lines[span.start - chunk.span.start:span.end - chunk.span.start + 1])


def load_tracemap(path: str) -> TraceabilityMap:
    """
    读取追溯映射：每行 `REQ-ID<TAB>path[,path...]`，# 开头为注释

    Raises:
        TracemapFormatError: 行格式错误（带行号）
    """
    entries: Dict[str, List[str]] = defaultdict(list)
    text = Path(path).read_text(encoding='utf-8')
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if '\t' not in stripped:
            raise TracemapFormatError("缺少制表符分隔的路径列", line_no)
        req_id, _, paths = stripped.partition('\t')
        req_id = req_id.strip()
        targets = [p.strip() for p in paths.split(',')]
        if not req_id or not all(targets):
            raise TracemapFormatError("需求编号或路径为空", line_no)
        for target in targets:
            if target not in entries[req_id]:
                entries[req_id].append(target)
    return TraceabilityMap(entries={k: tuple(v) for k, v in entries.items()})


def stale_trace_paths(tracemap: TraceabilityMap, index: CodeBaseIndex) -> List[str]:
    """追溯映射中无法解析到已索引文件或目录的路径"""
    paths = {p for targets in tracemap.entries.values() for p in targets}
    return sorted(p for p in paths if not index.resolves(p))


def _is_traced(path: str, traced: Sequence[str]) -> bool:
    for entry in traced:
        target = entry.strip().strip('/')
        if path == target or path.startswith(target + '/'):
            return True
    return False


def _window(line: int, line_count: int, size: int) -> Tuple[int, int]:
    """以 line 为中心、共 size 行的窗口，截断到文件边界"""
    before = (size - 1) // 2
    return max(1, line - before), min(line_count, line + size - 1 - before)


def _merge_windows(windows: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    merged: List[List[int]] = []
    for start, end in sorted(windows):
        if merged and start <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


class ContextAssembler:
    """
    上下文组装器

    片段得分 = 片段中出现的不同查询词个数，追溯映射命中的文件再加固定奖励；
    按 (得分降序, 路径, 起始行) 贪心装入预算。
    """

    def __init__(self, index: CodeBaseIndex, tracemap: Optional[TraceabilityMap] = None,
                 config: Optional[IndexConfig] = None, budget: int = DEFAULT_CONTEXT_BUDGET):
        self.index = index
        self.tracemap = tracemap or TraceabilityMap()
        self.config = config or IndexConfig()
        self.budget = budget
        self._line_tokens: Dict[str, List[Set[str]]] = {}

    def _tokens_of(self, path: str) -> List[Set[str]]:
        if path not in self._line_tokens:
            indexed = self.index.file(path)
            self._line_tokens[path] = [tokenize(line) for line in indexed.lines]
        return self._line_tokens[path]

    def _lexical_windows(self, query: Set[str]) -> Dict[str, List[Tuple[int, int]]]:
        windows: Dict[str, List[Tuple[int, int]]] = defaultdict(list)
        for indexed in self.index.files:
            for line_no, tokens in enumerate(self._tokens_of(indexed.path), start=1):
                if tokens & query:
                    windows[indexed.path].append(_window(line_no, indexed.line_count, self.config.window_lines))
        return {path: _merge_windows(w) for path, w in windows.items()}

    def _pulled_windows(self, lexical: Dict[str, List[Tuple[int, int]]]) -> Dict[str, List[Tuple[int, int]]]:
        """一跳：片段里引用、在别的文件中定义的标识符，把定义处的窗口拉进来"""
        pulled: Dict[str, List[Tuple[int, int]]] = defaultdict(list)
        for path, spans in lexical.items():
            targets = defaultdict(set)
            for edge in self.index.edges_from(path):
                targets[edge.via].add(edge.target)
            if not targets:
                continue
            for start, end in spans:
                for ident in self.index.references_between(path, start, end):
                    for target in sorted(targets.get(ident, ())):
                        line_count = self.index.file(target).line_count
                        for occ in self.index.definitions(ident, in_file=target):
                            pulled[target].append(_window(occ.line, line_count, self.config.window_lines))
        return pulled

    def assemble(self, rule: VerifiableRule) -> ContextBundle:
        """
        为一条规则组装上下文

        Returns:
            ContextBundle，片段为文件的逐字行区间，总字节数不超过预算
        """
        query = query_tokens(rule)
        traced = self.tracemap.paths_for(rule.source_requirements)
        lexical = self._lexical_windows(query) if query else {}
        pulled = self._pulled_windows(lexical)

        candidates: List[ContextChunk] = []
        for path in sorted(set(lexical) | set(pulled)):
            indexed = self.index.file(path)
            lines = indexed.lines
            is_traced = _is_traced(path, traced)
            for start, end in _merge_windows(lexical.get(path, []) + pulled.get(path, [])):
                text = "\n".join(lines[start - 1:end])
                overlap = set().union(*self._tokens_of(path)[start - 1:end]) & query
                score = len(overlap) + (self.config.trace_bonus if is_traced else 0)
                candidates.append(ContextChunk(path, LineSpan(start, end), text, score, is_traced))

        candidates.sort(key=lambda c: (-c.score, c.file, c.span.start))
        selected, used = [], 0
        for chunk in candidates:
            if used + chunk.size <= self.budget:
                selected.append(chunk)
                used += chunk.size
        if len(selected) < len(candidates):
            logger.info(f"规则 {rule.rule_id} 上下文超出预算，丢弃 {len(candidates) - len(selected)} 个片段")

        return ContextBundle(
            rule_id=rule.rule_id,
            chunks=tuple(selected),
            traceability_used=any(c.traced for c in selected),
            budget=self.budget,
            traced_paths=traced,
        )


def assemble_context(rule: VerifiableRule, index: CodeBaseIndex,
                     tracemap: Optional[TraceabilityMap] = None,
                     config: Optional[IndexConfig] = None,
                     budget: int = DEFAULT_CONTEXT_BUDGET) -> ContextBundle:
    return ContextAssembler(index, tracemap, config, budget).assemble(rule)


def split_bundle(bundle: ContextBundle, prompt_budget: int = DEFAULT_PROMPT_BUDGET) -> List[ContextBundle]:
    """
    把上下文切成多份，每份不超过单次提示词预算

    片段不拆开；单个片段超过预算时独占一份。空上下文返回自身。
    """
    if bundle.is_empty:
        return [bundle]
    parts: List[List[ContextChunk]] = [[]]
    used = 0
    for chunk in bundle.chunks:
        if parts[-1] and used + chunk.size > prompt_budget:
            parts.append([])
            used = 0
        parts[-1].append(chunk)
        used += chunk.size
    return [
        replace(bundle, chunks=tuple(chunks), traceability_used=any(c.traced for c in chunks))
        for chunks in parts
    ]
