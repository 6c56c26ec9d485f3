"""
代码库词法索引
不做编译和类型解析：标识符定义/引用、字符串与数值常量、配置项，以及跨文件引用边
"""
import logging
import os
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from core_model.config import IndexConfig
from core_model.errors import ReqAuditError

logger = logging.getLogger(__name__)


class CodeIndexError(ReqAuditError):
    """代码根目录不可读或索引与文件不一致"""


LANGUAGES = {
    '.c': 'c', '.h': 'c', '.cc': 'cpp', '.cpp': 'cpp', '.hpp': 'cpp', '.cxx': 'cpp',
    '.py': 'python', '.js': 'javascript', '.ts': 'typescript', '.go': 'go', '.rs': 'rust',
    '.java': 'java', '.kt': 'kotlin', '.sh': 'shell',
    '.json': 'json', '.yaml': 'yaml', '.yml': 'yaml', '.ini': 'config', '.cfg': 'config',
    '.conf': 'config', '.toml': 'config', '.properties': 'config', '.xml': 'xml',
    '.md': 'markdown', '.txt': 'text',
}
CONFIG_LANGUAGES = {'json', 'yaml', 'config', 'xml'}
HASH_COMMENT_LANGUAGES = {'python', 'shell', 'yaml', 'config'}

KEYWORDS = frozenset("""
auto break case char const continue default do double else enum extern float for goto if inline int
long register restrict return short signed sizeof static struct switch typedef union unsigned void
volatile while bool true false null nullptr define include ifdef ifndef endif undef pragma elif
def class import from as pass lambda yield with try except finally raise global nonlocal not and or
in is none self async await function var let new this typeof instanceof throw catch export package
func fn pub mut impl trait type interface go chan map range defer select public private protected
final abstract extends implements super use mod match loop crate where end then fi esac done
""".split())

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
STRING_RE = re.compile(r'"(?:[^"\\\n]|\\.)*"|\'(?:[^\'\\\n]|\\.)*\'')
NUMBER_RE = re.compile(r"(?<![\w.])(?:0[xX][0-9a-fA-F]+|\d+(?:\.\d+)?)(?![\w.])")
KEYWORD_DEF_RE = re.compile(
    r"\b(?:def|class|function|func|fn|struct|enum|const|let|var|interface|type)\s+\**([A-Za-z_]\w*)"
)
DEFINE_RE = re.compile(r"^\s*#\s*define\s+([A-Za-z_]\w*)")
C_HEADER_RE = re.compile(r"^\s*((?:[A-Za-z_]\w*[\s*]+)+)\**([A-Za-z_]\w*)\s*\(")
ASSIGN_RE = re.compile(r"^(?:[A-Za-z_][\w\s*]*?[\s*])?\**([A-Za-z_]\w*)\s*(?:\[[^\]]*\])?\s*=(?!=)")
CONFIG_KEY_RE = re.compile(r"^\s*[\"']?([A-Za-z_][\w.-]*)[\"']?\s*[:=]")
_NOT_TYPES = {'return', 'else', 'case', 'goto', 'sizeof', 'new', 'throw', 'await', 'yield', 'not',
              'and', 'or', 'in', 'is', 'if', 'while', 'for', 'switch', 'do'}


@dataclass(frozen=True)
class IndexedFile:
    """已索引的文件；text 不进入序列化索引"""
    path: str
    language: str
    line_count: int
    text: str = field(default="", repr=False, compare=False)

    @property
    def lines(self) -> List[str]:
        return split_lines(self.text)

    def to_dict(self) -> Dict:
        return {'path': self.path, 'language': self.language, 'line_count': self.line_count}


@dataclass(frozen=True)
class Occurrence:
    file: str
    line: int
    definition: bool

    def to_dict(self) -> Dict:
        return {'file': self.file, 'line': self.line, 'definition': self.definition}


@dataclass(frozen=True)
class ConstantOccurrence:
    file: str
    line: int

    def to_dict(self) -> Dict:
        return {'file': self.file, 'line': self.line}


@dataclass(frozen=True)
class Edge:
    """source 引用了 target 中定义的 via"""
    source: str
    target: str
    via: str

    def to_dict(self) -> Dict:
        return {'source': self.source, 'target': self.target, 'via': self.via}


@dataclass
class FileScan:
    """单文件扫描结果"""
    file: IndexedFile
    definitions: Dict[str, List[int]]
    references: Dict[str, List[int]]
    constants: Dict[str, List[int]]


@dataclass
class CodeBaseIndex:
    """代码库索引（构建后只读）"""
    root: Path
    files: Tuple[IndexedFile, ...]
    symbols: Dict[str, Tuple[Occurrence, ...]]
    constants: Dict[str, Tuple[ConstantOccurrence, ...]]
    edges: Tuple[Edge, ...]
    skipped: Tuple[str, ...] = ()
    _by_path: Dict[str, IndexedFile] = field(default_factory=dict, repr=False)
    _refs_by_file: Dict[str, List[Tuple[int, str]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_path = {f.path: f for f in self.files}
        refs: Dict[str, List[Tuple[int, str]]] = defaultdict(list)
        for ident, occurrences in self.symbols.items():
            for occ in occurrences:
                if not occ.definition:
                    refs[occ.file].append((occ.line, ident))
        self._refs_by_file = {path: sorted(items) for path, items in refs.items()}

    @property
    def paths(self) -> List[str]:
        return [f.path for f in self.files]

    def file(self, path: str) -> Optional[IndexedFile]:
        return self._by_path.get(path)

    def definitions(self, identifier: str, in_file: Optional[str] = None) -> List[Occurrence]:
        return [o for o in self.symbols.get(identifier, ()) if o.definition and (in_file is None or o.file == in_file)]

    def references_between(self, path: str, start: int, end: int) -> List[str]:
        """path 第 start..end 行中引用的标识符（去重，按首次出现排序）"""
        seen: List[str] = []
        for line, ident in self._refs_by_file.get(path, ()):
            if start <= line <= end and ident not in seen:
                seen.append(ident)
        return seen

    def edges_from(self, path: str) -> List[Edge]:
        return [e for e in self.edges if e.source == path]

    def resolves(self, trace_path: str) -> bool:
        """追溯路径能否解析为已索引的文件或目录"""
        target = trace_path.strip().strip('/')
        if not target:
            return False
        return any(p == target or p.startswith(target + '/') for p in self._by_path)

    def to_dict(self) -> Dict:
        return {
            'files': [f.to_dict() for f in self.files],
            'symbols': {k: [o.to_dict() for o in v] for k, v in sorted(self.symbols.items())},
            'constants': {k: [o.to_dict() for o in v] for k, v in sorted(self.constants.items())},
            'edges': [e.to_dict() for e in self.edges],
            'skipped': list(self.skipped),
        }

    @classmethod
    def from_dict(cls, data: Dict, root: str) -> "CodeBaseIndex":
        """从序列化索引恢复，文件内容重新从 root 读取"""
        root_path = Path(root)
        files = []
        for entry in data['files']:
            try:
                text = _read_text(root_path / entry['path'])
            except OSError as e:
                raise CodeIndexError(f"索引引用的文件不可读: {entry['path']} ({e})") from e
            if text is None or len(split_lines(text)) != entry['line_count']:
                raise CodeIndexError(f"索引已过期: {entry['path']} 与磁盘内容不一致")
            files.append(IndexedFile(entry['path'], entry['language'], entry['line_count'], text))
        return cls(
            root=root_path,
            files=tuple(files),
            symbols={k: tuple(Occurrence(**o) for o in v) for k, v in data['symbols'].items()},
            constants={k: tuple(ConstantOccurrence(**o) for o in v) for k, v in data['constants'].items()},
            edges=tuple(Edge(**e) for e in data['edges']),
            skipped=tuple(data.get('skipped', ())),
        )


def split_lines(text: str) -> List[str]:
    lines = text.split('\n')
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _read_text(path: Path) -> Optional[str]:
    """读取文本文件；二进制（含 NUL）或非 UTF-8 返回 None"""
    raw = path.read_bytes()
    if b'\x00' in raw:
        return None
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError:
        return None
    return text.lstrip('\ufeff').replace('\r\n', '\n').replace('\r', '\n')


def _matches(rel: str, pattern: str) -> bool:
    if fnmatchcase(rel, pattern):
        return True
    return pattern.startswith('**/') and fnmatchcase(rel, pattern[3:])


def is_selected(rel: str, include: Sequence[str], exclude: Sequence[str]) -> bool:
    return any(_matches(rel, p) for p in include) and not any(_matches(rel, p) for p in exclude)


def _strip_comments(line: str, language: str, in_block: bool) -> Tuple[str, bool]:
    """去掉注释（含跨行 /* */），返回 (代码部分, 是否仍在块注释中)"""
    out = []
    i = 0
    while i < len(line):
        if in_block:
            end = line.find('*/', i)
            if end == -1:
                return "".join(out), True
            i = end + 2
            in_block = False
            continue
        literal = STRING_RE.match(line, i)
        if literal:
            out.append(literal.group(0))
            i = literal.end()
            continue
        if line.startswith('/*', i):
            in_block = True
            i += 2
            continue
        if line.startswith('//', i) and language not in HASH_COMMENT_LANGUAGES:
            break
        if line[i] == '#' and language in HASH_COMMENT_LANGUAGES:
            break
        out.append(line[i])
        i += 1
    return "".join(out), in_block


def _line_definitions(code: str, language: str) -> Set[str]:
    names: Set[str] = set()
    match = DEFINE_RE.match(code)
    if match:
        names.add(match.group(1))
    names.update(KEYWORD_DEF_RE.findall(code))
    if language in CONFIG_LANGUAGES:
        match = CONFIG_KEY_RE.match(code)
        if match:
            names.add(match.group(1))
        return names
    header = C_HEADER_RE.match(code)
    if header and not code.rstrip().endswith(';'):
        prefix = header.group(1).split()
        if prefix and not ({w.strip('*') for w in prefix} & _NOT_TYPES):
            names.add(header.group(2))
    if code[:1] and not code[:1].isspace():
        match = ASSIGN_RE.match(code)
        if match:
            names.add(match.group(1))
    return {n for n in names if n.lower() not in KEYWORDS}


def scan_file(root: Path, rel: str) -> Optional[FileScan]:
    """扫描单个文件；二进制文件返回 None"""
    path = root / rel
    text = _read_text(path)
    if text is None:
        return None
    language = LANGUAGES.get(path.suffix.lower(), 'text')
    lines = split_lines(text)
    definitions: Dict[str, List[int]] = defaultdict(list)
    references: Dict[str, List[int]] = defaultdict(list)
    constants: Dict[str, List[int]] = defaultdict(list)

    in_block = False
    for line_no, line in enumerate(lines, start=1):
        code, in_block = _strip_comments(line, language, in_block)
        for literal in STRING_RE.findall(code):
            constants[literal].append(line_no)
        bare = STRING_RE.sub(' ', code)
        for literal in NUMBER_RE.findall(bare):
            constants[literal].append(line_no)
        defined = _line_definitions(code, language)
        for name in sorted(defined):
            definitions[name].append(line_no)
        seen = set()
        for name in IDENT_RE.findall(bare):
            if name in seen or name in defined or name.lower() in KEYWORDS:
                continue
            seen.add(name)
            references[name].append(line_no)

    return FileScan(
        file=IndexedFile(path=rel, language=language, line_count=len(lines), text=text),
        definitions=dict(definitions),
        references=dict(references),
        constants=dict(constants),
    )


def _walk(root: Path, include: Sequence[str], exclude: Sequence[str]) -> List[str]:
    selected = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        rel_dir = Path(dirpath).relative_to(root).as_posix()
        for name in sorted(filenames):
            rel = name if rel_dir == '.' else f"{rel_dir}/{name}"
            if is_selected(rel, include, exclude):
                selected.append(rel)
    return sorted(selected)


def build_edges(scans: Iterable[FileScan]) -> List[Edge]:
    scans = list(scans)
    definers: Dict[str, Set[str]] = defaultdict(set)
    for s in scans:
        for name in s.definitions:
            definers[name].add(s.file.path)
    edges = set()
    for s in scans:
        for name in s.references:
            if name in s.definitions:
                continue
            for target in definers.get(name, ()):
                if target != s.file.path:
                    edges.add(Edge(s.file.path, target, name))
    return sorted(edges, key=lambda e: (e.source, e.target, e.via))


def scan(root: str, config: Optional[IndexConfig] = None) -> CodeBaseIndex:
    """
    扫描代码树

    Args:
        root: 代码根目录
        config: include/exclude 与并发度

    Returns:
        CodeBaseIndex，所有路径相对 root，按路径排序

    Raises:
        CodeIndexError: 根目录不存在或不可读
    """
    config = config or IndexConfig()
    root_path = Path(root)
    if not root_path.is_dir():
        raise CodeIndexError(f"代码根目录不可读: {root}")
    try:
        paths = _walk(root_path, config.include, config.exclude)
    except OSError as e:
        raise CodeIndexError(f"代码根目录不可读: {root} ({e})") from e

    with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
        results = list(pool.map(lambda rel: scan_file(root_path, rel), paths))

    scans, skipped = [], []
    for rel, result in zip(paths, results):
        if result is None:
            skipped.append(rel)
            logger.warning(f"跳过二进制或非 UTF-8 文件: {rel}")
        else:
            scans.append(result)

    symbols: Dict[str, List[Occurrence]] = defaultdict(list)
    constants: Dict[str, List[ConstantOccurrence]] = defaultdict(list)
    for s in scans:
        for name, lines in s.definitions.items():
            symbols[name].extend(Occurrence(s.file.path, ln, True) for ln in lines)
        for name, lines in s.references.items():
            symbols[name].extend(Occurrence(s.file.path, ln, False) for ln in lines)
        for literal, lines in s.constants.items():
            constants[literal].extend(ConstantOccurrence(s.file.path, ln) for ln in lines)

    index = CodeBaseIndex(
        root=root_path,
        files=tuple(s.file for s in scans),
        symbols={k: tuple(sorted(v, key=lambda o: (o.file, o.line, o.definition))) for k, v in sorted(symbols.items())},
        constants={k: tuple(sorted(v, key=lambda o: (o.file, o.line))) for k, v in sorted(constants.items())},
        edges=tuple(build_edges(scans)),
        skipped=tuple(skipped),
    )
    logger.info(f"🗂️ 索引 {root}: {len(index.files)} 个文件，{len(index.symbols)} 个标识符，{len(index.edges)} 条跨文件边")
    return index
