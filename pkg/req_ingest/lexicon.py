"""
模糊词词表
内置默认词 + 可选扩展文件（每行一个词，# 开头为注释），大小写不敏感的整词匹配
"""
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, List, Optional, Tuple

logger = logging.getLogger(__name__)

# 前四个是不可移除的默认词
REQUIRED_TERMS = ("random", "strong", "lowest", "instantly")
DEFAULT_TERMS = REQUIRED_TERMS + ("appropriate", "adequate", "sufficient", "quickly")

TOKEN_RE = re.compile(r"[A-Za-z0-9_]+(?:-[A-Za-z0-9_]+)*")


@dataclass(frozen=True)
class VagueTermHit:
    """一次模糊词命中"""
    term: str
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class VagueTermLexicon:
    """模糊词词表"""
    terms: FrozenSet[str] = field(default_factory=lambda: frozenset(DEFAULT_TERMS))
    source: Tuple[str, ...] = ("builtin",)

    def __post_init__(self):
        missing = [t for t in REQUIRED_TERMS if t not in self.terms]
        if missing:
            raise ValueError(f"词表缺少内置模糊词: {missing}")

    def contains_term(self, text: str) -> bool:
        return bool(detect_vague_terms(text, self))


def load_lexicon(extension_path: Optional[str] = None) -> VagueTermLexicon:
    """
    加载词表

    Args:
        extension_path: 扩展词文件路径（可选）

    Returns:
        内置词与扩展词合并后的词表
    """
    terms = set(DEFAULT_TERMS)
    source = ["builtin"]
    if extension_path:
        with open(extension_path, 'r', encoding='utf-8') as f:
            for raw in f:
                line = raw.split('#', 1)[0].strip().lower()
                if line:
                    terms.add(" ".join(line.split()))
        source.append(str(Path(extension_path)))
        logger.info(f"📖 已加载扩展词表 {extension_path}，共 {len(terms)} 个模糊词")
    return VagueTermLexicon(terms=frozenset(terms), source=tuple(source))


def detect_vague_terms(text: str, lexicon: VagueTermLexicon) -> List[VagueTermHit]:
    """
    检测文本中的模糊词

    按 token 边界整词匹配，连字符相连的词视为一个 token（"strong-ish" 不命中 "strong"）。
    多词短语要求 token 依次相邻。

    Returns:
        按出现位置排序的命中列表
    """
    tokens = [(m.group(0).lower(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]
    phrases = sorted((tuple(term.split()) for term in lexicon.terms), key=lambda p: (-len(p), p))
    hits: List[VagueTermHit] = []
    for i in range(len(tokens)):
        for words in phrases:
            window = tokens[i:i + len(words)]
            if len(window) == len(words) and all(tok[0] == w for tok, w in zip(window, words)):
                start, end = window[0][1], window[-1][2]
                hits.append(VagueTermHit(term=" ".join(words), start=start, end=end, text=text[start:end]))
                break
    return hits


def unique_terms(hits: List[VagueTermHit]) -> Tuple[str, ...]:
    """去重，保留首次出现顺序"""
    seen = []
    for hit in hits:
        if hit.term not in seen:
            seen.append(hit.term)
    return tuple(seen)
