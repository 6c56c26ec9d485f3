"""
核心领域模型
需求条目、可验证规则、需求问题、审计结论等共享类型，以及规则标识与结论合并运算
"""
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

Parameter = Union[int, float, str, None]


class NormativeStrength(Enum):
    """规范强度"""
    SHALL = "Shall"
    SHOULD = "Should"
    MAY = "May"
    INFORMATIVE = "Informative"


class PointKind(Enum):
    """验证点类型"""
    ALLOWED_VALUE = "AllowedValue"
    PROHIBITED_VALUE = "ProhibitedValue"
    MIN_LENGTH = "MinLength"
    THRESHOLD_COUNT = "ThresholdCount"
    UNIQUENESS = "Uniqueness"
    OPERATIONAL_TRIGGER = "OperationalTrigger"


class RuleConfidence(Enum):
    """规则/结论置信度"""
    HIGH = "High"
    LOW = "Low"


class IssueKind(Enum):
    """需求缺陷类型"""
    AMBIGUITY = "Ambiguity"
    SELF_CONTRADICTION = "SelfContradiction"
    UNCLEAR_WORDING = "UnclearWording"
    UNDEFINED_OPERATIONAL_STATE = "UndefinedOperationalState"
    INCOMPLETE_ACCEPTANCE_CRITERIA = "IncompleteAcceptanceCriteria"
    NON_VERIFIABLE = "NonVerifiable"


class Verdict(Enum):
    """审计结论"""
    PASS = "Pass"
    FAIL = "Fail"
    UNKNOWN = "Unknown"


class EvidenceRole(Enum):
    """证据角色"""
    ENABLING_PATH = "EnablingPath"
    CONSTRAINT = "Constraint"
    CONSTANT = "Constant"
    CONFIGURATION = "Configuration"
    VALIDATION_LOGIC = "ValidationLogic"
    CROSS_FILE_EDGE = "CrossFileEdge"
    SUGGESTIVE_IDENTIFIER_ONLY = "SuggestiveIdentifierOnly"


def is_integer(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def is_number(value) -> bool:
    return is_integer(value) or isinstance(value, float)


@dataclass(frozen=True)
class LineSpan:
    """行区间（闭区间，从1开始）"""
    start: int
    end: int

    def __post_init__(self):
        if not (is_integer(self.start) and is_integer(self.end)) or self.start < 1 or self.start > self.end:
            raise ValueError(f"非法行区间: {self.start}-{self.end}")

    def contains(self, other: "LineSpan") -> bool:
        return self.start <= other.start and other.end <= self.end

    def to_dict(self) -> Dict:
        return {'start': self.start, 'end': self.end}

    @classmethod
    def from_dict(cls, data: Mapping) -> "LineSpan":
        return cls(start=data['start'], end=data['end'])


@dataclass(frozen=True)
class SourceRef:
    """需求条目在原始文档中的位置"""
    path: str
    line_span: LineSpan

    def to_dict(self) -> Dict:
        return {'path': self.path, 'line_span': self.line_span.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SourceRef":
        return cls(path=data['path'], line_span=LineSpan.from_dict(data['line_span']))


@dataclass(frozen=True)
class RequirementItem:
    """单条需求语句"""
    id: str
    text: str
    source: SourceRef
    strength: NormativeStrength
    vague_terms: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("需求条目缺少 id")
        if not self.text.strip():
            raise ValueError(f"需求条目 {self.id} 文本为空")

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'text': self.text,
            'source': self.source.to_dict(),
            'strength': self.strength.value,
            'vague_terms': list(self.vague_terms),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RequirementItem":
        return cls(
            id=data['id'],
            text=data['text'],
            source=SourceRef.from_dict(data['source']),
            strength=NormativeStrength(data['strength']),
            vague_terms=tuple(data.get('vague_terms', ())),
        )


@dataclass(frozen=True)
class VerificationPoint:
    """规则的可检查维度"""
    kind: PointKind
    subject: str
    parameter: Parameter = None

    def __post_init__(self):
        if not self.subject or not self.subject.strip():
            raise ValueError(f"{self.kind.value} 验证点缺少 subject")
        if self.kind in (PointKind.MIN_LENGTH, PointKind.THRESHOLD_COUNT):
            if not is_integer(self.parameter) or self.parameter < 0:
                raise ValueError(f"{self.kind.value}({self.subject}) 需要非负整数参数")
        elif self.kind in (PointKind.ALLOWED_VALUE, PointKind.PROHIBITED_VALUE):
            if not (is_number(self.parameter) or (isinstance(self.parameter, str) and self.parameter.strip())):
                raise ValueError(f"{self.kind.value}({self.subject}) 需要非空参数")
        elif self.kind == PointKind.OPERATIONAL_TRIGGER:
            if not isinstance(self.parameter, str) or not self.parameter.strip():
                raise ValueError(f"OperationalTrigger({self.subject}) 需要触发条件文本")
        elif self.parameter is not None and not (is_number(self.parameter) or isinstance(self.parameter, str)):
            raise ValueError(f"Uniqueness({self.subject}) 参数类型非法")

    def to_dict(self) -> Dict:
        return {'kind': self.kind.value, 'subject': self.subject, 'parameter': self.parameter}

    @classmethod
    def from_dict(cls, data: Mapping) -> "VerificationPoint":
        return cls(kind=PointKind(data['kind']), subject=data['subject'], parameter=data.get('parameter'))


@dataclass(frozen=True)
class VerifiableRule:
    """可验证规则：规范性且可证伪的义务"""
    rule_id: str
    statement: str
    points: Tuple[VerificationPoint, ...]
    source_requirements: Tuple[str, ...]
    confidence: RuleConfidence = RuleConfidence.HIGH
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.statement.strip():
            raise ValueError(f"规则 {self.rule_id} 缺少 statement")
        if not self.points:
            raise ValueError(f"规则 {self.rule_id} 没有验证点")
        if not self.source_requirements:
            raise ValueError(f"规则 {self.rule_id} 没有来源需求")

    def to_dict(self) -> Dict:
        return {
            'rule_id': self.rule_id,
            'statement': self.statement,
            'points': [p.to_dict() for p in self.points],
            'source_requirements': list(self.source_requirements),
            'confidence': self.confidence.value,
            'provenance': list(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "VerifiableRule":
        return cls(
            rule_id=data['rule_id'],
            statement=data['statement'],
            points=tuple(VerificationPoint.from_dict(p) for p in data['points']),
            source_requirements=tuple(data['source_requirements']),
            confidence=RuleConfidence(data['confidence']),
            provenance=tuple(data.get('provenance', ())),
        )


@dataclass(frozen=True)
class RequirementsSpecsIssue:
    """被隔离的需求缺陷，永远不会变成规则"""
    issue_id: str
    kind: IssueKind
    source_requirements: Tuple[str, ...]
    excerpt: str
    rationale: str

    def __post_init__(self):
        if not self.source_requirements:
            raise ValueError(f"问题 {self.issue_id} 没有来源需求")

    @property
    def identity(self) -> Tuple[str, Tuple[str, ...], str]:
        """去重用的身份：(类型, 来源, 摘录)"""
        return (self.kind.value, tuple(sorted(self.source_requirements)), self.excerpt)

    def to_dict(self) -> Dict:
        return {
            'issue_id': self.issue_id,
            'kind': self.kind.value,
            'source_requirements': list(self.source_requirements),
            'excerpt': self.excerpt,
            'rationale': self.rationale,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RequirementsSpecsIssue":
        return cls(
            issue_id=data['issue_id'],
            kind=IssueKind(data['kind']),
            source_requirements=tuple(data['source_requirements']),
            excerpt=data['excerpt'],
            rationale=data['rationale'],
        )


@dataclass(frozen=True)
class PipelineRunMeta:
    """单次运行元数据"""
    run_id: str
    timestamp: str
    backend: str
    temperature: float
    run_count: int
    model: str = ""
    template_hash: str = ""

    def to_dict(self) -> Dict:
        return {
            'run_id': self.run_id,
            'timestamp': self.timestamp,
            'backend': self.backend,
            'temperature': self.temperature,
            'run_count': self.run_count,
            'model': self.model,
            'template_hash': self.template_hash,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineRunMeta":
        return cls(
            run_id=data['run_id'],
            timestamp=data['timestamp'],
            backend=data['backend'],
            temperature=data['temperature'],
            run_count=data['run_count'],
            model=data.get('model', ''),
            template_hash=data.get('template_hash', ''),
        )


@dataclass(frozen=True)
class RuleSet:
    """一次挖掘运行的产物：规则 + requirements_specs_issues"""
    rules: Tuple[VerifiableRule, ...]
    issues: Tuple[RequirementsSpecsIssue, ...]
    run_meta: PipelineRunMeta
    diagnostics: Tuple[str, ...] = ()

    def keys(self) -> set:
        return {canonical_rule_key(r) for r in self.rules}

    def to_dict(self) -> Dict:
        return {
            'rules': [r.to_dict() for r in self.rules],
            'issues': [i.to_dict() for i in self.issues],
            'run_meta': self.run_meta.to_dict(),
            'diagnostics': list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RuleSet":
        return cls(
            rules=tuple(VerifiableRule.from_dict(r) for r in data['rules']),
            issues=tuple(RequirementsSpecsIssue.from_dict(i) for i in data['issues']),
            run_meta=PipelineRunMeta.from_dict(data['run_meta']),
            diagnostics=tuple(data.get('diagnostics', ())),
        )


@dataclass(frozen=True)
class EvidenceItem:
    """审计证据：引用代码位置的原文摘录"""
    file: str
    line_span: LineSpan
    excerpt: str
    role: EvidenceRole

    def to_dict(self) -> Dict:
        return {
            'file': self.file,
            'line_span': self.line_span.to_dict(),
            'excerpt': self.excerpt,
            'role': self.role.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvidenceItem":
        return cls(
            file=data['file'],
            line_span=LineSpan.from_dict(data['line_span']),
            excerpt=data['excerpt'],
            role=EvidenceRole(data['role']),
        )


@dataclass(frozen=True)
class AuditFinding:
    """单条规则的审计结论"""
    rule_id: str
    verdict: Verdict
    confidence: RuleConfidence
    evidence: Tuple[EvidenceItem, ...] = ()
    rationale: str = ""
    traceability_gap: bool = False
    diagnostics: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            'rule_id': self.rule_id,
            'verdict': self.verdict.value,
            'confidence': self.confidence.value,
            'evidence': [e.to_dict() for e in self.evidence],
            'rationale': self.rationale,
            'traceability_gap': self.traceability_gap,
            'diagnostics': list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AuditFinding":
        return cls(
            rule_id=data['rule_id'],
            verdict=Verdict(data['verdict']),
            confidence=RuleConfidence(data['confidence']),
            evidence=tuple(EvidenceItem.from_dict(e) for e in data.get('evidence', ())),
            rationale=data.get('rationale', ''),
            traceability_gap=data.get('traceability_gap', False),
            diagnostics=tuple(data.get('diagnostics', ())),
        )


@dataclass(frozen=True)
class TraceabilityMap:
    """需求 → 代码路径映射"""
    entries: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def paths_for(self, requirement_ids: Iterable[str]) -> Tuple[str, ...]:
        paths = set()
        for req_id in requirement_ids:
            paths.update(self.entries.get(req_id, ()))
        return tuple(sorted(paths))

    def to_dict(self) -> Dict:
        return {'entries': {k: list(v) for k, v in sorted(self.entries.items())}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TraceabilityMap":
        return cls(entries={k: tuple(v) for k, v in data.get('entries', {}).items()})


# === 规则标识 ===

_PUNCT_RE = re.compile(r"[^\w\s]")
_SPACE_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """小写、去标点、合并空白"""
    return _SPACE_RE.sub(" ", _PUNCT_RE.sub("", text.lower())).strip()


def point_signature(points: Sequence[VerificationPoint]) -> Tuple[str, ...]:
    """(kind, subject) 多重集，排序后返回；参数不参与"""
    return tuple(sorted(f"{p.kind.value}:{normalize_text(p.subject)}" for p in points))


_SET_VALUED_KINDS = (PointKind.ALLOWED_VALUE, PointKind.PROHIBITED_VALUE)


def key_signature(points: Sequence[VerificationPoint]) -> Tuple[str, ...]:
    """
    进入规范键的验证点签名

    允许值/禁止值是值集合，同一 (kind, subject) 只计一次，键与集合大小无关；
    其余类型保留多重集。
    """
    multiset = point_signature([p for p in points if p.kind not in _SET_VALUED_KINDS])
    distinct = set(point_signature([p for p in points if p.kind in _SET_VALUED_KINDS]))
    return tuple(sorted(multiset + tuple(distinct)))


def canonical_rule_key(rule: VerifiableRule) -> str:
    """
    规则的规范键

    参数值不进入键，因此同一条规则在不同运行中给出的不同阈值会落到同一个键上，
    由 pooling 显式记录为冲突。值集合合并后键不变。
    """
    return f"{normalize_text(rule.statement)}|{';'.join(key_signature(rule.points))}"


# === 结论格 Pass < Unknown < Fail ===

_VERDICT_RANK = {Verdict.PASS: 0, Verdict.UNKNOWN: 1, Verdict.FAIL: 2}


def verdict_join(a: Verdict, b: Verdict) -> Verdict:
    """悲观合并：取格上的最大值，Pass 为单位元"""
    return a if _VERDICT_RANK[a] >= _VERDICT_RANK[b] else b


def fold_verdicts(verdicts: Iterable[Verdict]) -> Verdict:
    result = Verdict.PASS
    for v in verdicts:
        result = verdict_join(result, v)
    return result


def join_confidence(confidences: Iterable[RuleConfidence]) -> RuleConfidence:
    """任何一个 Low 即为 Low"""
    return RuleConfidence.LOW if RuleConfidence.LOW in set(confidences) else RuleConfidence.HIGH


def joined_source_text(source_ids: Sequence[str], texts_by_id: Mapping[str, str]) -> str:
    """按来源顺序拼接需求文本，用于检查摘录是否逐字出现"""
    return " ".join(texts_by_id[i] for i in source_ids if i in texts_by_id)


def excerpt_is_verbatim(issue: RequirementsSpecsIssue, texts_by_id: Mapping[str, str]) -> bool:
    return bool(issue.excerpt) and issue.excerpt in joined_source_text(issue.source_requirements, texts_by_id)


def items_by_id(items: Iterable[RequirementItem]) -> Dict[str, RequirementItem]:
    return {item.id: item for item in items}


def sort_rules(rules: Iterable[VerifiableRule]) -> List[VerifiableRule]:
    return sorted(rules, key=lambda r: (canonical_rule_key(r), r.rule_id))
