"""
文档格式与 schema 校验

所有产物都是同一种带版本的 JSON 文档：
    {"schema_version": "1", "document": "<kind>", ...}
字段名与领域类型一致（snake_case），未知字段一律拒绝。
"""
import json
import logging
import re
from typing import Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import DocumentParseError, DocumentSchemaError
from .models import LineSpan, PointKind, VerificationPoint

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

PointKindName = Literal[
    "AllowedValue", "ProhibitedValue", "MinLength", "ThresholdCount", "Uniqueness", "OperationalTrigger"
]
ConfidenceName = Literal["High", "Low"]
IssueKindName = Literal[
    "Ambiguity", "SelfContradiction", "UnclearWording",
    "UndefinedOperationalState", "IncompleteAcceptanceCriteria", "NonVerifiable",
]
VerdictName = Literal["Pass", "Fail", "Unknown"]
EvidenceRoleName = Literal[
    "EnablingPath", "Constraint", "Constant", "Configuration",
    "ValidationLogic", "CrossFileEdge", "SuggestiveIdentifierOnly",
]


class ClosedModel(BaseModel):
    """封闭 schema：严格类型，拒绝未知字段"""
    model_config = ConfigDict(extra="forbid", strict=True)


# === 共享结构 ===

class LineSpanModel(ClosedModel):
    start: int = Field(ge=1)
    end: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        LineSpan(self.start, self.end)
        return self


class SourceRefModel(ClosedModel):
    path: str
    line_span: LineSpanModel


class PointModel(ClosedModel):
    kind: PointKindName
    subject: str = Field(min_length=1)
    parameter: Optional[Union[int, float, str]] = None

    @model_validator(mode="after")
    def _point_invariants(self):
        VerificationPoint(PointKind(self.kind), self.subject, self.parameter)
        return self


class RuleModel(ClosedModel):
    rule_id: str = Field(min_length=1)
    statement: str = Field(min_length=1)
    points: List[PointModel] = Field(min_length=1)
    source_requirements: List[str] = Field(min_length=1)
    confidence: ConfidenceName
    provenance: List[str]


class IssueModel(ClosedModel):
    issue_id: str = Field(min_length=1)
    kind: IssueKindName
    source_requirements: List[str] = Field(min_length=1)
    excerpt: str
    rationale: str


class RunMetaModel(ClosedModel):
    run_id: str
    timestamp: str
    backend: str
    temperature: float = Field(ge=0)
    run_count: int = Field(ge=0)
    model: str
    template_hash: str


class EvidenceModel(ClosedModel):
    file: str
    line_span: LineSpanModel
    excerpt: str
    role: EvidenceRoleName


class FindingModel(ClosedModel):
    rule_id: str
    verdict: VerdictName
    confidence: ConfidenceName
    evidence: List[EvidenceModel]
    rationale: str
    traceability_gap: bool
    diagnostics: List[str]

    @model_validator(mode="after")
    def _fail_needs_evidence(self):
        if self.verdict == "Fail" and not self.evidence:
            raise ValueError("Fail finding requires evidence")
        return self


class _Envelope(ClosedModel):
    schema_version: Literal["1"]


# === 各类文档 ===

class RulesDocument(_Envelope):
    document: Literal["rules"]
    rules: List[RuleModel]
    issues: List[IssueModel]
    run_meta: RunMetaModel
    diagnostics: List[str]


class ConflictVariantModel(ClosedModel):
    run_id: str
    rule: RuleModel


class ResolutionModel(ClosedModel):
    variant: int = Field(ge=0)
    reason: str


class ConflictModel(ClosedModel):
    key: str
    variants: List[ConflictVariantModel] = Field(min_length=2)
    resolution: ResolutionModel

    @model_validator(mode="after")
    def _resolution_in_range(self):
        if self.resolution.variant >= len(self.variants):
            raise ValueError("resolution variant out of range")
        return self


class NearMissModel(ClosedModel):
    rule_ids: List[str] = Field(min_length=2)
    keys: List[str] = Field(min_length=2)
    signature: List[str]


class PooledDocument(_Envelope):
    document: Literal["pooled"]
    rules: List[RuleModel]
    issues: List[IssueModel]
    conflicts: List[ConflictModel]
    near_misses: List[NearMissModel]
    agreement: float = Field(ge=0, le=1)
    run_meta: RunMetaModel
    diagnostics: List[str]


class AuditSummaryModel(ClosedModel):
    rules_total: int = Field(ge=0)
    verdicts: Dict[str, int]
    fail_unknown_total: int = Field(ge=0)
    traceability_gap_count: int = Field(ge=0)


class FindingsDocument(_Envelope):
    document: Literal["findings"]
    findings: List[FindingModel]
    summary: AuditSummaryModel
    run_meta: RunMetaModel


class ReportSummaryModel(ClosedModel):
    items_analyzed: int = Field(ge=0)
    issues_found: int = Field(ge=0)
    issue_rate: float = Field(ge=0)
    rules_total: int = Field(ge=0)
    verdicts: Dict[str, int]
    fail_unknown_total: int = Field(ge=0)
    traceability_gap_count: int = Field(ge=0)
    agreement: float = Field(ge=0, le=1)
    verdict_coverage: float = Field(ge=0, le=1)
    conflicts_total: int = Field(ge=0)
    stale_trace_paths: List[str]
    strength_histogram: Dict[str, int]
    run_meta: RunMetaModel


class ReportDocument(_Envelope):
    document: Literal["report"]
    summary: ReportSummaryModel
    rules: List[RuleModel]
    issues: List[IssueModel]
    findings: List[FindingModel]


class IndexedFileModel(ClosedModel):
    path: str
    language: str
    line_count: int = Field(ge=0)


class OccurrenceModel(ClosedModel):
    file: str
    line: int = Field(ge=1)
    definition: bool


class ConstantOccurrenceModel(ClosedModel):
    file: str
    line: int = Field(ge=1)


class EdgeModel(ClosedModel):
    source: str
    target: str
    via: str


class IndexDocument(_Envelope):
    document: Literal["index"]
    files: List[IndexedFileModel]
    symbols: Dict[str, List[OccurrenceModel]]
    constants: Dict[str, List[ConstantOccurrenceModel]]
    edges: List[EdgeModel]
    skipped: List[str]


class MRViolationModel(ClosedModel):
    description: str
    keys: List[str]
    requirement_ids: List[str]


class PairwiseScoreModel(ClosedModel):
    label: str
    agreement: float = Field(ge=0, le=1)


class MRReportDocument(_Envelope):
    document: Literal["mr_report"]
    relation: Literal["MR1", "MR-Paraphrase", "MR-AddDelete"]
    runs_compared: List[str]
    agreement: float = Field(ge=0, le=1)
    satisfied: bool
    violations: List[MRViolationModel]
    notes: List[str]
    pairwise: List[PairwiseScoreModel]
    merged_rules: List[RuleModel]


class ManifestDocument(_Envelope):
    document: Literal["manifest"]
    artifacts: Dict[str, str]
    run_meta: RunMetaModel


DOCUMENT_MODELS: Dict[str, Type[BaseModel]] = {
    'rules': RulesDocument,
    'pooled': PooledDocument,
    'findings': FindingsDocument,
    'report': ReportDocument,
    'index': IndexDocument,
    'mr_report': MRReportDocument,
    'manifest': ManifestDocument,
}


def _format_loc(loc: Tuple) -> str:
    """('rules', 0, 'points') -> rules[0].points"""
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "<root>"


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentParseError(f"第{e.lineno}行第{e.colno}列: {e.msg}") from e


def validate_document(text: str) -> List[str]:
    """
    校验文档文本

    Args:
        text: 序列化的文档

    Returns:
        违规列表，每项形如 "rules[0].points: ..."；空列表表示文档有效

    Raises:
        DocumentParseError: 文本不是合法 JSON
    """
    data = _load_json(text)
    if not isinstance(data, dict):
        return ["<root>: document must be an object"]
    kind = data.get('document')
    model = DOCUMENT_MODELS.get(kind) if isinstance(kind, str) else None
    if model is None:
        return [f"document: unknown document type {kind!r}"]
    try:
        model.model_validate_json(text)
    except ValidationError as e:
        return [f"{_format_loc(err['loc'])}: {err['msg']}" for err in e.errors()]
    return []


def dump_document(kind: str, body: Dict) -> str:
    """序列化为字节稳定的文档文本，写出前先自检"""
    payload = {'schema_version': SCHEMA_VERSION, 'document': kind, **body}
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    violations = validate_document(text)
    if violations:
        raise DocumentSchemaError(violations)
    return text


def read_document(text: str, kind: str) -> Dict:
    """读取并校验指定类型的文档，返回去掉信封的字典"""
    violations = validate_document(text)
    if violations:
        raise DocumentSchemaError(violations)
    data = json.loads(text)
    if data['document'] != kind:
        raise DocumentSchemaError([f"document: expected {kind!r}, got {data['document']!r}"])
    return data


# === 从模型输出中提取结构化块 ===

_FENCE_RE = re.compile(r"```(?:json|JSON)?[ \t]*\n(.*?)```", re.S)


def extract_structured_block(raw: str) -> Tuple[Optional[Dict], str]:
    """
    从 LLM 回复中取出第一个 JSON 对象

    优先取 ```json 代码块，其次取第一个能完整解析的 '{'。

    Returns:
        (对象, 剩余文本)；没有找到时对象为 None，剩余文本为原文
    """
    for match in _FENCE_RE.finditer(raw):
        try:
            data = json.loads(match.group(1))
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict):
            return data, (raw[:match.start()] + raw[match.end():]).strip()

    decoder = json.JSONDecoder()
    index = raw.find('{')
    while index != -1:
        try:
            data, end = decoder.raw_decode(raw, index)
        except json.JSONDecodeError:
            index = raw.find('{', index + 1)
            continue
        if isinstance(data, dict):
            return data, (raw[:index] + raw[end:]).strip()
        index = raw.find('{', end)
    return None, raw
