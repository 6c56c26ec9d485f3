"""
审计回复解析
"""
import logging
from dataclasses import dataclass, field
from typing import List

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core_model.errors import ReqAuditError
from core_model.models import (
    AuditFinding, EvidenceItem, EvidenceRole, LineSpan, RuleConfidence, Verdict,
)
from core_model.schema import ConfidenceName, EvidenceRoleName, VerdictName, extract_structured_block
from code_index.context import ContextBundle

logger = logging.getLogger(__name__)


class AuditParseError(ReqAuditError):
    """审计回复无法解析"""


class _Reply(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class ReplySpan(_Reply):
    start: int = Field(ge=1)
    end: int = Field(ge=1)


class ReplyEvidence(_Reply):
    file: str = Field(min_length=1)
    line_span: ReplySpan
    excerpt: str
    role: EvidenceRoleName


class AuditReply(_Reply):
    verdict: VerdictName
    confidence: ConfidenceName = "High"
    rationale: str = ""
    evidence: List[dict] = Field(default_factory=list)


@dataclass
class ParsedAudit:
    finding: AuditFinding
    diagnostics: List[str] = field(default_factory=list)


def parse_audit_response(raw: str, rule_id: str, bundle: ContextBundle) -> ParsedAudit:
    """
    解析审计回复

    引用上下文之外文件或行区间的证据被丢弃并记录诊断。

    Raises:
        AuditParseError: 没有结构化块或顶层字段不合法
    """
    data, _ = extract_structured_block(raw or "")
    if data is None:
        raise AuditParseError(f"规则 {rule_id} 的审计回复中没有结构化块")
    try:
        reply = AuditReply.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err['loc'])
        raise AuditParseError(f"规则 {rule_id} 的审计回复不合法: {loc}: {err['msg']}") from e

    diagnostics: List[str] = []
    evidence: List[EvidenceItem] = []
    for n, entry in enumerate(reply.evidence):
        try:
            item = ReplyEvidence.model_validate(entry)
            span = LineSpan(item.line_span.start, item.line_span.end)
        except (ValidationError, ValueError) as e:
            diagnostics.append(f"evidence[{n}] dropped: malformed ({type(e).__name__})")
            continue
        if bundle.chunk_for(item.file, span) is None:
            diagnostics.append(
                f"evidence[{n}] dropped: {item.file}:{span.start}-{span.end} is outside the supplied context"
            )
            continue
        evidence.append(EvidenceItem(item.file, span, item.excerpt, EvidenceRole(item.role)))

    finding = AuditFinding(
        rule_id=rule_id,
        verdict=Verdict(reply.verdict),
        confidence=RuleConfidence(reply.confidence),
        evidence=tuple(evidence),
        rationale=reply.rationale,
        diagnostics=tuple(diagnostics),
    )
    return ParsedAudit(finding=finding, diagnostics=diagnostics)


def unparseable_finding(rule_id: str) -> AuditFinding:
    """两次都无法解析时的兜底结论"""
    return AuditFinding(
        rule_id=rule_id,
        verdict=Verdict.UNKNOWN,
        confidence=RuleConfidence.LOW,
        rationale="unparseable audit response",
        diagnostics=("unparseable audit response",),
    )
