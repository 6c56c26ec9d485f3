"""
挖掘回复解析
逐条校验模型提出的规则与问题，格式不对的条目丢弃并记录诊断，不做任何猜测性修正
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core_model.models import (
    IssueKind, PointKind, RequirementItem, RequirementsSpecsIssue, RuleConfidence,
    VerifiableRule, VerificationPoint, joined_source_text,
)
from core_model.schema import ConfidenceName, IssueKindName, PointKindName, extract_structured_block

from .errors import MiningParseError

logger = logging.getLogger(__name__)


class _Proposal(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class ProposedPoint(_Proposal):
    kind: PointKindName
    subject: str = Field(min_length=1)
    parameter: Optional[Union[int, float, str]] = None


class ProposedRule(_Proposal):
    statement: str = Field(min_length=1)
    points: List[ProposedPoint]
    source_requirements: List[str] = Field(min_length=1)
    confidence: Optional[ConfidenceName] = None


class ProposedIssue(_Proposal):
    kind: IssueKindName
    source_requirements: List[str] = Field(min_length=1)
    excerpt: str
    rationale: str = ""


@dataclass
class MiningResponse:
    """一次挖掘回复的解析结果"""
    rules: List[VerifiableRule] = field(default_factory=list)
    issues: List[RequirementsSpecsIssue] = field(default_factory=list)
    remainder: Optional[str] = None
    diagnostics: List[str] = field(default_factory=list)


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(p) for p in err['loc'])
    return f"{loc}: {err['msg']}" if loc else err['msg']


def parse_mining_response(raw: str, batch: Sequence[RequirementItem], id_prefix: str = "") -> MiningResponse:
    """
    解析挖掘回复

    Args:
        raw: 模型原始回复
        batch: 本批需求条目（用于校验 id 引用）
        id_prefix: 临时 id 前缀

    Returns:
        MiningResponse；没有验证点的规则转为 NonVerifiable 问题

    Raises:
        MiningParseError: 找不到结构化块
    """
    data, remainder = extract_structured_block(raw or "")
    if data is None or not ({'rules', 'issues'} & set(data)):
        raise MiningParseError("回复中没有找到包含 rules/issues 的结构化块")

    known = {item.id for item in batch}
    texts = {item.id: item.text for item in batch}
    response = MiningResponse(remainder=remainder or None)

    for key in sorted(set(data) - {'rules', 'issues'}):
        response.diagnostics.append(f"忽略未知顶层字段 {key!r}")

    raw_rules = data.get('rules', [])
    if not isinstance(raw_rules, list):
        response.diagnostics.append("rules 不是列表，已忽略")
        raw_rules = []
    raw_issues = data.get('issues', [])
    if not isinstance(raw_issues, list):
        response.diagnostics.append("issues 不是列表，已忽略")
        raw_issues = []

    routed = []
    for index, entry in enumerate(raw_rules):
        try:
            proposal = ProposedRule.model_validate(entry)
        except ValidationError as e:
            response.diagnostics.append(f"rules[{index}] 格式错误，已丢弃: {_first_error(e)}")
            continue
        unknown = [i for i in proposal.source_requirements if i not in known]
        if unknown:
            response.diagnostics.append(f"rules[{index}] 引用了未知需求 {unknown}，已丢弃")
            continue
        sources = tuple(dict.fromkeys(proposal.source_requirements))
        if not proposal.points:
            routed.append((index, proposal.statement, sources))
            continue
        try:
            points = tuple(VerificationPoint(PointKind(p.kind), p.subject, p.parameter) for p in proposal.points)
        except ValueError as e:
            response.diagnostics.append(f"rules[{index}] 验证点非法，已丢弃: {e}")
            continue
        response.rules.append(VerifiableRule(
            rule_id=f"{id_prefix}R{len(response.rules) + 1:03d}",
            statement=proposal.statement.strip(),
            points=points,
            source_requirements=sources,
            confidence=RuleConfidence(proposal.confidence or "High"),
        ))

    for index, entry in enumerate(raw_issues):
        try:
            proposal = ProposedIssue.model_validate(entry)
        except ValidationError as e:
            response.diagnostics.append(f"issues[{index}] 格式错误，已丢弃: {_first_error(e)}")
            continue
        unknown = [i for i in proposal.source_requirements if i not in known]
        if unknown:
            response.diagnostics.append(f"issues[{index}] 引用了未知需求 {unknown}，已丢弃")
            continue
        response.issues.append(RequirementsSpecsIssue(
            issue_id=f"{id_prefix}I{len(response.issues) + 1:03d}",
            kind=IssueKind(proposal.kind),
            source_requirements=tuple(dict.fromkeys(proposal.source_requirements)),
            excerpt=proposal.excerpt,
            rationale=proposal.rationale,
        ))

    # 没有验证点的“规则”不是规则
    for index, statement, sources in routed:
        response.issues.append(RequirementsSpecsIssue(
            issue_id=f"{id_prefix}I{len(response.issues) + 1:03d}",
            kind=IssueKind.NON_VERIFIABLE,
            source_requirements=sources,
            excerpt=joined_source_text(sources, texts),
            rationale=f"proposed rule has no verification point: {statement}",
        ))
        response.diagnostics.append(f"rules[{index}] 没有验证点，转为 NonVerifiable 问题")

    for note in response.diagnostics:
        logger.warning(f"⚠️ {note}")
    return response
