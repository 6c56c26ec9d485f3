"""
净化闸门
在模型输出之上做确定性的后置过滤，把不该成为规则的内容转入 requirements_specs_issues
"""
import logging
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from core_model.models import (
    IssueKind, NormativeStrength, PointKind, RequirementItem, RequirementsSpecsIssue,
    RuleConfidence, VerifiableRule, VerificationPoint, is_integer, is_number, joined_source_text,
)
from req_ingest.lexicon import VagueTermLexicon, detect_vague_terms, load_lexicon, unique_terms

logger = logging.getLogger(__name__)

_NON_MANDATORY = {NormativeStrength.INFORMATIVE, NormativeStrength.MAY}


def is_measurable(point: VerificationPoint, lexicon: VagueTermLexicon) -> bool:
    """整数界、数值、或不含模糊词的字符串参数；无参数的 Uniqueness 也算可测"""
    if point.kind in (PointKind.MIN_LENGTH, PointKind.THRESHOLD_COUNT):
        return is_integer(point.parameter)
    if point.parameter is None:
        return point.kind == PointKind.UNIQUENESS
    if is_number(point.parameter):
        return True
    return not detect_vague_terms(str(point.parameter), lexicon)


def has_concrete_parameter(point: VerificationPoint, lexicon: VagueTermLexicon) -> bool:
    return point.parameter is not None and is_measurable(point, lexicon)


def _demote(rule: VerifiableRule, kind: IssueKind, rationale: str,
            texts: Dict[str, str]) -> RequirementsSpecsIssue:
    return RequirementsSpecsIssue(
        issue_id=f"ISSUE-{rule.rule_id}",
        kind=kind,
        source_requirements=rule.source_requirements,
        excerpt=joined_source_text(rule.source_requirements, texts),
        rationale=f"{rationale}: {rule.statement}",
    )


def _gate(rule: VerifiableRule, items: Dict[str, RequirementItem], security_relevant: bool,
          lexicon: VagueTermLexicon) -> Optional[Tuple[IssueKind, str]]:
    """返回 (问题类型, 理由) 表示降级；None 表示保留"""
    strengths = {items[i].strength for i in rule.source_requirements if i in items}

    # (a) 只来自说明性或许可性文本
    if strengths <= _NON_MANDATORY:
        return IssueKind.NON_VERIFIABLE, "sourced only from informative or permissive text"

    # (c) 含模糊词且没有可测参数
    vague = unique_terms(detect_vague_terms(rule.statement, lexicon))
    if vague and not any(is_measurable(p, lexicon) for p in rule.points):
        return IssueKind.AMBIGUITY, f"vague term(s) {', '.join(vague)} without a measurable condition"

    # (b) 只有 should 来源，且既非安全相关也没有具体参数
    if NormativeStrength.SHALL not in strengths and NormativeStrength.SHOULD in strengths:
        if not security_relevant and not any(has_concrete_parameter(p, lexicon) for p in rule.points):
            return IssueKind.NON_VERIFIABLE, "non-mandatory should statement without a concrete verification condition"
    return None


def sanitize(rules: Sequence[VerifiableRule], issues: Sequence[RequirementsSpecsIssue],
             items: Iterable[RequirementItem], security_relevant: bool = False,
             lexicon: Optional[VagueTermLexicon] = None
             ) -> Tuple[List[VerifiableRule], List[RequirementsSpecsIssue]]:
    """
    净化规则与问题

    闸门顺序：(a) 说明/许可来源 → (c) 模糊词 → (b) should 来源 → (d) 置信度 → (e) 摘录校验。
    每条被降级的规则恰好变成一条问题；函数幂等。

    Returns:
        (保留的规则, 补充后的问题)
    """
    lexicon = lexicon or load_lexicon()
    by_id = {item.id: item for item in items}
    texts = {i: item.text for i, item in by_id.items()}

    kept: List[VerifiableRule] = []
    demoted: List[RequirementsSpecsIssue] = []
    for rule in rules:
        verdict = _gate(rule, by_id, security_relevant, lexicon)
        if verdict is None:
            kept.append(rule)
        else:
            kind, rationale = verdict
            demoted.append(_demote(rule, kind, rationale, texts))
            logger.info(f"🚫 规则 {rule.rule_id} 降级为 {kind.value}: {rationale}")

    all_issues = list(issues) + demoted

    # (e) 摘录必须逐字出现在来源文本中
    verified: List[RequirementsSpecsIssue] = []
    for issue in all_issues:
        source_text = joined_source_text(issue.source_requirements, texts)
        if issue.excerpt and issue.excerpt in source_text:
            verified.append(issue)
        else:
            logger.warning(f"问题 {issue.issue_id} 的摘录不是原文，已改为完整来源文本")
            verified.append(replace(issue, excerpt=source_text))

    # (d) 来源带模糊词或与任何问题共享来源的规则降为 Low
    issue_sources = {i for issue in verified for i in issue.source_requirements}
    final_rules = []
    for rule in kept:
        flagged = any(
            (i in by_id and by_id[i].vague_terms) or i in issue_sources
            for i in rule.source_requirements
        )
        if flagged and rule.confidence != RuleConfidence.LOW:
            rule = replace(rule, confidence=RuleConfidence.LOW)
        final_rules.append(rule)
    return final_rules, verified
