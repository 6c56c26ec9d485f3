"""
证据守卫
对模型给出的审计结论做确定性复核：只会降级，从不升级
"""
import logging
from dataclasses import replace
from typing import List, Tuple

from core_model.models import (
    AuditFinding, EvidenceItem, EvidenceRole, PointKind, RuleConfidence, Verdict, VerifiableRule,
)
from code_index.context import ContextBundle

logger = logging.getLogger(__name__)

_DECISIVE = (Verdict.PASS, Verdict.FAIL)


def _squash(text: str) -> str:
    return " ".join(text.split())


def evidence_is_verbatim(item: EvidenceItem, bundle: ContextBundle) -> bool:
    """摘录（忽略空白差异）必须出现在所引用的行区间中"""
    cited = bundle.cited_text(item.file, item.line_span)
    excerpt = _squash(item.excerpt)
    return cited is not None and bool(excerpt) and excerpt in _squash(cited)


def _demote(finding: AuditFinding, reason: str) -> AuditFinding:
    return replace(
        finding,
        verdict=Verdict.UNKNOWN,
        confidence=RuleConfidence.LOW,
        diagnostics=finding.diagnostics + (f"guard: {reason}",),
    )


def guard(finding: AuditFinding, bundle: ContextBundle, rule: VerifiableRule) -> AuditFinding:
    """
    复核审计结论

    - 非原文证据丢弃，因此失去证据的 Pass/Fail 降为 Unknown
    - 只有暗示性标识符作证据的 Pass/Fail 降为 Unknown
    - 没有证据的 Pass/Fail 降为 Unknown
    - 禁止值规则的 Fail 必须有 EnablingPath 证据
    - 上下文为空且追溯映射没有条目时标记 traceability_gap

    Returns:
        新的 AuditFinding；函数幂等
    """
    kept: List[EvidenceItem] = []
    dropped: List[Tuple[str, int, int]] = []
    for item in finding.evidence:
        if evidence_is_verbatim(item, bundle):
            kept.append(item)
        else:
            dropped.append((item.file, item.line_span.start, item.line_span.end))

    result = finding
    if dropped:
        notes = tuple(f"guard: evidence {f}:{s}-{e} is not verbatim" for f, s, e in dropped)
        result = replace(result, evidence=tuple(kept), diagnostics=result.diagnostics + notes)
        if result.verdict in _DECISIVE:
            result = _demote(result, f"{finding.verdict.value} lost non-verbatim evidence")

    if result.verdict in _DECISIVE:
        roles = {e.role for e in result.evidence}
        if not roles:
            result = _demote(result, f"{result.verdict.value} without evidence")
        elif roles == {EvidenceRole.SUGGESTIVE_IDENTIFIER_ONLY}:
            result = _demote(result, f"{result.verdict.value} rests on suggestive identifiers only")

    prohibits = any(p.kind == PointKind.PROHIBITED_VALUE for p in rule.points)
    if prohibits and result.verdict == Verdict.FAIL:
        if EvidenceRole.ENABLING_PATH not in {e.role for e in result.evidence}:
            result = _demote(result, "Fail on a prohibited value without an enabling path")
    if prohibits and result.verdict == Verdict.PASS and bundle.is_empty:
        result = _demote(result, "Pass on a prohibited value with no code in context")

    if bundle.is_empty and not bundle.traced_paths and not result.traceability_gap:
        result = replace(result, traceability_gap=True)

    if result.verdict != finding.verdict:
        logger.info(f"🛡️ 规则 {rule.rule_id}: {finding.verdict.value} → {result.verdict.value}")
    return result
