"""
运行统计
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from core_model.errors import ReqAuditError
from core_model.models import (
    AuditFinding, NormativeStrength, PipelineRunMeta, RequirementItem, Verdict,
)
from pooling.merger import PooledRuleSet

logger = logging.getLogger(__name__)


class ReportError(ReqAuditError):
    """报告输入之间引用不一致"""


@dataclass(frozen=True)
class ReportSummary:
    """报告统计"""
    items_analyzed: int
    issues_found: int
    issue_rate: float
    rules_total: int
    verdicts: Dict[str, int]
    fail_unknown_total: int
    traceability_gap_count: int
    agreement: float
    verdict_coverage: float
    conflicts_total: int
    run_meta: PipelineRunMeta
    stale_trace_paths: Tuple[str, ...] = ()
    strength_histogram: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'items_analyzed': self.items_analyzed,
            'issues_found': self.issues_found,
            'issue_rate': self.issue_rate,
            'rules_total': self.rules_total,
            'verdicts': dict(self.verdicts),
            'fail_unknown_total': self.fail_unknown_total,
            'traceability_gap_count': self.traceability_gap_count,
            'agreement': self.agreement,
            'verdict_coverage': self.verdict_coverage,
            'conflicts_total': self.conflicts_total,
            'stale_trace_paths': list(self.stale_trace_paths),
            'strength_histogram': dict(self.strength_histogram),
            'run_meta': self.run_meta.to_dict(),
        }


def summarize(items: Sequence[RequirementItem], pooled: PooledRuleSet,
              findings: Sequence[AuditFinding],
              stale_trace_paths: Sequence[str] = (),
              run_meta: Optional[PipelineRunMeta] = None) -> ReportSummary:
    """
    计算报告统计

    Args:
        items: 全部需求条目
        pooled: 合并后的规则集
        findings: 审计结论，必须与 pooled 规则一一对应
        stale_trace_paths: 无法解析的追溯路径
        run_meta: 报告的运行元数据，默认沿用 pooled

    Raises:
        ReportError: 结论引用了不存在的规则，或规则没有结论
    """
    rule_ids = {r.rule_id for r in pooled.rules}
    finding_ids = [f.rule_id for f in findings]
    for rule_id in finding_ids:
        if rule_id not in rule_ids:
            raise ReportError(f"审计结论引用了不存在的规则: {rule_id}")
    missing = sorted(rule_ids - set(finding_ids))
    if missing:
        raise ReportError(f"规则没有审计结论: {', '.join(missing)}")
    if len(finding_ids) != len(set(finding_ids)):
        raise ReportError("同一规则有多条审计结论")

    verdicts = {v.value: 0 for v in Verdict}
    for finding in findings:
        verdicts[finding.verdict.value] += 1
    rules_total = len(pooled.rules)
    decided = verdicts[Verdict.PASS.value] + verdicts[Verdict.FAIL.value]

    histogram = {s.value: 0 for s in NormativeStrength}
    for item in items:
        histogram[item.strength.value] += 1

    return ReportSummary(
        items_analyzed=len(items),
        issues_found=len(pooled.issues),
        issue_rate=len(pooled.issues) / len(items) if items else 0.0,
        rules_total=rules_total,
        verdicts=verdicts,
        fail_unknown_total=verdicts[Verdict.FAIL.value] + verdicts[Verdict.UNKNOWN.value],
        traceability_gap_count=sum(1 for f in findings if f.traceability_gap),
        agreement=float(pooled.agreement),
        verdict_coverage=decided / rules_total if rules_total else 0.0,
        conflicts_total=len(pooled.conflicts),
        run_meta=run_meta or pooled.run_meta,
        stale_trace_paths=tuple(sorted(stale_trace_paths)),
        strength_histogram=histogram,
    )
