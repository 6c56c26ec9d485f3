"""
报告渲染
structured：标准 JSON 文档；human：分节文本
"""
from typing import Dict, List, Sequence

from core_model.models import (
    AuditFinding, IssueKind, RequirementsSpecsIssue, Verdict, VerifiableRule,
)
from core_model.schema import dump_document
from metamorphic.harness import MRReport

from .summary import ReportSummary

FORMATS = ("structured", "human")

VERDICT_EMOJI = {
    Verdict.FAIL: "❌",
    Verdict.UNKNOWN: "❓",
    Verdict.PASS: "✅",
}


def render(summary: ReportSummary, rules: Sequence[VerifiableRule],
           issues: Sequence[RequirementsSpecsIssue], findings: Sequence[AuditFinding],
           fmt: str = "structured") -> str:
    """
    渲染报告

    Args:
        fmt: structured | human

    Returns:
        文档文本，相同输入逐字节相同
    """
    if fmt not in FORMATS:
        raise ValueError(f"未知报告格式: {fmt}")
    if fmt == "structured":
        return dump_document("report", {
            'summary': summary.to_dict(),
            'rules': [r.to_dict() for r in rules],
            'issues': [i.to_dict() for i in issues],
            'findings': [f.to_dict() for f in sorted(findings, key=lambda f: f.rule_id)],
        })
    return _render_human(summary, rules, issues, findings)


def _render_human(summary: ReportSummary, rules: Sequence[VerifiableRule],
                  issues: Sequence[RequirementsSpecsIssue], findings: Sequence[AuditFinding]) -> str:
    v = summary.verdicts
    meta = summary.run_meta
    lines: List[str] = [
        "📋 **需求-代码一致性报告**",
        "",
        "📊 **统计**",
        f"• 分析条目: {summary.items_analyzed}",
        f"• 需求问题: {summary.issues_found} ({summary.issue_rate:.1%})",
        f"• 可验证规则: {summary.rules_total}",
        f"• ✅ Pass {v['Pass']} | ❌ Fail {v['Fail']} | ❓ Unknown {v['Unknown']}",
        f"• Fail/Unknown 合计: {summary.fail_unknown_total}",
        f"• 追溯缺口: {summary.traceability_gap_count}",
        f"• 运行一致度: {summary.agreement:.3f}",
        f"• 静态判定覆盖率: {summary.verdict_coverage:.1%}",
        f"• 合并冲突: {summary.conflicts_total}",
        "• 条目强度: " + ", ".join(f"{k} {n}" for k, n in summary.strength_histogram.items()),
    ]
    if summary.stale_trace_paths:
        lines.append(f"• 失效追溯路径: {', '.join(summary.stale_trace_paths)}")
    lines.append(f"• 运行: {meta.run_id} | {meta.backend} | {meta.timestamp} | runs {meta.run_count}")

    lines += ["", "⚠️ **需求问题**"]
    if not issues:
        lines.append("（无）")
    for kind in IssueKind:
        group = sorted((i for i in issues if i.kind == kind), key=lambda i: i.issue_id)
        if not group:
            continue
        lines += ["", f"### {kind.value} ({len(group)})"]
        for issue in group:
            lines.append(f"• [{issue.issue_id}] {', '.join(issue.source_requirements)}: \"{issue.excerpt}\"")
            if issue.rationale:
                lines.append(f"  {issue.rationale}")

    statements: Dict[str, str] = {r.rule_id: r.statement for r in rules}
    lines += ["", "🔍 **审计结论**"]
    if not findings:
        lines.append("（无）")
    for verdict in (Verdict.FAIL, Verdict.UNKNOWN, Verdict.PASS):
        group = sorted((f for f in findings if f.verdict == verdict), key=lambda f: f.rule_id)
        if not group:
            continue
        lines += ["", f"### {VERDICT_EMOJI[verdict]} {verdict.value} ({len(group)})"]
        for finding in group:
            gap = " 🔗 追溯缺口" if finding.traceability_gap else ""
            lines.append(f"• [{finding.rule_id}] {statements.get(finding.rule_id, '')} "
                         f"({finding.confidence.value}){gap}")
            if finding.rationale:
                lines.append(f"  {finding.rationale}")
            for evidence in finding.evidence:
                span = evidence.line_span
                lines.append(f"  - {evidence.file}:{span.start}-{span.end} [{evidence.role.value}]")
    return "\n".join(lines) + "\n"


def render_mr_report(report: MRReport, fmt: str = "structured") -> str:
    """渲染蜕变关系报告"""
    if fmt not in FORMATS:
        raise ValueError(f"未知报告格式: {fmt}")
    if fmt == "structured":
        return dump_document("mr_report", report.to_dict())
    status = "✅ 满足" if report.satisfied else "❌ 不满足"
    lines = [
        f"🔁 **{report.relation}** {status}",
        f"• 比较: {', '.join(report.runs_compared)}",
        f"• 一致度: {report.agreement:.3f}",
    ]
    for label, score in report.pairwise:
        lines.append(f"  - {label}: {score:.3f}")
    if report.violations:
        lines += ["", "**违例**"]
        for violation in report.violations:
            lines.append(f"• {violation.description}")
            for key in violation.keys:
                lines.append(f"  - {key}")
            if violation.requirement_ids:
                lines.append(f"  需求: {', '.join(violation.requirement_ids)}")
    if report.notes:
        lines += ["", "**提示**"]
        lines += [f"• {note}" for note in report.notes]
    return "\n".join(lines) + "\n"
