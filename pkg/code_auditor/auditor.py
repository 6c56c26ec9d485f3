"""
代码审计器
对每条规则组装上下文、调用后端、解析、经守卫复核，产出 AuditFinding
"""
import asyncio
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

from core_model.config import AuditConfig, IndexConfig
from core_model.models import (
    AuditFinding, PipelineRunMeta, RuleConfidence, TraceabilityMap, Verdict, VerifiableRule,
    fold_verdicts, join_confidence,
)
from core_model.templates import PromptTemplate, load_template
from code_index.context import ContextAssembler, ContextBundle, split_bundle
from code_index.scanner import CodeBaseIndex
from llm_backend.base import BackendError, BackendRequest, LLMBackend, ReplayMissError

from .guard import guard
from .parser import AuditParseError, parse_audit_response, unparseable_finding
from .prompts import AUDIT_TEMPLATE, build_audit_prompt

logger = logging.getLogger(__name__)


def summarize_findings(findings: Sequence[AuditFinding]) -> Dict:
    """结论计数、Fail+Unknown 合计与追溯缺口数"""
    verdicts = {v.value: 0 for v in Verdict}
    for finding in findings:
        verdicts[finding.verdict.value] += 1
    return {
        'rules_total': len(findings),
        'verdicts': verdicts,
        'fail_unknown_total': verdicts[Verdict.FAIL.value] + verdicts[Verdict.UNKNOWN.value],
        'traceability_gap_count': sum(1 for f in findings if f.traceability_gap),
    }


@dataclass
class AuditResult:
    """一次审计的结果"""
    findings: List[AuditFinding]
    run_meta: PipelineRunMeta

    @property
    def summary(self) -> Dict:
        return summarize_findings(self.findings)

    def to_dict(self) -> Dict:
        return {
            'findings': [f.to_dict() for f in self.findings],
            'summary': self.summary,
            'run_meta': self.run_meta.to_dict(),
        }


class CodeAuditor:
    """codeAuditor 智能体"""

    def __init__(self, backend: LLMBackend, index: CodeBaseIndex,
                 tracemap: Optional[TraceabilityMap] = None,
                 config: Optional[AuditConfig] = None,
                 index_config: Optional[IndexConfig] = None,
                 model: str = "",
                 template: Optional[PromptTemplate] = None):
        self.backend = backend
        self.config = config or AuditConfig()
        self.model = model
        self.template = template or load_template(AUDIT_TEMPLATE)
        self.assembler = ContextAssembler(index, tracemap, index_config, budget=self.config.context_budget)

    async def _audit_part(self, rule: VerifiableRule, part: ContextBundle) -> AuditFinding:
        request = BackendRequest(
            model=self.model,
            prompt=build_audit_prompt(rule, part, self.template),
            temperature=self.config.temperature,
            max_output_tokens=self.config.max_output_tokens,
        )
        for attempt in (1, 2):
            try:
                response = await self.backend.send(request)
            except ReplayMissError:
                raise
            except BackendError as e:
                logger.error(f"规则 {rule.rule_id} 审计调用失败: {e}")
                finding = AuditFinding(
                    rule_id=rule.rule_id,
                    verdict=Verdict.UNKNOWN,
                    confidence=RuleConfidence.LOW,
                    rationale="backend error",
                    diagnostics=(f"backend error: {e}",),
                )
                break
            try:
                finding = parse_audit_response(response.text, rule.rule_id, part).finding
                break
            except AuditParseError as e:
                logger.warning(f"规则 {rule.rule_id} 审计回复无法解析（第{attempt}次）: {e}")
                finding = unparseable_finding(rule.rule_id)
        return guard(finding, part, rule)

    async def audit_rule(self, rule: VerifiableRule) -> AuditFinding:
        """
        审计单条规则

        上下文超过单次提示词预算时分多次审计，结论按 Pass < Unknown < Fail 悲观合并。
        """
        bundle = self.assembler.assemble(rule)
        parts = split_bundle(bundle, self.config.prompt_budget)
        partial = [await self._audit_part(rule, part) for part in parts]
        if len(partial) == 1:
            return partial[0]

        diagnostics = []
        for n, finding in enumerate(partial, start=1):
            diagnostics.extend(f"part {n}: {d}" for d in finding.diagnostics)
        rationales = []
        for finding in partial:
            if finding.rationale and finding.rationale not in rationales:
                rationales.append(finding.rationale)
        return AuditFinding(
            rule_id=rule.rule_id,
            verdict=fold_verdicts(f.verdict for f in partial),
            confidence=join_confidence(f.confidence for f in partial),
            evidence=tuple(e for f in partial for e in f.evidence),
            rationale=" | ".join(rationales),
            traceability_gap=any(f.traceability_gap for f in partial),
            diagnostics=tuple(diagnostics),
        )

    async def audit(self, rules: Sequence[VerifiableRule], run_meta: PipelineRunMeta) -> AuditResult:
        """
        并发审计全部规则

        Args:
            rules: 待审计规则（通常来自 pooled 规则集）
            run_meta: 写入 findings 文档的运行元数据

        Returns:
            AuditResult，findings 按 rule_id 排序
        """
        logger.info(f"🔍 开始审计 {len(rules)} 条规则")
        findings = await asyncio.gather(*(self.audit_rule(rule) for rule in rules))
        findings = sorted(findings, key=lambda f: f.rule_id)
        meta = replace(run_meta, backend=self.backend.identifier, temperature=float(self.config.temperature),
                       model=self.model or run_meta.model, template_hash=self.template.source_hash)
        result = AuditResult(findings=findings, run_meta=meta)
        summary = result.summary
        logger.info(
            f"✅ 审计完成: Pass {summary['verdicts']['Pass']} / Fail {summary['verdicts']['Fail']} / "
            f"Unknown {summary['verdicts']['Unknown']}，追溯缺口 {summary['traceability_gap_count']}"
        )
        return result
