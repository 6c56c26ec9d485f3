"""
审计提示词构建
"""
from typing import Dict, Optional

from core_model.models import PointKind, VerifiableRule
from core_model.templates import PromptTemplate, load_template
from code_index.context import ContextBundle

AUDIT_TEMPLATE = "audit_prompt.txt"

# 每种验证点要回答的检查问题
CHECK_QUESTIONS: Dict[PointKind, str] = {
    PointKind.MIN_LENGTH: "where is the length bound enforced, and what is its value?",
    PointKind.THRESHOLD_COUNT: "where is the count compared, and against which limit?",
    PointKind.ALLOWED_VALUE: "which values can reach this subject, and are they all allowed?",
    PointKind.PROHIBITED_VALUE: "is there any code path that sets or accepts the prohibited value?",
    PointKind.UNIQUENESS: "what makes the value distinct per instance, and can two instances collide?",
    PointKind.OPERATIONAL_TRIGGER: "where is the trigger condition detected, and does it cause the required action?",
}


def build_audit_prompt(rule: VerifiableRule, bundle: ContextBundle,
                       template: Optional[PromptTemplate] = None) -> str:
    """渲染单条规则、单份上下文的审计提示词"""
    template = template or load_template(AUDIT_TEMPLATE)
    points = [
        {
            'kind': p.kind.value,
            'subject': p.subject,
            'parameter': p.parameter,
            'question': CHECK_QUESTIONS[p.kind],
        }
        for p in rule.points
    ]
    return template.render(
        rule_id=rule.rule_id,
        statement=rule.statement,
        sources=list(rule.source_requirements),
        points=points,
        chunks=list(bundle.chunks),
    )
