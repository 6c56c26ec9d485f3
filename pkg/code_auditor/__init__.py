# 代码审计模块
from .prompts import build_audit_prompt, AUDIT_TEMPLATE, CHECK_QUESTIONS
from .parser import AuditParseError, ParsedAudit, parse_audit_response, unparseable_finding
from .guard import guard, evidence_is_verbatim
from .auditor import CodeAuditor, AuditResult, summarize_findings

__all__ = [
    'build_audit_prompt', 'AUDIT_TEMPLATE', 'CHECK_QUESTIONS',
    'AuditParseError', 'ParsedAudit', 'parse_audit_response', 'unparseable_finding',
    'guard', 'evidence_is_verbatim',
    'CodeAuditor', 'AuditResult', 'summarize_findings',
]
