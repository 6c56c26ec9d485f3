# 核心领域模型与文档格式
from .errors import ReqAuditError, DocumentParseError, DocumentSchemaError, ConfigError
from .models import (
    NormativeStrength, PointKind, RuleConfidence, IssueKind, Verdict, EvidenceRole,
    LineSpan, SourceRef, RequirementItem, VerificationPoint, VerifiableRule,
    RequirementsSpecsIssue, PipelineRunMeta, RuleSet, EvidenceItem, AuditFinding,
    TraceabilityMap, canonical_rule_key, normalize_text, point_signature, key_signature,
    verdict_join, fold_verdicts, join_confidence, joined_source_text,
    excerpt_is_verbatim, items_by_id, sort_rules, is_integer, is_number,
)
from .config import PipelineConfig, load_config
from .templates import PromptTemplate, load_template, TEMPLATE_DIR
from .schema import (
    SCHEMA_VERSION, DOCUMENT_MODELS, validate_document, dump_document,
    read_document, extract_structured_block,
)

__all__ = [
    'ReqAuditError', 'DocumentParseError', 'DocumentSchemaError', 'ConfigError',
    'NormativeStrength', 'PointKind', 'RuleConfidence', 'IssueKind', 'Verdict', 'EvidenceRole',
    'LineSpan', 'SourceRef', 'RequirementItem', 'VerificationPoint', 'VerifiableRule',
    'RequirementsSpecsIssue', 'PipelineRunMeta', 'RuleSet', 'EvidenceItem', 'AuditFinding',
    'TraceabilityMap', 'canonical_rule_key', 'normalize_text', 'point_signature', 'key_signature',
    'verdict_join', 'fold_verdicts', 'join_confidence', 'joined_source_text',
    'excerpt_is_verbatim', 'items_by_id', 'sort_rules', 'is_integer', 'is_number',
    'SCHEMA_VERSION', 'DOCUMENT_MODELS', 'validate_document', 'dump_document',
    'read_document', 'extract_structured_block',
    'PipelineConfig', 'load_config', 'PromptTemplate', 'load_template', 'TEMPLATE_DIR',
]
