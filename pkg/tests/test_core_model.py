# Tests for core_model module
import itertools
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from core_model import (
    AuditFinding, ConfigError, DocumentParseError, DocumentSchemaError, EvidenceItem, EvidenceRole,
    LineSpan, PipelineRunMeta, PointKind, RuleConfidence, RuleSet, Verdict, VerifiableRule,
    VerificationPoint, canonical_rule_key, dump_document, extract_structured_block, fold_verdicts,
    join_confidence, load_config, read_document, validate_document, verdict_join,
)


def _meta(run_id="run-1"):
    return PipelineRunMeta(run_id=run_id, timestamp="2026-01-01T00:00:00Z", backend="scripted",
                           temperature=0.0, run_count=1)


def _rule(statement="The password shall be at least 8 characters.", parameter=8, rule_id="run-1-R001"):
    return VerifiableRule(
        rule_id=rule_id,
        statement=statement,
        points=(VerificationPoint(PointKind.MIN_LENGTH, "password", parameter),),
        source_requirements=("DOC-001",),
    )


class TestVerificationPoint:
    """测试验证点不变量"""

    def test_min_length_requires_integer(self):
        with pytest.raises(ValueError):
            VerificationPoint(PointKind.MIN_LENGTH, "password", "eight")
        with pytest.raises(ValueError):
            VerificationPoint(PointKind.MIN_LENGTH, "password", 8.0)

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ValueError):
            VerificationPoint(PointKind.THRESHOLD_COUNT, "attempts", True)

    def test_negative_bound_rejected(self):
        with pytest.raises(ValueError):
            VerificationPoint(PointKind.THRESHOLD_COUNT, "attempts", -1)

    def test_operational_trigger_needs_text(self):
        with pytest.raises(ValueError):
            VerificationPoint(PointKind.OPERATIONAL_TRIGGER, "hotspot", None)
        point = VerificationPoint(PointKind.OPERATIONAL_TRIGGER, "hotspot", "ignition off")
        assert point.parameter == "ignition off"

    def test_uniqueness_without_parameter(self):
        point = VerificationPoint(PointKind.UNIQUENESS, "password")
        assert point.parameter is None

    def test_rule_needs_points(self):
        with pytest.raises(ValueError):
            VerifiableRule("R", "The x shall be y.", (), ("DOC-001",))

    def test_line_span_order(self):
        with pytest.raises(ValueError):
            LineSpan(5, 4)
        assert LineSpan(1, 10).contains(LineSpan(3, 3))
        assert not LineSpan(1, 10).contains(LineSpan(9, 11))


class TestCanonicalRuleKey:
    """测试规则规范键"""

    def test_normalizes_case_and_punctuation(self):
        a = _rule("The Password shall be at least 8 characters.")
        b = _rule("the password  shall be at least 8 characters")
        assert canonical_rule_key(a) == canonical_rule_key(b)

    def test_parameter_not_in_key(self):
        assert canonical_rule_key(_rule(parameter=8)) == canonical_rule_key(_rule(parameter=12))

    def test_point_order_irrelevant(self):
        p1 = VerificationPoint(PointKind.ALLOWED_VALUE, "mode", "WPA3")
        p2 = VerificationPoint(PointKind.PROHIBITED_VALUE, "mode", "WEP")
        a = VerifiableRule("A", "Modes.", (p1, p2), ("DOC-001",))
        b = VerifiableRule("B", "Modes.", (p2, p1), ("DOC-002",))
        assert canonical_rule_key(a) == canonical_rule_key(b)

    def test_value_set_size_not_in_key(self):
        one = VerifiableRule("A", "Modes.", (VerificationPoint(PointKind.ALLOWED_VALUE, "mode", "WPA2"),), ("DOC-001",))
        two = VerifiableRule("B", "Modes.", (VerificationPoint(PointKind.ALLOWED_VALUE, "mode", "WPA2"),
                                             VerificationPoint(PointKind.ALLOWED_VALUE, "mode", "WPA3")), ("DOC-001",))
        assert canonical_rule_key(one) == canonical_rule_key(two) == "modes|AllowedValue:mode"

    def test_key_format(self):
        key = canonical_rule_key(_rule())
        assert key == "the password shall be at least 8 characters|MinLength:password"


class TestVerdictLattice:
    """测试结论格 Pass < Unknown < Fail"""

    def test_join_table(self):
        assert verdict_join(Verdict.PASS, Verdict.UNKNOWN) == Verdict.UNKNOWN
        assert verdict_join(Verdict.UNKNOWN, Verdict.FAIL) == Verdict.FAIL
        assert verdict_join(Verdict.PASS, Verdict.FAIL) == Verdict.FAIL

    def test_algebra_exhaustive(self):
        verdicts = list(Verdict)
        for a, b in itertools.product(verdicts, repeat=2):
            assert verdict_join(a, b) == verdict_join(b, a)
            assert verdict_join(a, a) == a
        for a, b, c in itertools.product(verdicts, repeat=3):
            assert verdict_join(verdict_join(a, b), c) == verdict_join(a, verdict_join(b, c))
        for a in verdicts:
            assert verdict_join(Verdict.PASS, a) == a

    def test_fold_empty_is_pass(self):
        assert fold_verdicts([]) == Verdict.PASS

    def test_join_confidence(self):
        assert join_confidence([RuleConfidence.HIGH, RuleConfidence.HIGH]) == RuleConfidence.HIGH
        assert join_confidence([RuleConfidence.HIGH, RuleConfidence.LOW]) == RuleConfidence.LOW


class TestDocuments:
    """测试文档格式与 schema 校验"""

    def test_dump_is_byte_stable(self):
        ruleset = RuleSet(rules=(_rule(),), issues=(), run_meta=_meta())
        first = dump_document("rules", ruleset.to_dict())
        second = dump_document("rules", RuleSet.from_dict(json.loads(first)).to_dict())
        assert first == second
        assert first.endswith("\n")
        assert json.loads(first)['schema_version'] == "1"

    def test_validate_reports_unknown_field_path(self):
        body = RuleSet(rules=(_rule(),), issues=(), run_meta=_meta()).to_dict()
        body['rules'][0]['bogus'] = 1
        text = json.dumps({'schema_version': "1", 'document': "rules", **body})
        violations = validate_document(text)
        assert violations
        assert violations[0].startswith("rules[0].bogus:")

    def test_validate_rejects_bad_point(self):
        body = RuleSet(rules=(_rule(),), issues=(), run_meta=_meta()).to_dict()
        body['rules'][0]['points'][0]['parameter'] = "eight"
        text = json.dumps({'schema_version': "1", 'document': "rules", **body})
        assert validate_document(text)

    def test_syntax_error_is_distinct(self):
        with pytest.raises(DocumentParseError):
            validate_document("{not json")

    def test_unknown_document_type(self):
        assert validate_document('{"schema_version": "1", "document": "nope"}')

    def test_fail_finding_requires_evidence(self):
        finding = AuditFinding("R-001", Verdict.FAIL, RuleConfidence.HIGH)
        body = {
            'findings': [finding.to_dict()],
            'summary': {'rules_total': 1, 'verdicts': {'Pass': 0, 'Fail': 1, 'Unknown': 0},
                        'fail_unknown_total': 1, 'traceability_gap_count': 0},
            'run_meta': _meta().to_dict(),
        }
        with pytest.raises(DocumentSchemaError):
            dump_document("findings", body)

    def test_fail_finding_with_evidence_is_valid(self):
        evidence = EvidenceItem("a.c", LineSpan(1, 1), "x = 1;", EvidenceRole.CONSTANT)
        finding = AuditFinding("R-001", Verdict.FAIL, RuleConfidence.HIGH, evidence=(evidence,))
        body = {
            'findings': [finding.to_dict()],
            'summary': {'rules_total': 1, 'verdicts': {'Pass': 0, 'Fail': 1, 'Unknown': 0},
                        'fail_unknown_total': 1, 'traceability_gap_count': 0},
            'run_meta': _meta().to_dict(),
        }
        text = dump_document("findings", body)
        restored = AuditFinding.from_dict(read_document(text, "findings")['findings'][0])
        assert restored == finding

    def test_read_document_checks_kind(self):
        text = dump_document("rules", RuleSet(rules=(), issues=(), run_meta=_meta()).to_dict())
        with pytest.raises(DocumentSchemaError):
            read_document(text, "pooled")


class TestExtractStructuredBlock:
    """测试从模型回复中提取 JSON"""

    def test_fenced_block_with_prose(self):
        raw = 'Sure.\n```json\n{"rules": []}\n```\nDone.'
        data, remainder = extract_structured_block(raw)
        assert data == {'rules': []}
        assert "Sure." in remainder and "Done." in remainder

    def test_bare_object(self):
        data, _ = extract_structured_block('result: {"verdict": "Pass"} trailing')
        assert data == {'verdict': "Pass"}

    def test_skips_broken_braces(self):
        data, _ = extract_structured_block('{oops} then {"a": 1}')
        assert data == {'a': 1}

    def test_nothing_found(self):
        data, remainder = extract_structured_block("no json here")
        assert data is None
        assert remainder == "no json here"


class TestConfig:
    """测试配置加载"""

    def test_defaults(self):
        config = load_config()
        assert config.mining.run_count == 3
        assert config.llm.backend == "replay-strict"
        assert config.audit.prompt_budget == 12 * 1024

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("mining:\n  run_count: 2\n  bogus: 1\n", encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_run_count_capped(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("mining:\n  run_count: 5\n", encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("paths:\n  requirements: docs/req.md\n", encoding='utf-8')
        config = load_config(str(path))
        assert config.resolve(config.paths.requirements) == tmp_path.resolve() / "docs" / "req.md"

    def test_overrides_keep_base_dir(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("paths:\n  code_root: src\n", encoding='utf-8')
        config = load_config(str(path)).with_overrides({'mining': {'run_count': 1}, 'llm': {'backend': None}})
        assert config.mining.run_count == 1
        assert config.llm.backend == "replay-strict"
        assert config.resolve(config.paths.code_root) == tmp_path.resolve() / "src"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "missing.yaml"))
