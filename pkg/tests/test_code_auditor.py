# Tests for code_auditor module
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from core_model import (
    AuditFinding, EvidenceItem, EvidenceRole, LineSpan, PipelineRunMeta, PointKind, RuleConfidence,
    Verdict, VerifiableRule, VerificationPoint,
)
from core_model.config import AuditConfig
from code_auditor import (
    AuditParseError, CodeAuditor, build_audit_prompt, evidence_is_verbatim, guard,
    parse_audit_response, summarize_findings,
)
from code_index import ContextBundle, ContextChunk, scan
from llm_backend import ReplayBackend, ReplayMissError, ScriptedBackend

CHUNK = ContextChunk(
    file="src/auth.c",
    span=LineSpan(10, 13),
    text="int is_strong(const char *pw) {\n    if (strlen(pw) < 8) return 0;\n    return 1;\n}",
    score=2,
)
BUNDLE = ContextBundle(rule_id="R-001", chunks=(CHUNK,), traceability_used=False, budget=1024)
EMPTY = ContextBundle(rule_id="R-001", chunks=(), traceability_used=False, budget=1024)

MIN_LENGTH_RULE = VerifiableRule(
    rule_id="R-001",
    statement="The password shall be at least 12 characters.",
    points=(VerificationPoint(PointKind.MIN_LENGTH, "password", 12),),
    source_requirements=("DOC-001",),
)
PROHIBITED_RULE = VerifiableRule(
    rule_id="R-002",
    statement="The hotspot shall not use WEP.",
    points=(VerificationPoint(PointKind.PROHIBITED_VALUE, "encryption mode", "WEP"),),
    source_requirements=("DOC-002",),
)


def _evidence(start, end, excerpt, role=EvidenceRole.VALIDATION_LOGIC, file="src/auth.c"):
    return EvidenceItem(file, LineSpan(start, end), excerpt, role)


def _finding(verdict, *evidence, rule_id="R-001"):
    return AuditFinding(rule_id, verdict, RuleConfidence.HIGH, evidence=tuple(evidence))


def _reply(verdict, evidence=(), confidence="High", rationale="checked"):
    return json.dumps({'verdict': verdict, 'confidence': confidence, 'rationale': rationale,
                       'evidence': list(evidence)})


def _cite(file, start, end, excerpt, role):
    return {'file': file, 'line_span': {'start': start, 'end': end}, 'excerpt': excerpt, 'role': role}


class TestGuard:
    """测试证据守卫（对抗性用例）"""

    def test_verbatim_check_ignores_whitespace(self):
        assert evidence_is_verbatim(_evidence(11, 11, "if (strlen(pw)  <  8)"), BUNDLE)
        assert evidence_is_verbatim(_evidence(11, 11, "if (strlen(pw) < 8)\n"), BUNDLE)
        assert not evidence_is_verbatim(_evidence(11, 11, "if (strlen(pw) < 12)"), BUNDLE)
        assert not evidence_is_verbatim(_evidence(12, 12, "if (strlen(pw) < 8)"), BUNDLE)
        assert not evidence_is_verbatim(_evidence(11, 11, "   "), BUNDLE)

    def test_fail_on_fabricated_excerpt_demoted(self):
        finding = _finding(Verdict.FAIL, _evidence(11, 11, "if (strlen(pw) < 6) return 0;"))
        guarded = guard(finding, BUNDLE, MIN_LENGTH_RULE)
        assert guarded.verdict == Verdict.UNKNOWN
        assert guarded.confidence == RuleConfidence.LOW
        assert guarded.evidence == ()
        assert any("not verbatim" in d for d in guarded.diagnostics)

    def test_pass_on_suggestive_name_demoted(self):
        finding = _finding(Verdict.PASS, _evidence(10, 10, "int is_strong(const char *pw)",
                                                   EvidenceRole.SUGGESTIVE_IDENTIFIER_ONLY))
        guarded = guard(finding, BUNDLE, MIN_LENGTH_RULE)
        assert guarded.verdict == Verdict.UNKNOWN
        assert guarded.evidence == finding.evidence

    def test_pass_without_evidence_demoted(self):
        assert guard(_finding(Verdict.PASS), BUNDLE, MIN_LENGTH_RULE).verdict == Verdict.UNKNOWN

    def test_fail_with_real_logic_kept(self):
        finding = _finding(Verdict.FAIL, _evidence(11, 11, "if (strlen(pw) < 8) return 0;"))
        guarded = guard(finding, BUNDLE, MIN_LENGTH_RULE)
        assert guarded == finding

    def test_prohibited_fail_needs_enabling_path(self):
        constant = _evidence(11, 11, "strlen(pw) < 8", EvidenceRole.CONSTANT)
        guarded = guard(_finding(Verdict.FAIL, constant, rule_id="R-002"), BUNDLE, PROHIBITED_RULE)
        assert guarded.verdict == Verdict.UNKNOWN

        path = _evidence(11, 12, "return 0;\n    return 1;", EvidenceRole.ENABLING_PATH)
        guarded = guard(_finding(Verdict.FAIL, constant, path, rule_id="R-002"), BUNDLE, PROHIBITED_RULE)
        assert guarded.verdict == Verdict.FAIL

    def test_prohibited_pass_on_empty_context_demoted(self):
        finding = _finding(Verdict.PASS, rule_id="R-002")
        guarded = guard(finding, EMPTY, PROHIBITED_RULE)
        assert guarded.verdict == Verdict.UNKNOWN
        assert guarded.traceability_gap

    def test_traceability_gap_only_without_trace_entry(self):
        traced = ContextBundle(rule_id="R-001", chunks=(), traceability_used=False, budget=1024,
                               traced_paths=("src/auth.c",))
        unknown = AuditFinding("R-001", Verdict.UNKNOWN, RuleConfidence.LOW)
        assert guard(unknown, EMPTY, MIN_LENGTH_RULE).traceability_gap
        assert not guard(unknown, traced, MIN_LENGTH_RULE).traceability_gap
        assert not guard(unknown, BUNDLE, MIN_LENGTH_RULE).traceability_gap

    def test_never_upgrades_and_idempotent(self):
        findings = [
            AuditFinding("R-001", Verdict.UNKNOWN, RuleConfidence.LOW,
                         evidence=(_evidence(11, 11, "return 0;"),)),
            _finding(Verdict.FAIL, _evidence(11, 11, "if (strlen(pw) < 6) return 0;")),
            _finding(Verdict.PASS, _evidence(12, 12, "return 1;")),
        ]
        for finding in findings:
            once = guard(finding, BUNDLE, MIN_LENGTH_RULE)
            assert guard(once, BUNDLE, MIN_LENGTH_RULE) == once
            assert finding.verdict == Verdict.UNKNOWN or once.verdict in (finding.verdict, Verdict.UNKNOWN)
            assert not (finding.verdict == Verdict.UNKNOWN and once.verdict != Verdict.UNKNOWN)


class TestParseAuditResponse:
    """测试审计回复解析"""

    def test_valid(self):
        raw = _reply("Fail", [_cite("src/auth.c", 11, 11, "strlen(pw) < 8", "Constant")])
        parsed = parse_audit_response(raw, "R-001", BUNDLE)
        assert parsed.finding.verdict == Verdict.FAIL
        assert parsed.finding.evidence[0].role == EvidenceRole.CONSTANT
        assert parsed.diagnostics == []

    def test_evidence_outside_context_dropped(self):
        raw = _reply("Fail", [
            _cite("src/other.c", 1, 1, "x", "Constant"),
            _cite("src/auth.c", 12, 20, "return 1;", "Constant"),
            {'file': "src/auth.c", 'excerpt': "x"},
        ])
        parsed = parse_audit_response(raw, "R-001", BUNDLE)
        assert parsed.finding.evidence == ()
        assert len(parsed.diagnostics) == 3
        assert "outside the supplied context" in parsed.diagnostics[0]

    def test_no_block(self):
        with pytest.raises(AuditParseError):
            parse_audit_response("The code looks fine to me.", "R-001", BUNDLE)

    def test_bad_verdict(self):
        with pytest.raises(AuditParseError):
            parse_audit_response(_reply("Maybe"), "R-001", BUNDLE)

    def test_prompt_lists_points_and_chunks(self):
        prompt = build_audit_prompt(MIN_LENGTH_RULE, BUNDLE)
        assert "Rule statement: The password shall be at least 12 characters." in prompt
        assert "MinLength(password, 12)" in prompt
        assert "--- FILE: src/auth.c LINES: 10-13 ---" in prompt
        assert "absence of evidence yields Unknown" in build_audit_prompt(MIN_LENGTH_RULE, EMPTY)


def _code_tree(tmp_path):
    root = tmp_path / "code"
    (root / "src").mkdir(parents=True)
    (root / "src" / "auth.c").write_text(
        '#include "config.h"\n'
        '// minimum password length\n'
        'int check_password(const char *pw) {\n'
        '    return strlen(pw) >= MIN_LEN;\n'
        '}\n',
        encoding='utf-8',
    )
    (root / "src" / "config.h").write_text("#define MIN_LEN 8\n", encoding='utf-8')
    return scan(str(root))


PASS_REPLY = _reply("Pass", [_cite("src/auth.c", 4, 4, "return strlen(pw) >= MIN_LEN;", "ValidationLogic")])
FAIL_REPLY = _reply("Fail", [_cite("src/config.h", 1, 1, "#define MIN_LEN 8", "Constant")])


def _meta():
    return PipelineRunMeta(run_id="audit", timestamp="2026-01-01T00:00:00Z", backend="", temperature=0.0,
                           run_count=1)


class TestCodeAuditor:
    """测试审计器"""

    @pytest.mark.asyncio
    async def test_audit_rule(self, tmp_path):
        backend = ScriptedBackend.queued([PASS_REPLY])
        auditor = CodeAuditor(backend, _code_tree(tmp_path))
        finding = await auditor.audit_rule(MIN_LENGTH_RULE)
        assert finding.verdict == Verdict.PASS
        assert "--- FILE: src/config.h" in backend.prompts[0]

    @pytest.mark.asyncio
    async def test_unparseable_retried_once(self, tmp_path):
        backend = ScriptedBackend.queued(["not json", PASS_REPLY])
        finding = await CodeAuditor(backend, _code_tree(tmp_path)).audit_rule(MIN_LENGTH_RULE)
        assert finding.verdict == Verdict.PASS
        assert backend.calls == 2

    @pytest.mark.asyncio
    async def test_twice_unparseable_is_unknown(self, tmp_path):
        backend = ScriptedBackend.queued(["not json", "still not json"])
        finding = await CodeAuditor(backend, _code_tree(tmp_path)).audit_rule(MIN_LENGTH_RULE)
        assert finding.verdict == Verdict.UNKNOWN
        assert finding.confidence == RuleConfidence.LOW
        assert finding.rationale == "unparseable audit response"

    @pytest.mark.asyncio
    async def test_backend_error_is_unknown(self, tmp_path):
        backend = ScriptedBackend.queued([])
        finding = await CodeAuditor(backend, _code_tree(tmp_path)).audit_rule(MIN_LENGTH_RULE)
        assert finding.verdict == Verdict.UNKNOWN
        assert any(d.startswith("backend error") for d in finding.diagnostics)

    @pytest.mark.asyncio
    async def test_replay_miss_propagates(self, tmp_path):
        backend = ReplayBackend(str(tmp_path / "empty.jsonl"), mode="strict")
        with pytest.raises(ReplayMissError):
            await CodeAuditor(backend, _code_tree(tmp_path)).audit_rule(MIN_LENGTH_RULE)

    @pytest.mark.asyncio
    async def test_split_context_folds_pessimistically(self, tmp_path):
        backend = ScriptedBackend.from_dict([
            {'contains': "--- FILE: src/auth.c", 'text': PASS_REPLY},
            {'contains': "--- FILE: src/config.h", 'text': FAIL_REPLY},
        ])
        auditor = CodeAuditor(backend, _code_tree(tmp_path), config=AuditConfig(prompt_budget=1))
        finding = await auditor.audit_rule(MIN_LENGTH_RULE)
        assert backend.calls == 2
        assert finding.verdict == Verdict.FAIL
        assert [e.file for e in finding.evidence] == ["src/auth.c", "src/config.h"]

    @pytest.mark.asyncio
    async def test_audit_summary_and_meta(self, tmp_path):
        other = VerifiableRule("R-000", "The hotspot shall turn off when idle.",
                               (VerificationPoint(PointKind.OPERATIONAL_TRIGGER, "hotspot", "idle"),),
                               ("DOC-009",))
        backend = ScriptedBackend.from_dict([
            {'contains': "Rule id: R-001", 'text': PASS_REPLY},
            {'contains': "Rule id: R-000", 'text': _reply("Unknown", confidence="Low")},
        ])
        result = await CodeAuditor(backend, _code_tree(tmp_path), model="m").audit([MIN_LENGTH_RULE, other], _meta())
        assert [f.rule_id for f in result.findings] == ["R-000", "R-001"]
        assert result.findings[0].traceability_gap
        assert result.summary == {
            'rules_total': 2,
            'verdicts': {'Pass': 1, 'Fail': 0, 'Unknown': 1},
            'fail_unknown_total': 1,
            'traceability_gap_count': 1,
        }
        assert result.run_meta.backend == "scripted"
        assert result.run_meta.model == "m"
        assert len(result.run_meta.template_hash) == 64

    def test_summarize_empty(self):
        assert summarize_findings([])['rules_total'] == 0
