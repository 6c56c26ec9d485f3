# Tests for report module and command line
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from core_model import (
    AuditFinding, EvidenceItem, EvidenceRole, IssueKind, LineSpan, NormativeStrength, PipelineRunMeta,
    PointKind, RequirementItem, RequirementsSpecsIssue, RuleConfidence, RuleSet, SourceRef, Verdict,
    VerifiableRule, VerificationPoint, validate_document,
)
from llm_backend import ScriptedBackend
from main import run_cli
from metamorphic import MRReport, MRViolation
from pooling import merge
from report import ReportError, render, render_mr_report, summarize


def _item(n, strength):
    return RequirementItem(f"DOC-{n:03d}", f"Statement {n}.", SourceRef("doc.md", LineSpan(n, n)), strength)


ITEMS = [
    _item(1, NormativeStrength.SHALL),
    _item(2, NormativeStrength.SHOULD),
    _item(3, NormativeStrength.INFORMATIVE),
    _item(4, NormativeStrength.SHALL),
]


def _pooled():
    meta = PipelineRunMeta(run_id="run-1", timestamp="2026-01-01T00:00:00Z", backend="scripted",
                           temperature=0.0, run_count=1)
    rules = (
        VerifiableRule("run-1-R001", "The password shall be at least 12 characters.",
                       (VerificationPoint(PointKind.MIN_LENGTH, "password", 12),), ("DOC-001",)),
        VerifiableRule("run-1-R002", "The hotspot shall turn off when idle.",
                       (VerificationPoint(PointKind.OPERATIONAL_TRIGGER, "hotspot", "idle"),), ("DOC-004",)),
    )
    issue = RequirementsSpecsIssue("run-1-I001", IssueKind.AMBIGUITY, ("DOC-002",), "Statement 2.", "vague")
    return merge([RuleSet(rules=rules, issues=(issue,), run_meta=meta)])


def _findings(pooled):
    evidence = EvidenceItem("src/auth.c", LineSpan(3, 3), "#define MIN_LEN 8", EvidenceRole.CONSTANT)
    by_statement = {r.statement: r.rule_id for r in pooled.rules}
    return [
        AuditFinding(by_statement["The password shall be at least 12 characters."], Verdict.FAIL,
                     RuleConfidence.HIGH, evidence=(evidence,), rationale="bound is 8"),
        AuditFinding(by_statement["The hotspot shall turn off when idle."], Verdict.UNKNOWN,
                     RuleConfidence.LOW, traceability_gap=True),
    ]


class TestSummarize:
    """测试报告统计"""

    def test_counts(self):
        pooled = _pooled()
        summary = summarize(ITEMS, pooled, _findings(pooled), stale_trace_paths=["gone/b.c", "gone/a.c"])
        assert summary.items_analyzed == 4
        assert summary.issues_found == 1
        assert summary.issue_rate == 0.25
        assert summary.verdicts == {'Pass': 0, 'Fail': 1, 'Unknown': 1}
        assert summary.fail_unknown_total == 2
        assert summary.traceability_gap_count == 1
        assert summary.verdict_coverage == 0.5
        assert summary.stale_trace_paths == ("gone/a.c", "gone/b.c")
        assert summary.strength_histogram == {'Shall': 2, 'Should': 1, 'May': 0, 'Informative': 1}

    def test_issue_rate_at_scale(self):
        items = [_item(n, NormativeStrength.SHALL) for n in range(1, 223)]
        issues = tuple(
            RequirementsSpecsIssue(f"run-1-I{n:03d}", IssueKind.AMBIGUITY, (f"DOC-{n:03d}",), f"Statement {n}.", "vague")
            for n in range(1, 76)
        )
        pooled = merge([RuleSet(rules=(), issues=issues, run_meta=_pooled().run_meta)])
        summary = summarize(items, pooled, [])
        assert summary.items_analyzed == 222
        assert summary.issues_found == 75
        assert abs(summary.issue_rate - 75 / 222) < 1e-12

    def test_empty(self):
        pooled = merge([RuleSet(rules=(), issues=(), run_meta=_pooled().run_meta)])
        summary = summarize([], pooled, [])
        assert summary.issue_rate == 0.0
        assert summary.verdict_coverage == 0.0

    def test_dangling_finding(self):
        pooled = _pooled()
        findings = _findings(pooled) + [AuditFinding("R-999", Verdict.UNKNOWN, RuleConfidence.LOW)]
        with pytest.raises(ReportError):
            summarize(ITEMS, pooled, findings)

    def test_rule_without_finding(self):
        pooled = _pooled()
        with pytest.raises(ReportError):
            summarize(ITEMS, pooled, _findings(pooled)[:1])


class TestRender:
    """测试报告渲染"""

    def test_structured_is_valid_and_stable(self):
        pooled = _pooled()
        findings = _findings(pooled)
        summary = summarize(ITEMS, pooled, findings)
        text = render(summary, pooled.rules, pooled.issues, findings, "structured")
        assert validate_document(text) == []
        assert text == render(summary, pooled.rules, pooled.issues, list(reversed(findings)), "structured")
        assert json.loads(text)['summary']['fail_unknown_total'] == 2

    def test_human_sections(self):
        pooled = _pooled()
        findings = _findings(pooled)
        text = render(summarize(ITEMS, pooled, findings), pooled.rules, pooled.issues, findings, "human")
        assert "### Ambiguity (1)" in text
        assert "### ❌ Fail (1)" in text
        assert "🔗 追溯缺口" in text
        assert "src/auth.c:3-3 [Constant]" in text
        assert text.index("❌ Fail") < text.index("❓ Unknown")

    def test_unknown_format(self):
        pooled = _pooled()
        findings = _findings(pooled)
        with pytest.raises(ValueError):
            render(summarize(ITEMS, pooled, findings), pooled.rules, pooled.issues, findings, "sarif")

    def test_mr_report(self):
        report = MRReport(relation="MR1", runs_compared=["run-1", "run-2"], agreement=0.5,
                          violations=[MRViolation("rule key missing from run-2", ("k",), ("DOC-001",))],
                          pairwise=[("run-1~run-2", 0.5)])
        assert validate_document(render_mr_report(report)) == []
        human = render_mr_report(report, "human")
        assert "❌ 不满足" in human
        assert "需求: DOC-001" in human


MINING_REPLY = json.dumps({
    'rules': [{
        'statement': "The password shall be at least 12 characters.",
        'points': [{'kind': "MinLength", 'subject': "password", 'parameter': 12}],
        'source_requirements': ["REQ-001"],
    }],
    'issues': [{
        'kind': "Ambiguity",
        'source_requirements': ["REQ-002"],
        'excerpt': "strong",
        'rationale': "no measurable criterion",
    }],
})
AUDIT_REPLY = json.dumps({
    'verdict': "Fail",
    'confidence': "High",
    'rationale': "MIN_LEN is 8",
    'evidence': [{'file': "auth.c", 'line_span': {'start': 1, 'end': 1},
                  'excerpt': "#define MIN_LEN 8", 'role': "Constant"}],
})


def _project(tmp_path, with_requirements=True):
    (tmp_path / "req.md").write_text(
        "- The password shall be at least 12 characters.\n- Passwords should be strong.\n", encoding='utf-8')
    code = tmp_path / "code"
    code.mkdir()
    (code / "auth.c").write_text(
        "#define MIN_LEN 8\nint check_password(const char *pw) {\n    return strlen(pw) >= MIN_LEN;\n}\n",
        encoding='utf-8')
    lines = ["paths:", "  code_root: code", "  output_dir: out"]
    if with_requirements:
        lines.insert(1, "  requirements: req.md")
    lines += ["mining:", "  run_count: 1", "system:", "  timestamp: '2026-01-01T00:00:00Z'", "  log_level: WARNING"]
    config = tmp_path / "config.yaml"
    config.write_text("\n".join(lines) + "\n", encoding='utf-8')
    return str(config)


def _backend():
    return ScriptedBackend.from_dict([
        {'contains': "[REQ-001]", 'text': MINING_REPLY, 'times': None},
        {'contains': "Rule statement:", 'text': AUDIT_REPLY, 'times': None},
    ])


class TestCli:
    """测试命令行"""

    @pytest.mark.asyncio
    async def test_run_writes_artifacts(self, tmp_path):
        code = await run_cli(["run", "--config", _project(tmp_path)], backend=_backend())
        assert code == 0
        run_dir = tmp_path / "out" / "run-20260101T000000Z"
        names = sorted(p.name for p in run_dir.iterdir())
        assert names == ["audit.findings", "code.index", "manifest.json", "pooled.rules", "report.txt",
                         "run-1.rules", "summary.report"]
        for name in names:
            if name != "report.txt":
                assert validate_document((run_dir / name).read_text(encoding='utf-8')) == [], name
        report = json.loads((run_dir / "summary.report").read_text(encoding='utf-8'))
        assert report['summary']['verdicts'] == {'Pass': 0, 'Fail': 1, 'Unknown': 0}
        assert report['summary']['issues_found'] == 1

    @pytest.mark.asyncio
    async def test_fail_on_findings(self, tmp_path):
        code = await run_cli(["run", "--config", _project(tmp_path), "--fail-on-findings"], backend=_backend())
        assert code == 1

    @pytest.mark.asyncio
    async def test_out_override(self, tmp_path):
        out = tmp_path / "elsewhere"
        code = await run_cli(["run", "--config", _project(tmp_path), "--out", str(out)], backend=_backend())
        assert code == 0
        assert (out / "run-20260101T000000Z" / "manifest.json").exists()

    @pytest.mark.asyncio
    async def test_usage_errors(self, tmp_path):
        assert await run_cli(["frobnicate"]) == 2
        assert await run_cli(["mine", "--config", _project(tmp_path, with_requirements=False)]) == 2

    @pytest.mark.asyncio
    async def test_pipeline_error(self, tmp_path):
        config = _project(tmp_path)
        code = await run_cli(["mine", "--config", config, "-r", str(tmp_path / "missing.md")], backend=_backend())
        assert code == 1

    @pytest.mark.asyncio
    async def test_replay_miss_is_pipeline_error(self, tmp_path):
        config = _project(tmp_path)
        code = await run_cli(["run", "--config", config, "--backend", "replay-strict",
                              "--cache", str(tmp_path / "empty.jsonl")])
        assert code == 1
