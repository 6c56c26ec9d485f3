# Tests for pooling module
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent))

from core_model import (
    IssueKind, PipelineRunMeta, PointKind, RequirementsSpecsIssue, RuleConfidence, RuleSet,
    VerifiableRule, VerificationPoint, canonical_rule_key,
)
from pooling import PoolingError, PooledRuleSet, agreement_score, find_near_misses, jaccard, merge

TEMPLATES = [
    ("The password shall be at least N characters.", PointKind.MIN_LENGTH, "password"),
    ("The account shall lock after N failed attempts.", PointKind.THRESHOLD_COUNT, "failed attempts"),
    ("The hotspot shall turn off when idle.", PointKind.OPERATIONAL_TRIGGER, "hotspot"),
    ("The encryption mode shall be allowed.", PointKind.ALLOWED_VALUE, "encryption mode"),
]
PARAMS = [
    st.integers(min_value=0, max_value=64),
    st.integers(min_value=0, max_value=10),
    st.sampled_from(["idle", "ignition off", "no clients"]),
    st.sampled_from(["WPA2", "WPA3", "WEP"]),
]
SOURCES = [("DOC-001",), ("DOC-002",), ("DOC-001", "DOC-002")]


def _spec(indices):
    return st.sampled_from(indices).flatmap(lambda i: st.tuples(
        st.just(i), PARAMS[i], st.sampled_from(list(RuleConfidence)), st.sampled_from(SOURCES),
    ))


ANY_SPECS = st.lists(_spec([0, 1, 2, 3]), max_size=6)


def _meta(run_id):
    return PipelineRunMeta(run_id=run_id, timestamp="2026-01-01T00:00:00Z", backend="scripted",
                           temperature=0.0, run_count=1)


def _build(run_id, specs, issues=()):
    rules = []
    for n, (index, parameter, confidence, sources) in enumerate(specs, start=1):
        statement, kind, subject = TEMPLATES[index]
        rules.append(VerifiableRule(
            rule_id=f"{run_id}-R{n:03d}",
            statement=statement,
            points=(VerificationPoint(kind, subject, parameter),),
            source_requirements=sources,
            confidence=confidence,
            provenance=(run_id,),
        ))
    return RuleSet(rules=tuple(rules), issues=tuple(issues), run_meta=_meta(run_id))


def _min_length(run_id, value, confidence=RuleConfidence.HIGH):
    return _build(run_id, [(0, value, confidence, ("DOC-001",))])


def _dicts(rules):
    return [r.to_dict() for r in rules]


class TestMerge:
    """测试合并"""

    def test_single_run_identity(self):
        ruleset = _build("run-1", [(0, 8, RuleConfidence.HIGH, ("DOC-001",)), (2, "idle", RuleConfidence.LOW, ("DOC-002",))])
        pooled = merge([ruleset])
        assert pooled.conflicts == ()
        assert pooled.agreement == 1.0
        assert pooled.keys() == ruleset.keys()
        assert [r.rule_id for r in pooled.rules] == ["R-001", "R-002"]

    def test_identical_runs_merge_provenance(self):
        pooled = merge([_min_length("run-1", 8), _min_length("run-2", 8)])
        assert len(pooled.rules) == 1
        assert pooled.rules[0].provenance == ("run-1", "run-2")
        assert pooled.conflicts == ()

    def test_strictest_bound_wins(self):
        pooled = merge([_min_length("run-1", 8), _min_length("run-2", 10)])
        assert pooled.rules[0].points[0].parameter == 10
        assert len(pooled.conflicts) == 1
        conflict = pooled.conflicts[0]
        assert [run for run, _ in conflict.variants] == ["run-1", "run-2"]
        assert conflict.variants[conflict.chosen][1].points[0].parameter == 10
        assert "max" in conflict.reason

    def test_lowest_confidence_wins(self):
        pooled = merge([_min_length("run-1", 8), _min_length("run-2", 8, RuleConfidence.LOW)])
        assert pooled.rules[0].confidence == RuleConfidence.LOW
        assert "confidence" in pooled.conflicts[0].reason

    def test_value_sets_union(self):
        a = _build("run-1", [(3, "WPA3", RuleConfidence.HIGH, ("DOC-001",))])
        b = _build("run-2", [(3, "WPA2", RuleConfidence.HIGH, ("DOC-001",))])
        pooled = merge([a, b])
        assert [p.parameter for p in pooled.rules[0].points] == ["WPA2", "WPA3"]
        assert len(pooled.conflicts) == 1
        assert "union" in pooled.conflicts[0].reason

    def test_value_set_union_regroups(self):
        a = _build("run-1", [(3, "WPA2", RuleConfidence.HIGH, ("DOC-001",))])
        b = _build("run-2", [(3, "WPA3", RuleConfidence.HIGH, ("DOC-001",))])
        c = _build("run-3", [(3, "WPA2", RuleConfidence.HIGH, ("DOC-001",))])
        stepwise = merge([merge([a, b]).as_ruleset(), c])
        flat = merge([a, b, c])
        assert _dicts(stepwise.rules) == _dicts(flat.rules)
        assert len(flat.rules) == 1
        assert [p.parameter for p in flat.rules[0].points] == ["WPA2", "WPA3"]
        assert canonical_rule_key(flat.rules[0]) == canonical_rule_key(a.rules[0])

    def test_issues_deduplicated(self):
        issue = RequirementsSpecsIssue("run-1-I001", IssueKind.AMBIGUITY, ("DOC-002",), "strong", "vague")
        other = RequirementsSpecsIssue("run-2-I001", IssueKind.AMBIGUITY, ("DOC-002",), "strong", "vague")
        pooled = merge([_build("run-1", [], [issue]), _build("run-2", [], [other])])
        assert len(pooled.issues) == 1
        assert pooled.issues[0].issue_id == "I-001"

    def test_empty_input(self):
        with pytest.raises(PoolingError):
            merge([])

    def test_serialization_round_trip(self):
        pooled = merge([_min_length("run-1", 8), _min_length("run-2", 10)])
        assert PooledRuleSet.from_dict(pooled.to_dict()).to_dict() == pooled.to_dict()

    def test_near_misses(self):
        a = VerifiableRule("R-001", "The password shall have 8 characters.",
                           (VerificationPoint(PointKind.MIN_LENGTH, "password", 8),), ("DOC-001",))
        b = VerifiableRule("R-002", "Passwords need eight characters or more.",
                           (VerificationPoint(PointKind.MIN_LENGTH, "password", 8),), ("DOC-001",))
        misses = find_near_misses([a, b])
        assert len(misses) == 1
        assert misses[0].rule_ids == ("R-001", "R-002")


class TestAgreement:
    """测试一致度"""

    def test_identical(self):
        assert agreement_score([_min_length("run-1", 8), _min_length("run-2", 12)]) == 1.0

    def test_disjoint(self):
        a = _build("run-1", [(0, 8, RuleConfidence.HIGH, ("DOC-001",))])
        b = _build("run-2", [(1, 3, RuleConfidence.HIGH, ("DOC-001",))])
        assert agreement_score([a, b]) == 0.0

    def test_jaccard_one_third(self):
        assert jaccard({"A", "B"}, {"A", "C"}) == pytest.approx(1 / 3)

    def test_single_set(self):
        assert agreement_score([_min_length("run-1", 8)]) == 1.0


class TestMergeProperties:
    """合并代数性质"""

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS, ANY_SPECS)
    def test_commutative(self, a, b):
        ra, rb = _build("run-1", a), _build("run-2", b)
        assert merge([ra, rb]).to_dict() == merge([rb, ra]).to_dict()

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS, ANY_SPECS, ANY_SPECS)
    def test_associative(self, a, b, c):
        ra, rb, rc = _build("run-1", a), _build("run-2", b), _build("run-3", c)
        left = merge([merge([ra, rb]).as_ruleset(), rc])
        right = merge([ra, merge([rb, rc]).as_ruleset()])
        flat = merge([ra, rb, rc])
        assert _dicts(left.rules) == _dicts(right.rules) == _dicts(flat.rules)

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS)
    def test_idempotent(self, a):
        ruleset = _build("run-1", a)
        assert _dicts(merge([ruleset, ruleset]).rules) == _dicts(merge([ruleset]).rules)

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS, ANY_SPECS)
    def test_distinct_keys_and_conservation(self, a, b):
        ra, rb = _build("run-1", a), _build("run-2", b)
        pooled = merge([ra, rb])
        keys = [canonical_rule_key(r) for r in pooled.rules]
        assert len(keys) == len(set(keys))
        recorded = set(keys) | {canonical_rule_key(rule) for c in pooled.conflicts for _, rule in c.variants}
        assert ra.keys() | rb.keys() <= recorded
        for conflict in pooled.conflicts:
            assert len(conflict.variants) >= 2
            assert {canonical_rule_key(rule) for _, rule in conflict.variants} == {conflict.key}

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS, ANY_SPECS)
    def test_bounds_are_maxima(self, a, b):
        ra, rb = _build("run-1", a), _build("run-2", b)
        pooled = merge([ra, rb])
        for rule in pooled.rules:
            if rule.points[0].kind not in (PointKind.MIN_LENGTH, PointKind.THRESHOLD_COUNT):
                continue
            key = canonical_rule_key(rule)
            inputs = [r.points[0].parameter for rs in (ra, rb) for r in rs.rules if canonical_rule_key(r) == key]
            assert rule.points[0].parameter == max(inputs)

    @settings(max_examples=1000, deadline=None)
    @given(ANY_SPECS, ANY_SPECS)
    def test_agreement_range(self, a, b):
        ra, rb = _build("run-1", a), _build("run-2", b)
        score = agreement_score([ra, rb])
        assert 0.0 <= score <= 1.0
        assert (score == 1.0) == (ra.keys() == rb.keys())
