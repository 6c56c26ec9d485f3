"""
多次运行结果的合并（pooling）
按规范键分组，相同则合并来源，不同则按“最严格参数、最低置信度”裁决并留下冲突记录
"""
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from core_model.errors import ReqAuditError
from core_model.models import (
    PipelineRunMeta, PointKind, RequirementsSpecsIssue, RuleSet,
    VerifiableRule, VerificationPoint, canonical_rule_key, join_confidence,
    normalize_text, point_signature,
)

logger = logging.getLogger(__name__)

_MAX_KINDS = (PointKind.MIN_LENGTH, PointKind.THRESHOLD_COUNT)
_UNION_KINDS = (PointKind.ALLOWED_VALUE, PointKind.PROHIBITED_VALUE)


class PoolingError(ReqAuditError):
    """合并输入非法"""


@dataclass(frozen=True)
class ConflictRecord:
    """同一规范键下参数或置信度不一致的规则变体"""
    key: str
    variants: Tuple[Tuple[str, VerifiableRule], ...]
    chosen: int
    reason: str

    def __post_init__(self):
        if len(self.variants) < 2:
            raise ValueError("冲突记录至少需要两个变体")
        if not 0 <= self.chosen < len(self.variants):
            raise ValueError("裁决变体不在变体列表中")

    def to_dict(self) -> Dict:
        return {
            'key': self.key,
            'variants': [{'run_id': run_id, 'rule': rule.to_dict()} for run_id, rule in self.variants],
            'resolution': {'variant': self.chosen, 'reason': self.reason},
        }


@dataclass(frozen=True)
class NearMiss:
    """键不同但验证点签名相同且来源重叠的规则对，留给人工复核"""
    rule_ids: Tuple[str, str]
    keys: Tuple[str, str]
    signature: Tuple[str, ...]

    def to_dict(self) -> Dict:
        return {'rule_ids': list(self.rule_ids), 'keys': list(self.keys), 'signature': list(self.signature)}


@dataclass(frozen=True)
class PooledRuleSet:
    """合并结果"""
    rules: Tuple[VerifiableRule, ...]
    issues: Tuple[RequirementsSpecsIssue, ...]
    conflicts: Tuple[ConflictRecord, ...]
    agreement: float
    run_meta: PipelineRunMeta
    near_misses: Tuple[NearMiss, ...] = ()
    diagnostics: Tuple[str, ...] = ()

    def as_ruleset(self) -> RuleSet:
        return RuleSet(rules=self.rules, issues=self.issues, run_meta=self.run_meta, diagnostics=self.diagnostics)

    def keys(self) -> Set[str]:
        return {canonical_rule_key(r) for r in self.rules}

    def to_dict(self) -> Dict:
        return {
            'rules': [r.to_dict() for r in self.rules],
            'issues': [i.to_dict() for i in self.issues],
            'conflicts': [c.to_dict() for c in self.conflicts],
            'near_misses': [n.to_dict() for n in self.near_misses],
            'agreement': float(self.agreement),
            'run_meta': self.run_meta.to_dict(),
            'diagnostics': list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "PooledRuleSet":
        return cls(
            rules=tuple(VerifiableRule.from_dict(r) for r in data['rules']),
            issues=tuple(RequirementsSpecsIssue.from_dict(i) for i in data['issues']),
            conflicts=tuple(
                ConflictRecord(
                    key=c['key'],
                    variants=tuple((v['run_id'], VerifiableRule.from_dict(v['rule'])) for v in c['variants']),
                    chosen=c['resolution']['variant'],
                    reason=c['resolution']['reason'],
                )
                for c in data['conflicts']
            ),
            agreement=data['agreement'],
            run_meta=PipelineRunMeta.from_dict(data['run_meta']),
            near_misses=tuple(
                NearMiss(tuple(n['rule_ids']), tuple(n['keys']), tuple(n['signature']))
                for n in data.get('near_misses', [])
            ),
            diagnostics=tuple(data.get('diagnostics', ())),
        )


# === 一致度 ===

def jaccard(a: Set[str], b: Set[str]) -> float:
    union = a | b
    return 1.0 if not union else len(a & b) / len(union)


def agreement_score(rulesets: Sequence) -> float:
    """规范键集合两两 Jaccard 相似度的均值；少于两个集合时为 1.0"""
    key_sets = [{canonical_rule_key(r) for r in rs.rules} for rs in rulesets]
    pairs = list(combinations(key_sets, 2))
    if not pairs:
        return 1.0
    return sum(jaccard(a, b) for a, b in pairs) / len(pairs)


# === 冲突裁决 ===

def _param_order(value) -> Tuple[int, str]:
    if value is None:
        return (0, "")
    if isinstance(value, str):
        return (2, value)
    return (1, repr(value))


def _point_fact(point: VerificationPoint) -> Tuple[str, str, Tuple[int, str]]:
    return (point.kind.value, normalize_text(point.subject), _param_order(point.parameter))


def _facts(rule: VerifiableRule) -> Tuple:
    return tuple(sorted(_point_fact(p) for p in rule.points))


def _same_except_identity(a: VerifiableRule, b: VerifiableRule) -> bool:
    return (a.statement, a.points, a.source_requirements, a.confidence) == \
        (b.statement, b.points, b.source_requirements, b.confidence)


def _merge_points(rules: Sequence[VerifiableRule]) -> Tuple[Tuple[VerificationPoint, ...], List[str]]:
    """按 (kind, subject) 签名合并验证点，返回合并后的点与采用的裁决规则"""
    groups: Dict[Tuple[str, str], List[List[VerificationPoint]]] = defaultdict(list)
    for rule in rules:
        per_rule: Dict[Tuple[str, str], List[VerificationPoint]] = defaultdict(list)
        for p in rule.points:
            per_rule[(p.kind.value, normalize_text(p.subject))].append(p)
        for sig, pts in per_rule.items():
            groups[sig].append(pts)

    merged: List[VerificationPoint] = []
    policies: Set[str] = set()
    for (kind_name, _), variant_points in sorted(groups.items()):
        kind = PointKind(kind_name)
        subject = min(p.subject for pts in variant_points for p in pts)
        if kind in _UNION_KINDS:
            multisets = {tuple(sorted((p.parameter for p in pts), key=_param_order)) for pts in variant_points}
            if len(multisets) == 1:
                values = list(next(iter(multisets)))
            else:
                values = sorted({p.parameter for pts in variant_points for p in pts}, key=_param_order)
                policies.add(f"{kind_name}: union of values")
            merged.extend(VerificationPoint(kind, subject, v) for v in values)
            continue
        columns = [sorted((p.parameter for p in pts), key=_param_order) for pts in variant_points]
        width = max(len(c) for c in columns)
        for j in range(width):
            column = [c[j] for c in columns if j < len(c)]
            if kind in _MAX_KINDS:
                value = max(column)
                rule_text = f"{kind_name}: strictest (max) bound"
            else:
                value = min(column, key=_param_order)
                rule_text = f"{kind_name}: lexicographically smallest parameter (review)"
            if len(set(map(_param_order, column))) > 1:
                policies.add(rule_text)
            merged.append(VerificationPoint(kind, subject, value))
    return tuple(merged), sorted(policies)


def _reconcile(key: str, variants: List[Tuple[str, VerifiableRule]]
               ) -> Tuple[VerifiableRule, Optional[ConflictRecord]]:
    variants = sorted(variants, key=lambda v: (v[0], v[1].rule_id, json.dumps(v[1].to_dict(), sort_keys=True)))
    rules = [rule for _, rule in variants]
    provenance = tuple(sorted({run for rule in rules for run in (rule.provenance or ())} |
                              {label for label, rule in variants if not rule.provenance}))

    if all(_same_except_identity(rules[0], r) for r in rules[1:]):
        return replace(rules[0], provenance=provenance), None

    points, policies = _merge_points(rules)
    confidence = join_confidence(r.confidence for r in rules)
    merged = VerifiableRule(
        rule_id=rules[0].rule_id,
        statement=min(r.statement for r in rules),
        points=points,
        source_requirements=tuple(sorted({s for r in rules for s in r.source_requirements})),
        confidence=confidence,
        provenance=provenance,
    )

    if len({r.confidence for r in rules}) > 1:
        policies.append("confidence: lowest wins")
    if not policies:
        return merged, None

    merged_facts = _facts(merged)
    exact = [i for i, r in enumerate(rules) if _facts(r) == merged_facts and r.confidence == confidence]
    if exact:
        chosen = exact[0]
        reason = "; ".join(policies)
    else:
        overlap = [sum((Counter(_facts(r)) & Counter(merged_facts)).values()) for r in rules]
        chosen = overlap.index(max(overlap))
        reason = "; ".join(policies) + "; merged rule synthesized from variants"
    return merged, ConflictRecord(key=key, variants=tuple(variants), chosen=chosen, reason=reason)


def _group(candidates: Iterable[Tuple[str, VerifiableRule]]) -> Dict[str, List[Tuple[str, VerifiableRule]]]:
    groups: Dict[str, List[Tuple[str, VerifiableRule]]] = defaultdict(list)
    for label, rule in candidates:
        groups[canonical_rule_key(rule)].append((label, rule))
    return groups


def _dedupe_issues(rulesets: Sequence[RuleSet]) -> List[RequirementsSpecsIssue]:
    by_identity: Dict[Tuple, List[RequirementsSpecsIssue]] = defaultdict(list)
    for rs in rulesets:
        for issue in rs.issues:
            by_identity[issue.identity].append(issue)
    issues = []
    for n, identity in enumerate(sorted(by_identity), start=1):
        representative = min(by_identity[identity], key=lambda i: (i.rationale, i.source_requirements))
        issues.append(replace(
            representative,
            issue_id=f"I-{n:03d}",
            source_requirements=tuple(sorted(representative.source_requirements)),
        ))
    return issues


def find_near_misses(rules: Sequence[VerifiableRule]) -> List[NearMiss]:
    misses = []
    for a, b in combinations(rules, 2):
        key_a, key_b = canonical_rule_key(a), canonical_rule_key(b)
        if key_a == key_b or point_signature(a.points) != point_signature(b.points):
            continue
        if set(a.source_requirements) & set(b.source_requirements):
            misses.append(NearMiss((a.rule_id, b.rule_id), (key_a, key_b), point_signature(a.points)))
    return misses


def _pooled_meta(rulesets: Sequence[RuleSet]) -> PipelineRunMeta:
    metas = [rs.run_meta for rs in rulesets]
    return PipelineRunMeta(
        run_id="pooled",
        timestamp=min(m.timestamp for m in metas),
        backend=",".join(sorted({m.backend for m in metas})),
        temperature=max(m.temperature for m in metas),
        run_count=len(rulesets),
        model=",".join(sorted({m.model for m in metas})),
        template_hash=",".join(sorted({m.template_hash for m in metas})),
    )


def merge(rulesets: Sequence[RuleSet]) -> PooledRuleSet:
    """
    合并多次运行的规则集

    Args:
        rulesets: 至少一个 RuleSet

    Returns:
        PooledRuleSet，规则按规范键排序并编号为 R-001...

    Raises:
        PoolingError: 输入为空
    """
    if not rulesets:
        raise PoolingError("合并至少需要一个规则集")

    candidates = [
        (",".join(rule.provenance) or rs.run_meta.run_id, rule)
        for rs in rulesets for rule in rs.rules
    ]
    conflicts: List[ConflictRecord] = []
    pooled = []
    groups = _group(candidates)
    for key in sorted(groups):
        # 合并结果的规范键与组键相同，无需再分组
        rule, conflict = _reconcile(key, groups[key])
        pooled.append(rule)
        if conflict is not None:
            conflicts.append(conflict)

    ordered = sorted(pooled, key=canonical_rule_key)
    rules = [replace(rule, rule_id=f"R-{n:03d}") for n, rule in enumerate(ordered, start=1)]
    conflicts.sort(key=lambda c: (c.key, json.dumps(c.to_dict(), sort_keys=True)))

    pooled_set = PooledRuleSet(
        rules=tuple(rules),
        issues=tuple(_dedupe_issues(rulesets)),
        conflicts=tuple(conflicts),
        agreement=agreement_score(rulesets),
        run_meta=_pooled_meta(rulesets),
        near_misses=tuple(find_near_misses(rules)),
        diagnostics=tuple(sorted(f"{rs.run_meta.run_id}: {d}" for rs in rulesets for d in rs.diagnostics)),
    )
    logger.info(f"🧩 合并 {len(rulesets)} 次运行: {len(rules)} 条规则，{len(conflicts)} 个冲突，"
                f"一致度 {pooled_set.agreement:.3f}")
    return pooled_set
