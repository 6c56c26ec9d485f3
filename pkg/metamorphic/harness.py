"""
蜕变测试工具
MR1（重复运行一致）、MR-Paraphrase（改写等价）、MR-AddDelete（增删语句的可追踪变化）

检查函数只依赖产出的规则集，对保存下来的规则集重新检查得到相同报告。
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import yaml

from core_model.errors import ReqAuditError
from core_model.models import (
    LineSpan, NormativeStrength, RequirementItem, RuleSet, SourceRef, VerifiableRule,
    canonical_rule_key,
)
from pooling.merger import agreement_score, jaccard, merge
from req_ingest.document import classify_strength
from req_ingest.lexicon import VagueTermLexicon, detect_vague_terms, load_lexicon, unique_terms
from rule_miner.miner import RuleMiner

logger = logging.getLogger(__name__)

MR1 = "MR1"
MR_PARAPHRASE = "MR-Paraphrase"
MR_ADD_DELETE = "MR-AddDelete"
MUTATION_SOURCE = "<mutation>"


class MetamorphicError(ReqAuditError):
    """蜕变关系前置条件不满足"""


@dataclass(frozen=True)
class Addition:
    position: int
    text: str


@dataclass(frozen=True)
class MutationSpec:
    """增删描述：additions 按原列表下标插入，deletions 为需求编号"""
    additions: Tuple[Addition, ...] = ()
    deletions: Tuple[str, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.additions and not self.deletions

    def validate(self, items: Sequence[RequirementItem]):
        """
        Raises:
            MetamorphicError: 删除了不存在的条目、插入位置越界或新增文本为空
        """
        known = {item.id for item in items}
        missing = sorted(set(self.deletions) - known)
        if missing:
            raise MetamorphicError(f"删除的需求不存在: {', '.join(missing)}")
        for addition in self.additions:
            if not addition.text.strip():
                raise MetamorphicError("新增语句为空")
            if not 0 <= addition.position <= len(items):
                raise MetamorphicError(f"新增位置越界: {addition.position}（共 {len(items)} 条）")

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "MutationSpec":
        data = data or {}
        unknown = set(data) - {'additions', 'deletions'}
        if unknown:
            raise MetamorphicError(f"变更描述包含未知字段: {', '.join(sorted(unknown))}")
        try:
            additions = tuple(Addition(int(a['position']), str(a['text'])) for a in data.get('additions') or [])
        except (KeyError, TypeError, ValueError) as e:
            raise MetamorphicError(f"additions 格式错误: {e}") from e
        return cls(additions=additions, deletions=tuple(str(d) for d in data.get('deletions') or []))


def load_mutation(path: str) -> MutationSpec:
    """读取 YAML 变更描述 {additions: [{position, text}], deletions: [ids]}"""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding='utf-8'))
    except yaml.YAMLError as e:
        raise MetamorphicError(f"变更描述 {path} 不是合法 YAML: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise MetamorphicError(f"变更描述 {path} 顶层必须是映射")
    return MutationSpec.from_dict(data)


def _doc_prefix(items: Sequence[RequirementItem]) -> str:
    return items[0].id.rsplit('-', 1)[0] if items else "DOC"


def apply_mutation(items: Sequence[RequirementItem], mutation: MutationSpec,
                   lexicon: Optional[VagueTermLexicon] = None
                   ) -> Tuple[List[RequirementItem], List[str]]:
    """
    应用增删

    Returns:
        (变更后的条目, 新增条目编号)；新增编号形如 WIFI-ADD001，来源路径为 <mutation>
    """
    mutation.validate(items)
    lexicon = lexicon or load_lexicon()
    prefix = _doc_prefix(items)
    inserts: Dict[int, List[RequirementItem]] = {}
    added_ids = []
    for n, addition in enumerate(sorted(mutation.additions, key=lambda a: a.position), start=1):
        text = addition.text.strip()
        item = RequirementItem(
            id=f"{prefix}-ADD{n:03d}",
            text=text,
            source=SourceRef(MUTATION_SOURCE, LineSpan(n, n)),
            strength=classify_strength(text),
            vague_terms=unique_terms(detect_vague_terms(text, lexicon)),
        )
        inserts.setdefault(addition.position, []).append(item)
        added_ids.append(item.id)

    deleted = set(mutation.deletions)
    mutated: List[RequirementItem] = []
    for index in range(len(items) + 1):
        mutated.extend(inserts.get(index, []))
        if index < len(items) and items[index].id not in deleted:
            mutated.append(items[index])
    return mutated, added_ids


@dataclass(frozen=True)
class MRViolation:
    description: str
    keys: Tuple[str, ...] = ()
    requirement_ids: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {'description': self.description, 'keys': list(self.keys), 'requirement_ids': list(self.requirement_ids)}


@dataclass
class MRReport:
    """蜕变关系检查报告；violations 为空即满足"""
    relation: str
    runs_compared: List[str]
    agreement: float
    violations: List[MRViolation] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    pairwise: List[Tuple[str, float]] = field(default_factory=list)
    merged_rules: List[VerifiableRule] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict:
        return {
            'relation': self.relation,
            'runs_compared': list(self.runs_compared),
            'agreement': float(self.agreement),
            'satisfied': self.satisfied,
            'violations': [v.to_dict() for v in self.violations],
            'notes': list(self.notes),
            'pairwise': [{'label': label, 'agreement': float(score)} for label, score in self.pairwise],
            'merged_rules': [r.to_dict() for r in self.merged_rules],
        }


def _rules_by_key(rules: Iterable[VerifiableRule]) -> Dict[str, List[VerifiableRule]]:
    by_key: Dict[str, List[VerifiableRule]] = {}
    for rule in rules:
        by_key.setdefault(canonical_rule_key(rule), []).append(rule)
    return by_key


def _sources(rules: Iterable[VerifiableRule]) -> Tuple[str, ...]:
    return tuple(sorted({s for r in rules for s in r.source_requirements}))


# === 纯检查函数 ===

def check_mr1(rulesets: Sequence[RuleSet]) -> MRReport:
    """重复运行一致性：不在所有运行中出现的键都是违例"""
    if len(rulesets) < 2:
        raise MetamorphicError("MR1 至少需要两次运行")
    labels = [rs.run_meta.run_id for rs in rulesets]
    key_sets = [rs.keys() for rs in rulesets]
    by_key = _rules_by_key(r for rs in rulesets for r in rs.rules)

    violations = []
    for key in sorted(set().union(*key_sets)):
        absent = [label for label, keys in zip(labels, key_sets) if key not in keys]
        if absent:
            violations.append(MRViolation(
                description=f"rule key missing from {', '.join(absent)}",
                keys=(key,),
                requirement_ids=_sources(by_key[key]),
            ))
    pairwise = [
        (f"{labels[i]}~{labels[j]}", jaccard(key_sets[i], key_sets[j]))
        for i, j in combinations(range(len(rulesets)), 2)
    ]
    return MRReport(
        relation=MR1,
        runs_compared=labels,
        agreement=agreement_score(rulesets),
        violations=violations,
        pairwise=pairwise,
        merged_rules=list(merge(rulesets).rules),
    )


def check_paraphrase(original: RuleSet, variants: Sequence[RuleSet]) -> MRReport:
    """改写等价：每个改写版本与原文的键集合比较，差异键成对列出供人工核对"""
    if not variants:
        raise MetamorphicError("MR-Paraphrase 至少需要一个改写版本")
    base_keys = original.keys()
    pairwise, violations = [], []
    for k, variant in enumerate(variants, start=1):
        label = f"original~variant-{k}"
        keys = variant.keys()
        pairwise.append((label, jaccard(base_keys, keys)))
        only_original = sorted(base_keys - keys)
        only_variant = sorted(keys - base_keys)
        if only_original or only_variant:
            by_key = _rules_by_key(list(original.rules) + list(variant.rules))
            differing = only_original + only_variant
            violations.append(MRViolation(
                description=(f"variant-{k}: {len(only_original)} key(s) only in original, "
                             f"{len(only_variant)} key(s) only in variant"),
                keys=tuple(differing),
                requirement_ids=_sources(r for key in differing for r in by_key[key]),
            ))
    return MRReport(
        relation=MR_PARAPHRASE,
        runs_compared=["original"] + [f"variant-{k}" for k in range(1, len(variants) + 1)],
        agreement=sum(score for _, score in pairwise) / len(pairwise),
        violations=violations,
        pairwise=pairwise,
        merged_rules=list(merge([original, *variants]).rules),
    )


def check_add_delete(baseline: RuleSet, mutated: RuleSet, mutation: MutationSpec,
                     mutated_items: Sequence[RequirementItem], added_ids: Sequence[str]) -> MRReport:
    """
    增删敏感性

    (a) 来源全部被删除的基线规则不得出现在变更后的结果中
    (b) 新增的规范性语句至少产生一条规则或一条问题
    (c) 只来自未改动语句的规则应当保留，丢失只记为不稳定提示
    """
    deleted = set(mutation.deletions)
    added = set(added_ids)
    mutated_keys = mutated.keys()
    violations: List[MRViolation] = []
    notes: List[str] = []

    for rule in baseline.rules:
        sources = set(rule.source_requirements)
        key = canonical_rule_key(rule)
        if sources and sources <= deleted:
            if key in mutated_keys:
                violations.append(MRViolation(
                    description="rule sourced only from deleted statements is still produced",
                    keys=(key,),
                    requirement_ids=tuple(sorted(sources)),
                ))
        elif sources & deleted:
            notes.append(f"partially deleted sources {', '.join(sorted(sources & deleted))} behind {key}")
        elif key not in mutated_keys:
            notes.append(f"instability: rule from untouched statements not reproduced: {key}")

    strengths = {item.id: item.strength for item in mutated_items}
    produced = {s for r in mutated.rules for s in r.source_requirements}
    produced |= {s for i in mutated.issues for s in i.source_requirements}
    for item_id in added_ids:
        if strengths.get(item_id) not in (NormativeStrength.SHALL, NormativeStrength.SHOULD):
            notes.append(f"added statement {item_id} is not normative; not checked")
            continue
        if item_id not in produced:
            violations.append(MRViolation(
                description="added normative statement yielded no rule or issue",
                requirement_ids=(item_id,),
            ))

    def untouched(rules: Iterable[VerifiableRule]) -> Set[str]:
        return {canonical_rule_key(r) for r in rules
                if not (set(r.source_requirements) & (deleted | added))}

    agreement = jaccard(untouched(baseline.rules), untouched(mutated.rules))
    return MRReport(
        relation=MR_ADD_DELETE,
        runs_compared=["baseline", "mutated"],
        agreement=agreement,
        violations=violations,
        notes=notes,
        pairwise=[("baseline~mutated", agreement)],
    )


class MetamorphicHarness:
    """在挖掘阶段上执行蜕变关系"""

    def __init__(self, miner: RuleMiner):
        self.miner = miner

    async def run_mr1(self, items: Sequence[RequirementItem], n: int = 2) -> MRReport:
        """
        同一输入挖掘 n 次并比较

        Raises:
            MetamorphicError: n < 2
        """
        if n < 2:
            raise MetamorphicError("MR1 至少需要两次运行")
        rulesets = [await self.miner.mine_run(items, i, n) for i in range(1, n + 1)]
        report = check_mr1(rulesets)
        logger.info(f"🔁 MR1: {n} 次运行，一致度 {report.agreement:.3f}，违例 {len(report.violations)}")
        return report

    async def run_paraphrase_mr(self, original: Sequence[RequirementItem],
                                variants: Sequence[Sequence[RequirementItem]]) -> MRReport:
        if not variants:
            raise MetamorphicError("MR-Paraphrase 至少需要一个改写版本")
        total = len(variants) + 1
        base = await self.miner.mine_run(original, 1, total)
        mined = [await self.miner.mine_run(v, k, total) for k, v in enumerate(variants, start=2)]
        report = check_paraphrase(base, mined)
        logger.info(f"🔁 MR-Paraphrase: {len(variants)} 个改写版本，一致度 {report.agreement:.3f}")
        return report

    async def run_add_delete_mr(self, items: Sequence[RequirementItem], mutation: MutationSpec) -> MRReport:
        mutated_items, added_ids = apply_mutation(items, mutation, self.miner.lexicon)
        baseline = await self.miner.mine_run(items, 1, 2)
        mutated = await self.miner.mine_run(mutated_items, 2, 2)
        report = check_add_delete(baseline, mutated, mutation, mutated_items, added_ids)
        logger.info(f"🔁 MR-AddDelete: 删除 {len(mutation.deletions)} 条，新增 {len(added_ids)} 条，"
                    f"违例 {len(report.violations)}")
        return report
