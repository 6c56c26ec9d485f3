"""
黄金语料
读取 data/ 下的合成需求文档、代码树、追溯映射与脚本夹具，并按 manifest.yaml 校验摘要
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from core_model.errors import ReqAuditError
from core_model.models import (
    IssueKind, RequirementItem, RuleConfidence, TraceabilityMap, Verdict, normalize_text,
)
from code_index.context import load_tracemap
from llm_backend.scripted import ScriptedBackend
from req_ingest.document import RequirementsDocument, ingest_requirements

logger = logging.getLogger(__name__)

CORPUS_DIR = Path(__file__).resolve().parent / "data"
MANIFEST_NAME = "manifest.yaml"
DISPOSITIONS = ("rule", "issue", "drop")


class CorpusError(ReqAuditError):
    """语料损坏或 manifest 不完整"""


@dataclass(frozen=True)
class PlantedIssue:
    requirement: str
    kind: IssueKind


@dataclass(frozen=True)
class PlantedDefect:
    """预埋的代码问题及期望结论"""
    statement: str
    verdict: Verdict
    confidence: RuleConfidence
    rule_confidence: RuleConfidence
    traceability_gap: bool = False


@dataclass
class CorpusManifest:
    """语料期望"""
    requirement_count: int
    dispositions: Dict[str, Tuple[str, ...]]
    planted_issues: List[PlantedIssue]
    planted_defects: List[PlantedDefect]
    summary: Dict
    digests: Dict[str, str] = field(default_factory=dict)

    def defect_for(self, statement: str) -> Optional[PlantedDefect]:
        wanted = normalize_text(statement)
        for defect in self.planted_defects:
            if normalize_text(defect.statement) == wanted:
                return defect
        return None

    def expected(self, disposition: str) -> List[str]:
        """具有某种去向的需求编号"""
        return sorted(i for i, d in self.dispositions.items() if disposition in d)

    def check_exhaustive(self, items: Sequence[RequirementItem]):
        """
        每个语料条目都必须有去向

        Raises:
            CorpusError: 条目数不符、缺少去向或去向非法
        """
        if len(items) != self.requirement_count:
            raise CorpusError(f"语料应有 {self.requirement_count} 条需求，实际 {len(items)} 条")
        ids = {item.id for item in items}
        missing = sorted(ids - set(self.dispositions))
        extra = sorted(set(self.dispositions) - ids)
        if missing or extra:
            raise CorpusError(f"manifest 去向不完整: 缺少 {missing}，多余 {extra}")
        for req_id, disposition in self.dispositions.items():
            if not disposition or any(d not in DISPOSITIONS for d in disposition):
                raise CorpusError(f"{req_id} 的去向非法: {list(disposition)}")
            if "drop" in disposition and len(disposition) > 1:
                raise CorpusError(f"{req_id} 不能既丢弃又产出规则或问题")

    @classmethod
    def from_dict(cls, data: Mapping) -> "CorpusManifest":
        try:
            return cls(
                requirement_count=int(data['requirement_count']),
                dispositions={k: tuple(v) for k, v in data['dispositions'].items()},
                planted_issues=[
                    PlantedIssue(p['requirement'], IssueKind(p['kind'])) for p in data['planted_issues']
                ],
                planted_defects=[
                    PlantedDefect(
                        statement=d['statement'],
                        verdict=Verdict(d['verdict']),
                        confidence=RuleConfidence(d['confidence']),
                        rule_confidence=RuleConfidence(d['rule_confidence']),
                        traceability_gap=bool(d.get('traceability_gap', False)),
                    )
                    for d in data['planted_defects']
                ],
                summary=dict(data['summary']),
                digests=dict(data.get('digests') or {}),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise CorpusError(f"manifest 格式错误: {e}") from e


@dataclass
class GoldenCorpus:
    """已校验的语料"""
    root: Path
    document: RequirementsDocument
    code_root: Path
    tracemap: TraceabilityMap
    fixtures: Path
    mutation: Path
    config_path: Path
    manifest: CorpusManifest

    @property
    def items(self) -> List[RequirementItem]:
        return self.document.items

    def backend(self) -> ScriptedBackend:
        """新建脚本后端；脚本条目有使用次数，每次运行都要新建"""
        return ScriptedBackend.from_file(str(self.fixtures))


def load_manifest(path: Path) -> CorpusManifest:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding='utf-8'))
    except FileNotFoundError as e:
        raise CorpusError(f"语料 manifest 不存在: {path}") from e
    except yaml.YAMLError as e:
        raise CorpusError(f"语料 manifest 不是合法 YAML: {e}") from e
    if not isinstance(data, dict):
        raise CorpusError("语料 manifest 顶层必须是映射")
    return CorpusManifest.from_dict(data)


def verify_digests(root: Path, manifest: CorpusManifest):
    """逐个比对 SHA-256；文件缺失或摘要不符都视为语料损坏"""
    if not manifest.digests:
        raise CorpusError("语料 manifest 没有摘要")
    bad = []
    for name, expected in sorted(manifest.digests.items()):
        path = root / name
        try:
            actual = hashlib.sha256(path.read_bytes()).hexdigest()
        except OSError:
            bad.append(f"{name} (缺失)")
            continue
        if actual != expected:
            bad.append(name)
    if bad:
        raise CorpusError(f"语料文件与 manifest 摘要不符: {', '.join(bad)}")


def load_corpus(root: Optional[str] = None) -> GoldenCorpus:
    """
    加载黄金语料

    Args:
        root: 语料目录，默认为包内 data/

    Returns:
        GoldenCorpus

    Raises:
        CorpusError: 摘要不符或 manifest 不完整
    """
    base = Path(root) if root else CORPUS_DIR
    manifest = load_manifest(base / MANIFEST_NAME)
    verify_digests(base, manifest)

    document = ingest_requirements(str(base / "wifi.md"))
    manifest.check_exhaustive(document.items)
    corpus = GoldenCorpus(
        root=base,
        document=document,
        code_root=base / "code",
        tracemap=load_tracemap(str(base / "tracemap.tsv")),
        fixtures=base / "fixtures.yaml",
        mutation=base / "mutation.yaml",
        config_path=base / "corpus_config.yaml",
        manifest=manifest,
    )
    logger.info(f"🏅 已加载黄金语料: {len(document.items)} 条需求，{len(manifest.planted_defects)} 个预埋结论")
    return corpus
