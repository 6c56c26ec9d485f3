"""
需求感知静态分析主程序
ruleMiner（需求 → 可验证规则）+ codeAuditor（规则 → 代码审计结论）两阶段流水线
"""
import asyncio
import argparse
import hashlib
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

# 添加模块路径
sys.path.insert(0, str(Path(__file__).parent))

from core_model import (
    AuditFinding, ConfigError, PipelineConfig, ReqAuditError, RequirementItem, RuleSet,
    TraceabilityMap, dump_document, load_config, read_document,
)
from core_model.templates import load_template
from code_auditor import AUDIT_TEMPLATE, AuditResult, CodeAuditor
from code_index import CodeBaseIndex, load_tracemap, scan, stale_trace_paths
from llm_backend import LLMBackend, create_backend
from metamorphic import MetamorphicHarness, MRReport, load_mutation
from pooling import PooledRuleSet, merge
from report import ReportSummary, render, render_mr_report, summarize
from req_ingest import ingest_requirements, load_lexicon
from rule_miner import MINING_TEMPLATE, RuleMiner, utc_timestamp

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
NEEDS_REQUIREMENTS = {'mine', 'report', 'run', 'mr'}


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


class RequirementAuditSystem:
    """需求-代码一致性检查系统主类"""

    def __init__(self, config: PipelineConfig, backend: Optional[LLMBackend] = None):
        self.config = config
        self._backend = backend
        self.timestamp = config.system.timestamp or utc_timestamp()
        self.lexicon = load_lexicon(self._path(config.paths.lexicon))
        template_dir = self._path(config.paths.templates)
        self.mining_template = load_template(MINING_TEMPLATE, template_dir)
        self.audit_template = load_template(AUDIT_TEMPLATE, template_dir)
        self._run_dir: Optional[Path] = None
        self._written: Dict[str, str] = {}

    def _path(self, value: Optional[str]) -> Optional[str]:
        resolved = self.config.resolve(value)
        return str(resolved) if resolved is not None else None

    @property
    def backend(self) -> LLMBackend:
        if self._backend is None:
            self._backend = create_backend(self.config)
        return self._backend

    @property
    def run_dir(self) -> Path:
        """<out>/run-<YYYYmmddTHHMMSSZ>/"""
        if self._run_dir is None:
            try:
                stamp = datetime.strptime(self.timestamp, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
            except ValueError as e:
                raise ConfigError(f"system.timestamp 必须形如 2024-01-01T00:00:00Z: {self.timestamp}") from e
            out = self.config.resolve(self.config.paths.output_dir)
            self._run_dir = out / f"run-{stamp.strftime('%Y%m%dT%H%M%SZ')}"
            self._run_dir.mkdir(parents=True, exist_ok=True)
        return self._run_dir

    def write_artifact(self, name: str, text: str) -> Path:
        path = self.run_dir / name
        path.write_text(text, encoding='utf-8')
        self._written[name] = _digest(text)
        logger.info(f"💾 写入 {path}")
        return path

    def write_manifest(self, run_meta) -> Path:
        """manifest.json 列出本次写入的每个产物的 SHA-256"""
        text = dump_document("manifest", {
            'artifacts': dict(sorted(self._written.items())),
            'run_meta': run_meta.to_dict(),
        })
        path = self.run_dir / "manifest.json"
        path.write_text(text, encoding='utf-8')
        return path

    # === 各阶段 ===

    def load_items(self, requirements: Optional[str] = None) -> List[RequirementItem]:
        path = requirements or self._path(self.config.paths.requirements)
        if path is None:
            raise ConfigError("未指定需求文档（--requirements 或 paths.requirements）")
        return ingest_requirements(path, self.lexicon).items

    def _miner(self) -> RuleMiner:
        return RuleMiner(
            self.backend,
            config=self.config.mining,
            model=self.config.llm.model,
            lexicon=self.lexicon,
            template=self.mining_template,
            timestamp=self.timestamp,
        )

    async def mine(self, items: Sequence[RequirementItem]) -> List[RuleSet]:
        rulesets = await self._miner().mine(items)
        for ruleset in rulesets:
            self.write_artifact(f"{ruleset.run_meta.run_id}.rules", dump_document("rules", ruleset.to_dict()))
        return rulesets

    def pool(self, rulesets: Sequence[RuleSet]) -> PooledRuleSet:
        pooled = merge(rulesets)
        self.write_artifact("pooled.rules", dump_document("pooled", pooled.to_dict()))
        return pooled

    def index(self, code_root: Optional[str] = None) -> CodeBaseIndex:
        root = code_root or self._path(self.config.paths.code_root)
        if root is None:
            raise ConfigError("未指定代码根目录（--code-root 或 paths.code_root）")
        index = scan(root, self.config.index)
        self.write_artifact("code.index", dump_document("index", index.to_dict()))
        return index

    def tracemap(self, tracemap: Optional[str] = None) -> TraceabilityMap:
        path = tracemap or self._path(self.config.paths.tracemap)
        if path is None:
            logger.warning("没有追溯映射，所有空上下文的规则都会标记为追溯缺口")
            return TraceabilityMap()
        return load_tracemap(path)

    async def audit(self, pooled: PooledRuleSet, index: CodeBaseIndex,
                    tracemap: TraceabilityMap) -> AuditResult:
        auditor = CodeAuditor(
            self.backend, index, tracemap,
            config=self.config.audit,
            index_config=self.config.index,
            model=self.config.llm.model,
            template=self.audit_template,
        )
        result = await auditor.audit(pooled.rules, pooled.run_meta)
        self.write_artifact("audit.findings", dump_document("findings", result.to_dict()))
        return result

    def report(self, items: Sequence[RequirementItem], pooled: PooledRuleSet,
               findings: Sequence[AuditFinding], stale: Sequence[str]) -> ReportSummary:
        summary = summarize(items, pooled, findings, stale)
        self.write_artifact("summary.report", render(summary, pooled.rules, pooled.issues, findings, "structured"))
        self.write_artifact("report.txt", render(summary, pooled.rules, pooled.issues, findings, "human"))
        return summary

    def report_mr(self, report: MRReport):
        self.write_artifact("metamorphic.report", render_mr_report(report, "structured"))
        self.write_artifact("metamorphic.txt", render_mr_report(report, "human"))

    async def run(self, requirements: Optional[str] = None, code_root: Optional[str] = None,
                  tracemap: Optional[str] = None) -> Tuple[ReportSummary, Path]:
        """完整流水线：挖掘 → 合并 → 索引 → 审计 → 报告"""
        logger.info("🚀 启动需求-代码一致性检查...")
        items = self.load_items(requirements)
        rulesets = await self.mine(items)
        pooled = self.pool(rulesets)
        index = self.index(code_root)
        trace = self.tracemap(tracemap)
        stale = stale_trace_paths(trace, index)
        for path in stale:
            logger.warning(f"追溯映射路径不存在于代码库: {path}")
        result = await self.audit(pooled, index, trace)
        summary = self.report(items, pooled, result.findings, stale)
        self.write_manifest(pooled.run_meta)
        logger.info(f"✅ 完成: {summary.rules_total} 条规则，{summary.issues_found} 条需求问题，"
                    f"Fail/Unknown {summary.fail_unknown_total}")
        return summary, self.run_dir

    async def close(self):
        if self._backend is not None:
            await self._backend.close()


# === 命令行 ===

def _abs(value: Optional[str]) -> Optional[str]:
    return str(Path(value).resolve()) if value else None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', help='配置文件路径（YAML）')
    common.add_argument('--backend', choices=['live', 'scripted', 'replay-record', 'replay-strict'],
                        help='LLM 后端')
    common.add_argument('--cache', help='回放缓存路径（JSONL）')
    common.add_argument('--out', help='输出目录')
    common.add_argument('--runs', type=int, help='挖掘运行次数')

    parser = argparse.ArgumentParser(description='需求感知静态分析：需求 → 可验证规则 → 代码审计')
    sub = parser.add_subparsers(dest='command', required=True)

    mine = sub.add_parser('mine', parents=[common], help='需求 → 每次运行的规则与需求问题')
    mine.add_argument('--requirements', '-r', help='需求文档')

    pool = sub.add_parser('pool', parents=[common], help='合并多次运行的规则')
    pool.add_argument('rules', nargs='+', help='run-<n>.rules 文件')

    index = sub.add_parser('index', parents=[common], help='索引代码库')
    index.add_argument('--code-root', help='代码根目录')

    audit = sub.add_parser('audit', parents=[common], help='审计合并后的规则')
    audit.add_argument('--pooled', required=True, help='pooled.rules 文件')
    audit.add_argument('--code-root', help='代码根目录')
    audit.add_argument('--tracemap', help='追溯映射（TSV）')

    report = sub.add_parser('report', parents=[common], help='根据产物生成报告')
    report.add_argument('--requirements', '-r', help='需求文档')
    report.add_argument('--pooled', required=True, help='pooled.rules 文件')
    report.add_argument('--findings', required=True, help='audit.findings 文件')
    report.add_argument('--code-root', help='代码根目录（用于检查失效追溯路径）')
    report.add_argument('--tracemap', help='追溯映射（TSV）')

    run = sub.add_parser('run', parents=[common], help='完整流水线')
    run.add_argument('--requirements', '-r', help='需求文档')
    run.add_argument('--code-root', help='代码根目录')
    run.add_argument('--tracemap', help='追溯映射（TSV）')
    run.add_argument('--fail-on-findings', action='store_true', help='存在 Fail/Unknown 结论时退出码为 1')

    mr = sub.add_parser('mr', help='蜕变关系检查')
    mr_sub = mr.add_subparsers(dest='relation', required=True)
    mr1 = mr_sub.add_parser('mr1', parents=[common], help='重复运行一致性')
    mr1.add_argument('--requirements', '-r', help='需求文档')
    mr1.add_argument('-n', type=int, default=2, help='运行次数（≥2）')
    para = mr_sub.add_parser('paraphrase', parents=[common], help='改写等价')
    para.add_argument('--requirements', '-r', help='原始需求文档')
    para.add_argument('--variants', nargs='+', required=True, help='改写后的需求文档')
    adddel = mr_sub.add_parser('adddelete', parents=[common], help='增删敏感性')
    adddel.add_argument('--requirements', '-r', help='需求文档')
    adddel.add_argument('--mutation', required=True, help='变更描述（YAML）')
    return parser


def _configure(args) -> PipelineConfig:
    config = load_config(args.config)
    return config.with_overrides({
        'llm': {'backend': args.backend},
        'paths': {'cache': _abs(args.cache), 'output_dir': _abs(args.out)},
        'mining': {'run_count': args.runs},
    })


def _read(path: str, kind: str) -> Dict:
    return read_document(Path(path).read_text(encoding='utf-8'), kind)


async def dispatch(args, system: RequirementAuditSystem) -> int:
    command = args.command
    if command == 'mine':
        await system.mine(system.load_items(_abs(args.requirements)))
    elif command == 'pool':
        rulesets = [RuleSet.from_dict(_read(p, 'rules')) for p in args.rules]
        pooled = system.pool(rulesets)
        system.write_manifest(pooled.run_meta)
    elif command == 'index':
        system.index(_abs(args.code_root))
    elif command == 'audit':
        pooled = PooledRuleSet.from_dict(_read(args.pooled, 'pooled'))
        index = system.index(_abs(args.code_root))
        await system.audit(pooled, index, system.tracemap(_abs(args.tracemap)))
        system.write_manifest(pooled.run_meta)
    elif command == 'report':
        items = system.load_items(_abs(args.requirements))
        pooled = PooledRuleSet.from_dict(_read(args.pooled, 'pooled'))
        findings = [AuditFinding.from_dict(f) for f in _read(args.findings, 'findings')['findings']]
        stale: List[str] = []
        if args.code_root and (args.tracemap or system.config.paths.tracemap):
            index = scan(_abs(args.code_root), system.config.index)
            stale = stale_trace_paths(system.tracemap(_abs(args.tracemap)), index)
        system.report(items, pooled, findings, stale)
        system.write_manifest(pooled.run_meta)
    elif command == 'run':
        summary, _ = await system.run(_abs(args.requirements), _abs(args.code_root), _abs(args.tracemap))
        if args.fail_on_findings and summary.fail_unknown_total > 0:
            logger.warning(f"存在 {summary.fail_unknown_total} 条 Fail/Unknown 结论")
            return 1
    elif command == 'mr':
        harness = MetamorphicHarness(system._miner())
        items = system.load_items(_abs(args.requirements))
        if args.relation == 'mr1':
            report = await harness.run_mr1(items, args.n)
        elif args.relation == 'paraphrase':
            doc_id = items[0].id.rsplit('-', 1)[0] if items else None
            variants = [ingest_requirements(v, system.lexicon, doc_id=doc_id).items for v in args.variants]
            report = await harness.run_paraphrase_mr(items, variants)
        else:
            report = await harness.run_add_delete_mr(items, load_mutation(args.mutation))
        system.report_mr(report)
    return 0


async def run_cli(argv: Optional[Sequence[str]] = None,
                  backend: Optional[LLMBackend] = None) -> int:
    """
    命令行入口

    Returns:
        0 成功；1 流水线错误（或 --fail-on-findings 且有 Fail/Unknown）；2 用法错误
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    system = None
    try:
        config = _configure(args)
        logging.basicConfig(level=config.system.log_level, format=LOG_FORMAT)
        if args.command in NEEDS_REQUIREMENTS and not (args.requirements or config.paths.requirements):
            parser.print_usage(sys.stderr)
            print(f"{parser.prog} {args.command}: 需要 --requirements 或配置 paths.requirements", file=sys.stderr)
            return 2
        system = RequirementAuditSystem(config, backend=backend)
        return await dispatch(args, system)
    except (ReqAuditError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return 1
    finally:
        if system is not None:
            await system.close()


def main(argv: Optional[Sequence[str]] = None) -> int:
    return asyncio.run(run_cli(argv))


if __name__ == "__main__":
    sys.exit(main())
