"""
规则挖掘器
分批调用后端、解析、净化，每次运行产出一个 RuleSet
"""
import asyncio
import logging
from dataclasses import replace
from datetime import datetime, timezone
from typing import List, Optional, Sequence, Tuple

from core_model.config import MiningConfig
from core_model.models import PipelineRunMeta, RequirementItem, RuleSet
from core_model.templates import PromptTemplate, load_template
from llm_backend.base import BackendError, BackendRequest, LLMBackend, ReplayMissError
from req_ingest.lexicon import VagueTermLexicon, load_lexicon

from .errors import MiningError, MiningParseError
from .parser import MiningResponse, parse_mining_response
from .prompts import MINING_TEMPLATE, build_mining_prompt
from .sanitizer import sanitize

logger = logging.getLogger(__name__)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class RuleMiner:
    """ruleMiner 智能体"""

    def __init__(self, backend: LLMBackend, config: Optional[MiningConfig] = None, model: str = "",
                 lexicon: Optional[VagueTermLexicon] = None,
                 template: Optional[PromptTemplate] = None,
                 timestamp: Optional[str] = None):
        self.backend = backend
        self.config = config or MiningConfig()
        self.model = model
        self.lexicon = lexicon or load_lexicon()
        self.template = template or load_template(MINING_TEMPLATE)
        self.timestamp = timestamp

    def _batches(self, items: Sequence[RequirementItem]) -> List[List[RequirementItem]]:
        size = self.config.batch_size
        return [list(items[i:i + size]) for i in range(0, len(items), size)]

    async def _mine_batch(self, batch: List[RequirementItem], batch_index: int,
                          run_id: str) -> Tuple[MiningResponse, list, list]:
        prompt = build_mining_prompt(batch, self.config, self.lexicon, self.template)
        request = BackendRequest(
            model=self.model,
            prompt=prompt,
            temperature=self.config.temperature,
            max_output_tokens=self.config.max_output_tokens,
        )
        prefix = f"{run_id}-B{batch_index + 1}-"
        for attempt in (1, 2):
            response = await self.backend.send(request)
            try:
                parsed = parse_mining_response(response.text, batch, id_prefix=prefix)
                break
            except MiningParseError as e:
                if attempt == 2:
                    raise
                logger.warning(f"{run_id} 第 {batch_index + 1} 批回复无法解析，重试一次: {e}")
        rules, issues = sanitize(parsed.rules, parsed.issues, batch,
                                 security_relevant=self.config.security_relevant, lexicon=self.lexicon)
        return parsed, rules, issues

    async def mine_run(self, items: Sequence[RequirementItem], run_index: int,
                       run_count: int = 1) -> RuleSet:
        """
        执行一次挖掘运行

        Args:
            items: 全部需求条目
            run_index: 运行序号（从1开始），run_id 为 run-<n>
            run_count: 本次共运行几次，写入 run_meta

        Raises:
            MiningError / BackendError: 任一批次最终失败
        """
        run_id = f"run-{run_index}"
        batches = self._batches(items)
        tasks = [asyncio.ensure_future(self._mine_batch(batch, index, run_id))
                 for index, batch in enumerate(batches)]
        try:
            results = await asyncio.gather(*tasks)
        except BaseException:
            # 一批失败即整次运行失败，其余批次不再消耗后端调用
            for task in tasks:
                task.cancel()
            await asyncio.gather(*tasks, return_exceptions=True)
            raise

        rules, issues, diagnostics = [], [], []
        for index, (parsed, batch_rules, batch_issues) in enumerate(results):
            rules.extend(batch_rules)
            issues.extend(batch_issues)
            diagnostics.extend(f"batch {index + 1}: {note}" for note in parsed.diagnostics)

        rules = [
            replace(rule, rule_id=f"{run_id}-R{n:03d}", provenance=(run_id,))
            for n, rule in enumerate(rules, start=1)
        ]
        issues = [replace(issue, issue_id=f"{run_id}-I{n:03d}") for n, issue in enumerate(issues, start=1)]

        meta = PipelineRunMeta(
            run_id=run_id,
            timestamp=self.timestamp or utc_timestamp(),
            backend=self.backend.identifier,
            temperature=float(self.config.temperature),
            run_count=run_count,
            model=self.model,
            template_hash=self.template.source_hash,
        )
        logger.info(f"⛏️ {run_id}: {len(batches)} 批，{len(rules)} 条规则，{len(issues)} 条需求问题")
        return RuleSet(rules=tuple(rules), issues=tuple(issues), run_meta=meta, diagnostics=tuple(diagnostics))

    async def mine(self, items: Sequence[RequirementItem], run_count: Optional[int] = None) -> List[RuleSet]:
        """
        执行 run_count 次独立挖掘

        失败的运行记录日志后跳过；至少一次成功才返回。

        Raises:
            MiningError: run_count 越界或所有运行都失败
        """
        run_count = self.config.run_count if run_count is None else run_count
        if not 1 <= run_count <= self.config.max_runs:
            raise MiningError(f"run_count 必须在 1..{self.config.max_runs} 之间: {run_count}")

        logger.info(f"🚀 开始挖掘: {len(items)} 条需求，{run_count} 次运行")
        rulesets = []
        for run_index in range(1, run_count + 1):
            try:
                rulesets.append(await self.mine_run(items, run_index, run_count))
            except ReplayMissError:
                raise
            except (MiningError, BackendError) as e:
                logger.error(f"run-{run_index} 失败: {e}")
        if not rulesets:
            raise MiningError("所有挖掘运行都失败")
        return rulesets
