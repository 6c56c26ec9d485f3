"""
挖掘提示词构建
"""
from typing import Optional, Sequence

from core_model.config import MiningConfig
from core_model.models import RequirementItem
from core_model.templates import PromptTemplate, load_template
from req_ingest.lexicon import VagueTermLexicon, load_lexicon

from .errors import MiningError

MINING_TEMPLATE = "mining_prompt.txt"


def build_mining_prompt(items: Sequence[RequirementItem], config: MiningConfig,
                        lexicon: Optional[VagueTermLexicon] = None,
                        template: Optional[PromptTemplate] = None) -> str:
    """
    构建挖掘提示词

    Args:
        items: 一批需求条目
        config: 挖掘配置（批大小、是否安全相关）
        lexicon: 模糊词词表
        template: 已加载的模板，默认加载 templates/mining_prompt.txt

    Raises:
        MiningError: 批为空或超过批大小
    """
    if not items:
        raise MiningError("挖掘批次为空")
    if len(items) > config.batch_size:
        raise MiningError(f"挖掘批次过大: {len(items)} > {config.batch_size}")
    lexicon = lexicon or load_lexicon()
    template = template or load_template(MINING_TEMPLATE)
    return template.render(
        items=list(items),
        security_relevant=config.security_relevant,
        vague_terms=sorted(lexicon.terms),
    )
