# 规则挖掘模块
from .errors import MiningError, MiningParseError
from .prompts import build_mining_prompt, MINING_TEMPLATE
from .parser import MiningResponse, parse_mining_response
from .sanitizer import sanitize, is_measurable
from .miner import RuleMiner, utc_timestamp

__all__ = [
    'MiningError', 'MiningParseError',
    'build_mining_prompt', 'MINING_TEMPLATE',
    'MiningResponse', 'parse_mining_response',
    'sanitize', 'is_measurable',
    'RuleMiner', 'utc_timestamp',
]
