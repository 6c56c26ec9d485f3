# 多次运行结果合并模块
from .merger import (
    PoolingError, ConflictRecord, NearMiss, PooledRuleSet,
    merge, agreement_score, jaccard, find_near_misses,
)

__all__ = [
    'PoolingError', 'ConflictRecord', 'NearMiss', 'PooledRuleSet',
    'merge', 'agreement_score', 'jaccard', 'find_near_misses',
]
