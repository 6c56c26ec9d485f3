"""
挖掘阶段异常
"""
from core_model.errors import ReqAuditError


class MiningError(ReqAuditError):
    """挖掘失败（所有运行都失败、批次非法、运行次数越界）"""


class MiningParseError(MiningError):
    """模型回复中找不到结构化块"""
