"""
流水线异常定义
所有模块的异常都继承自 ReqAuditError，CLI 据此区分流水线错误与用法错误
"""
from typing import List


class ReqAuditError(Exception):
    """流水线错误基类"""


class DocumentParseError(ReqAuditError):
    """文档无法解析（语法错误，不是结构错误）"""


class DocumentSchemaError(ReqAuditError):
    """文档结构不符合 schema"""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "schema violation")


class ConfigError(ReqAuditError):
    """配置错误"""
