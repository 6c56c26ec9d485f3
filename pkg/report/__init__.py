# 报告模块
from .summary import ReportError, ReportSummary, summarize
from .render import FORMATS, render, render_mr_report

__all__ = ['ReportError', 'ReportSummary', 'summarize', 'FORMATS', 'render', 'render_mr_report']
