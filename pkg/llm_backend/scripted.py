"""
脚本后端（测试夹具）
按提示词子串或调用序号返回预先写好的回复
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from core_model.errors import ConfigError

from .base import DEFAULT_MAX_PARALLEL, BackendRequest, BackendResponse, LLMBackend, ScriptExhaustedError

logger = logging.getLogger(__name__)


def _as_tuple(value: Union[None, str, Sequence[str]]) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    return tuple(value)


@dataclass
class ScriptEntry:
    """
    一条预设回复

    contains 中的子串必须全部出现，excludes 中的子串都不能出现；
    position 限定为第几次调用（从0开始）；times 为可用次数，None 表示不限。
    """
    text: str
    contains: Tuple[str, ...] = ()
    excludes: Tuple[str, ...] = ()
    position: Optional[int] = None
    times: Optional[int] = 1
    used: int = 0

    @property
    def available(self) -> bool:
        return self.times is None or self.used < self.times

    def matches(self, prompt: str, call_index: int) -> bool:
        if self.position is not None and self.position != call_index:
            return False
        if any(s not in prompt for s in self.contains):
            return False
        return not any(s in prompt for s in self.excludes)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScriptEntry":
        unknown = set(data) - {'text', 'contains', 'excludes', 'position', 'times'}
        if unknown or 'text' not in data:
            raise ConfigError(f"脚本条目格式错误: 未知字段 {sorted(unknown)} 或缺少 text")
        return cls(
            text=str(data['text']),
            contains=_as_tuple(data.get('contains')),
            excludes=_as_tuple(data.get('excludes')),
            position=data.get('position'),
            times=data.get('times', 1),
        )


class ScriptedBackend(LLMBackend):
    """按脚本回复的后端"""

    identifier = "scripted"

    def __init__(self, entries: List[ScriptEntry], max_parallel: int = DEFAULT_MAX_PARALLEL):
        super().__init__(max_parallel)
        self.entries = list(entries)
        self.prompts: List[str] = []

    @classmethod
    def from_dict(cls, data: Union[Mapping, Sequence], max_parallel: int = DEFAULT_MAX_PARALLEL) -> "ScriptedBackend":
        """接受 {'responses': [...]} 或直接的条目列表"""
        raw = data.get('responses', []) if isinstance(data, Mapping) else data
        return cls([ScriptEntry.from_dict(e) for e in raw], max_parallel=max_parallel)

    @classmethod
    def from_file(cls, path: str, max_parallel: int = DEFAULT_MAX_PARALLEL) -> "ScriptedBackend":
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"脚本夹具不存在: {path}") from e
        backend = cls.from_dict(data, max_parallel=max_parallel)
        logger.info(f"🧪 已加载脚本夹具 {Path(path).name}，共 {len(backend.entries)} 条")
        return backend

    @classmethod
    def queued(cls, texts: Sequence[str], max_parallel: int = DEFAULT_MAX_PARALLEL) -> "ScriptedBackend":
        """按顺序各用一次的回复队列"""
        return cls([ScriptEntry(text=t) for t in texts], max_parallel=max_parallel)

    async def _send(self, request: BackendRequest) -> BackendResponse:
        call_index = self.calls
        self.calls += 1
        self.prompts.append(request.prompt)
        for entry in self.entries:
            if entry.available and entry.matches(request.prompt, call_index):
                entry.used += 1
                return BackendResponse(text=entry.text)
        raise ScriptExhaustedError(f"第 {call_index} 次调用没有匹配的脚本回复: {request.prompt[:80]!r}")

    def remaining(self) -> Dict[int, Optional[int]]:
        """各条目剩余次数，便于测试断言"""
        return {i: (None if e.times is None else e.times - e.used) for i, e in enumerate(self.entries)}
